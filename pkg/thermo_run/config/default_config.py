"""Default configuration for the thermo_run framework.

This module defines the default settings used by every numerical routine of the
thermodynamic-formalism engine. Settings are grouped into plain dictionaries so that
a YAML settings file or command-line flags can override individual keys.

Configuration Sections:
----------------------
TOLERANCES:
    Numerical tolerances for structural identities, eigen residuals, root finders
    and the interior/endpoint margins used by the constrained and carpet solvers.

SOLVER_CONFIG:
    Iteration limits and discretisation sizes (power iteration, bracket doubling,
    inner t-grid, warm-start block size, enumeration guards).

ORACLE_CONFIG:
    Settings of the brute-force oracles (multi-start direct search, grid search).

PARALLEL_CONFIG:
    Worker pool sizing for spectrum batches, inner t-grids and multi-start searches.

OUTPUT_CONFIG:
    Number formatting of JSON reports and CSV tables.

Usage:
-----
Values can be overridden by:
1. Command-line arguments (highest priority)
2. A YAML settings file given with --config
3. The ``settings`` block of the input file
4. Environment variables (THERMO_RUN_THREADS)

Example:
-------
    from thermo_run.config.default_config import TOLERANCES, resolve_settings

    settings = resolve_settings({'tolerances': {'root': 1e-12}})
    settings['tolerances']['root']
"""

import copy
import os

TOLERANCES = {
    'structural': 1e-12,      # row sums, stationary normalisation
    'stationary': 1e-10,      # stationary * stochastic = stationary
    'eigen': 1e-10,           # fixed-point / eigen residuals
    'power_residual': 1e-12,  # relative Perron residual for power iteration
    'root': 1e-10,            # |int psi dmu_beta - alpha|
    't_root': 1e-11,          # residual of t(nu)
    'interior_margin': 1e-9,  # distance of alpha from the boundary of I_psi
    'endpoint': 1e-7,         # t-distance classifying endpoint maximisers
    'golden': 1e-10,          # golden-section refinement in t
    'outer': 1e-9,            # |G(D)| at the reported D
    'variational': 1e-9,      # |h + int phi - P|
    'degenerate': 1e-12,      # t_upper - t_lower below this is degenerate
}

SOLVER_CONFIG = {
    'max_power_iterations': 10**6,
    'squarings': 8,               # power iteration runs on B^(2^squarings)
    'max_bracket_doublings': 60,
    't_grid_points': 64,
    'warm_start_block': 8,        # grid points sharing one warm-started beta chain
    'enumeration_guard': 10**6,
    'grid_point_guard': 2 * 10**6,
    'qform_truncation': 200,
}

ORACLE_CONFIG = {
    'starts': 32,
    'shrink': 0.5,
    'min_step': 1e-10,
    'initial_step': 0.25,
    'max_iterations': 200000,
    'seed': 0,
    'max_cycle_length': 20,
    'grid_resolution': 200,
}

PARALLEL_CONFIG = {
    'threads': os.environ.get('THERMO_RUN_THREADS', '1'),  # resolved by get_worker_count
    'reserved_cpus': 0,
    'backend': 'threading',  # 'threading' or 'loky'
}

OUTPUT_CONFIG = {
    'report_digits': 15,
    'csv_digits': 12,
}

DEFAULT_SETTINGS = {
    'tolerances': TOLERANCES,
    'solver': SOLVER_CONFIG,
    'oracle': ORACLE_CONFIG,
    'parallel': PARALLEL_CONFIG,
    'output': OUTPUT_CONFIG,
}


def resolve_settings(*overrides):
    """Merge override dictionaries into a deep copy of the defaults.

    Args:
        *overrides: Dictionaries shaped like DEFAULT_SETTINGS. Later ones win.
            ``None`` entries are skipped.

    Returns:
        dict: Complete settings dictionary.
    """
    settings = copy.deepcopy(DEFAULT_SETTINGS)
    for override in overrides:
        if not override:
            continue
        for section, values in override.items():
            if section not in settings:
                settings[section] = {}
            if isinstance(values, dict):
                settings[section].update(values)
            else:
                settings[section] = values
    return settings


def get_setting(settings, section, key):
    """Look up ``settings[section][key]``, falling back to the defaults.

    Args:
        settings (dict or None): Resolved settings, possibly partial.
        section (str): Section name such as ``'tolerances'``.
        key (str): Key inside the section.

    Returns:
        The configured value.
    """
    if settings and key in settings.get(section, {}):
        return settings[section][key]
    return DEFAULT_SETTINGS[section][key]
