"""Core engine for running thermo_run experiments.

This module is the central dispatcher between a parsed input document and the
numerical modules. Each command reads the keys it needs from the document,
runs the corresponding operation and returns a report dictionary together with
any CSV tables the command produces.

Commands:
--------
- pressure:        topological pressure of ``phi`` on ``shift``
- equilibrium:     equilibrium state of ``phi`` with Perron data and Gibbs bounds
- levelset:        constrained pressure of ``phi`` on the level set ``int psi = alpha``
- spectrum:        the same over ``alpha_grid`` (CSV ``alpha,beta,pressure``)
- birkhoff-range:  range of ``int psi`` over invariant measures with witness cycles
- carpet-dim:      measure of full dimension of ``carpet`` or ``mcmullen`` (CSV ``t,beta,h``),
                   with the pressure relation at ``beta`` (a number or a list, default 1)
- measure-dim:     dimension of the relativized equilibrium state above ``measure``
- oracle-compare:  solver output against the brute-force oracles

Report Layout:
-------------
Every report is a dictionary with the keys ``command``, ``version``,
``input`` (the system in canonical form), ``settings`` (tolerances and seed)
and ``result``. Reports carry no timestamps or thread counts, so identical
inputs and seeds give identical reports.

Usage Examples:
-------------
    document = load_document('inputs/mcmullen_carpet.json')
    report, tables = run_command('carpet-dim', document, resolve_settings(document.get('settings')))
"""

import logging

from thermo_run import __version__
from thermo_run.config.default_config import get_setting
from thermo_run.core.exceptions import DomainRejection, SchemaError
from thermo_run.io.json_handlers import (
    parse_alpha_grid, parse_carpet, parse_integer, parse_mcmullen, parse_measure, parse_number,
    parse_number_list, parse_potential, parse_shift_space
)
from thermo_run.models.carpet import (
    CarpetSystem, inner_trace, ly_dimension, measure_dimension, pressure_relation, solve_full_dimension,
    t_extremes, t_of_nu
)
from thermo_run.models.constrained import (
    birkhoff_range, concavity_defect, levelset_spectrum, solve_beta
)
from thermo_run.models.oracle import (
    GRID_MAX_SYMBOLS, bernoulli_search, constrained_grid_search, cycle_enumeration, mcmullen_dimension
)
from thermo_run.models.parameters import alpha_grid
from thermo_run.models.shift_space import common_block, higher_block, unblock_cycle
from thermo_run.models.transfer import (
    equilibrium, gibbs_ratio_check, pressure, second_eigenvalue_modulus
)

logger = logging.getLogger('dev')

COMMANDS = (
    'pressure', 'equilibrium', 'levelset', 'spectrum', 'birkhoff-range', 'carpet-dim',
    'measure-dim', 'oracle-compare',
)

SPECTRUM_HEADER = ('alpha', 'beta', 'pressure')
TRACE_HEADER = ('t', 'beta', 'h')


def _require_key(document, key):
    if key not in document:
        raise SchemaError(f"missing required key '{key}'", '')
    return document[key]


def _shift(document):
    return parse_shift_space(_require_key(document, 'shift'), '/shift')


def _block_inputs(document, names):
    """Shift and potentials recoded on one block shift, with the echo of the originals.

    Potentials of different depths are deepened to the largest depth first. The
    returned words give the original word of every block symbol.
    """
    space = _shift(document)
    potentials = [parse_potential(_require_key(document, name), space, f'/{name}') for name in names]
    echo = {'shift': space.to_dict()}
    echo.update({name: potential.to_dict() for name, potential in zip(names, potentials)})
    block, recoded, words = common_block(space, potentials)
    if block is not space:
        logger.info(f"Recoded onto {block.symbol_count} block symbols of length {len(words[0])}")
    return block, recoded, words, echo


def _unblocked(data, words):
    """Copy of a range dictionary with its witness cycles in original symbols."""
    data = dict(data)
    for key in ('lower_cycle', 'upper_cycle'):
        if key in data:
            data[key] = unblock_cycle(words, data[key])
    return data


def _block_words(result, words):
    if len(words[0]) > 1:
        result['block_words'] = ['-'.join(str(s) for s in w) for w in words]
    return result


def _solve_beta_unblocked(space, phi, psi, alpha, settings, rng, words):
    try:
        return solve_beta(space, phi, psi, alpha, settings, rng=rng)
    except DomainRejection as exc:
        if 'birkhoff_range' in exc.payload:
            exc.payload['birkhoff_range'] = _unblocked(exc.payload['birkhoff_range'], words)
        raise


def _recoded(document, name='phi'):
    """Shift and potential, recoded on the block shift when the potential is deeper."""
    space = _shift(document)
    potential = parse_potential(_require_key(document, name), space, f'/{name}')
    echo = {'shift': space.to_dict(), name: potential.to_dict()}
    if potential.depth > 1:
        space, potential = higher_block(space, potential)
    return space, potential, echo


def _carpet(document):
    if 'carpet' in document:
        return parse_carpet(document['carpet'], '/carpet'), None
    if 'mcmullen' in document:
        l, m, counts = parse_mcmullen(document['mcmullen'], '/mcmullen')
        try:
            return CarpetSystem.from_mcmullen(l, m, counts), (l, m, counts)
        except ValueError as exc:
            raise SchemaError(str(exc), '/mcmullen') from exc
    raise SchemaError("missing required key 'carpet' (or 'mcmullen')", '')


def _settings_echo(settings):
    return {
        'tolerances': dict(settings['tolerances']),
        'seed': get_setting(settings, 'oracle', 'seed'),
    }


def run_pressure(document, settings, n_workers=1):
    space, phi, echo = _recoded(document)
    value = pressure(space, phi, settings)
    logger.info(f"P(phi) = {value:.15g}")
    return echo, {'pressure': value}, {}


def run_equilibrium(document, settings, n_workers=1):
    space, phi, echo = _recoded(document)
    report = equilibrium(space, phi, settings)
    result = report.to_dict()
    result['variational_residual'] = report.variational_residual
    result['second_eigenvalue_modulus'] = second_eigenvalue_modulus(report.measure)
    if 'gibbs_max_len' in document:
        max_len = parse_integer(document['gibbs_max_len'], '/gibbs_max_len', minimum=1)
        result['gibbs_ratios'] = gibbs_ratio_check(report, space, phi, max_len, settings).to_dict()
    return echo, result, {}


def _levelset_inputs(document):
    space, (phi, psi), words, echo = _block_inputs(document, ('phi', 'psi'))
    return space, phi, psi, words, echo


def run_levelset(document, settings, n_workers=1):
    space, phi, psi, words, echo = _levelset_inputs(document)
    alpha = parse_number(_require_key(document, 'alpha'), '/alpha')
    rng = birkhoff_range(space, psi, settings)
    solution = _solve_beta_unblocked(space, phi, psi, alpha, settings, rng, words)
    result = solution.to_dict()
    result['birkhoff_range'] = _unblocked(rng.to_dict(), words)
    return echo, _block_words(result, words), {}


def run_spectrum(document, settings, n_workers=1):
    space, phi, psi, words, echo = _levelset_inputs(document)
    grid = alpha_grid(parse_alpha_grid(_require_key(document, 'alpha_grid')))
    entries = levelset_spectrum(space, phi, psi, grid, settings, n_workers=n_workers)
    rows = [(e.alpha, e.solution.beta, e.solution.pressure_K_alpha) for e in entries if e.solution is not None]
    result = {
        'birkhoff_range': _unblocked(birkhoff_range(space, psi, settings).to_dict(), words),
        'entries': [entry.to_dict() for entry in entries],
        'solved': len(rows),
        'concavity_defect': concavity_defect(entries) if len(rows) >= 3 else None,
    }
    return echo, _block_words(result, words), {'spectrum': (SPECTRUM_HEADER, rows)}


def run_birkhoff_range(document, settings, n_workers=1):
    space, (psi,), words, echo = _block_inputs(document, ('psi',))
    rng = birkhoff_range(space, psi, settings)
    result = _unblocked(rng.to_dict(), words)
    result['degenerate'] = rng.is_degenerate
    return echo, result, {}


def _relation_betas(document):
    """``beta`` as a number or a non-empty list of numbers; defaults to 1."""
    value = document.get('beta', 1.0)
    if isinstance(value, list):
        if not value:
            raise SchemaError("expected at least one beta value", '/beta')
        return parse_number_list(value, '/beta'), True
    return [parse_number(value, '/beta')], False


def run_carpet_dim(document, settings, n_workers=1):
    system, pattern = _carpet(document)
    betas, many = _relation_betas(document)
    report = solve_full_dimension(system, settings, n_workers=n_workers)
    result = report.to_dict()
    relations = [pressure_relation(system, beta, settings) for beta in betas]
    result['pressure_relation'] = relations if many else relations[0]
    echo = {'carpet': system.to_dict()}
    if pattern is not None:
        echo['mcmullen'] = {'l': pattern[0], 'm': pattern[1], 'row_counts': pattern[2]}
    if 'beta' in document:
        echo['beta'] = betas if many else betas[0]
    rows = report.trace
    if not rows and report.t_range[1] > report.t_range[0]:
        rows = inner_trace(system, report.D, settings, n_workers=n_workers)
    return echo, result, {'trace': (TRACE_HEADER, rows)}


def run_measure_dim(document, settings, n_workers=1):
    system, _ = _carpet(document)
    nu = parse_measure(_require_key(document, 'measure'), system.base, '/measure')
    t = t_of_nu(system, nu, settings)
    result = {
        'dimension': measure_dimension(system, nu, settings),
        't_nu': t,
        'lifted_dimension': ly_dimension(system, nu, system.fiber_weights(t)),
        't_range': list(t_extremes(system, settings)),
        'measure': nu.to_dict(),
    }
    return {'carpet': system.to_dict()}, result, {}


def run_oracle_compare(document, settings, n_workers=1):
    comparisons = {}
    echo = {}
    if 'carpet' in document or 'mcmullen' in document:
        system, pattern = _carpet(document)
        echo['carpet'] = system.to_dict()
        solved = solve_full_dimension(system, settings, n_workers=n_workers).D
        comparisons['solve_full_dimension'] = solved
        if pattern is not None:
            closed = mcmullen_dimension(*pattern)
            comparisons['mcmullen_closed_form'] = closed.to_dict()
            comparisons['closed_form_gap'] = abs(closed.value - solved)
        if system.base.is_full_shift():
            search = bernoulli_search(system, settings, n_workers=n_workers)
            comparisons['bernoulli_search'] = search.to_dict()
            comparisons['search_gap'] = abs(search.value - solved)
    if 'shift' in document and 'psi' in document:
        constrained = 'phi' in document and 'alpha' in document
        names = ('psi', 'phi') if constrained else ('psi',)
        space, potentials, words, shift_echo = _block_inputs(document, names)
        psi = potentials[0]
        echo.update(shift_echo)
        rng = birkhoff_range(space, psi, settings)
        max_len = document.get('max_cycle_length', min(space.symbol_count, 20))
        max_len = parse_integer(max_len, '/max_cycle_length', minimum=1)
        cycles = cycle_enumeration(space, psi, max_len, settings)
        comparisons['birkhoff_range'] = _unblocked(rng.to_dict(), words)
        enumeration = cycles.to_dict()
        enumeration['certificate'] = _unblocked(enumeration['certificate'], words)
        comparisons['cycle_enumeration'] = enumeration
        comparisons['range_gap'] = max(abs(rng.lower - cycles.certificate['lower']),
                                       abs(rng.upper - cycles.value))
        if constrained:
            phi = potentials[1]
            alpha = parse_number(document['alpha'], '/alpha')
            resolution = document.get('resolution')
            if resolution is not None:
                resolution = parse_integer(resolution, '/resolution', minimum=1)
            solution = _solve_beta_unblocked(space, phi, psi, alpha, settings, rng, words)
            comparisons['solve_beta'] = solution.to_dict(include_maximizer=False)
            if space.symbol_count > GRID_MAX_SYMBOLS:
                logger.warning(f"Grid search skipped: {space.symbol_count} symbols exceed {GRID_MAX_SYMBOLS}")
                comparisons['grid_search'] = None
            else:
                grid = constrained_grid_search(space, phi, psi, alpha, resolution, settings)
                comparisons['grid_search'] = grid.to_dict()
                comparisons['grid_gap'] = solution.pressure_K_alpha - grid.value
        _block_words(comparisons, words)
    if not comparisons:
        raise SchemaError("oracle-compare needs 'carpet', 'mcmullen' or 'shift' with 'psi'", '')
    return echo, comparisons, {}


HANDLERS = {
    'pressure': run_pressure,
    'equilibrium': run_equilibrium,
    'levelset': run_levelset,
    'spectrum': run_spectrum,
    'birkhoff-range': run_birkhoff_range,
    'carpet-dim': run_carpet_dim,
    'measure-dim': run_measure_dim,
    'oracle-compare': run_oracle_compare,
}


def run_command(command, document, settings, n_workers=1):
    """Run one command on a loaded input document.

    Args:
        command (str): One of COMMANDS.
        document (dict): Parsed input document.
        settings (dict): Resolved settings.
        n_workers (int, optional): Worker count handed to the parallel sections.

    Returns:
        tuple: ``(report, tables)`` where ``tables`` maps a table name to
        ``(header, rows)``.

    Raises:
        ValueError: If the command is unknown.
        SchemaError: If the document lacks or mistypes a key the command needs.
    """
    if command not in HANDLERS:
        raise ValueError(f"Unknown command '{command}', expected one of {COMMANDS}")
    logger.info(f"Running command '{command}' with {n_workers} worker(s)")
    echo, result, tables = HANDLERS[command](document, settings, n_workers=n_workers)
    report = {
        'command': command,
        'version': __version__,
        'input': echo,
        'settings': _settings_echo(settings),
        'result': result,
    }
    return report, tables


def rejection_report(command, exc, settings):
    """Report written when the input is rejected; carries the exception payload."""
    return {
        'command': command,
        'version': __version__,
        'settings': _settings_echo(settings),
        'result': None,
        'error': {
            'type': type(exc).__name__,
            'message': str(exc),
            'payload': getattr(exc, 'payload', {}),
            'pointer': getattr(exc, 'pointer', None),
        },
    }


__all__ = ['COMMANDS', 'SPECTRUM_HEADER', 'TRACE_HEADER', 'HANDLERS', 'run_command', 'rejection_report']
