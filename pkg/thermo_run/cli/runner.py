"""Command-line interface for running thermo_run experiments.

This module provides the command-line surface of the engine. A run reads one
self-describing JSON input file (system plus command parameters), resolves the
settings, dispatches to the requested computation and writes a JSON report and,
for spectra and carpet traces, a CSV table.

Usage Examples:
    # Pressure of a potential, report on stdout
    thermo_run pressure --input inputs/full_shift_pressure.json

    # Measure of full dimension of a McMullen carpet, with report and trace files
    thermo_run carpet-dim --input inputs/mcmullen_carpet.json --output out/carpet.json

    # Spectrum with a settings file, a tighter root tolerance and 4 threads
    thermo_run spectrum --input inputs/golden_mean_spectrum.json --config settings.yaml \\
        --tol root=1e-12 --threads 4

Parameters:
    command: pressure, equilibrium, levelset, spectrum, birkhoff-range,
             carpet-dim, measure-dim or oracle-compare
    --input: Path of the JSON input document
    --output: Path of the JSON report (default: standard output; CSV tables
              then go to <table>.csv in the working directory)
    --config: YAML settings file
    --tol: Tolerance override NAME=VALUE (repeatable)
    --seed: Seed of the stochastic oracles
    --threads: Worker count or 'auto'
    --log-level: Console log level

Precedence of settings:
    command-line flags > YAML settings file > input ``settings`` block > defaults

Environment Variables:
    THERMO_RUN_LOG_DIR: Directory of the log file
    THERMO_RUN_THREADS: Default worker count

Exit codes:
    0 on success, 2 when the input is rejected (schema violation, domain
    rejection such as alpha on the boundary of I_psi), 1 on internal failure.
"""

import argparse
import logging
import logging.config
import os
import sys
import traceback
from datetime import datetime

import yaml

from thermo_run.config.default_config import DEFAULT_SETTINGS, TOLERANCES, resolve_settings
from thermo_run.config.logging_config import get_logging_config
from thermo_run.core.engine import COMMANDS, rejection_report, run_command
from thermo_run.core.exceptions import ConfigError, ThermoRunError
from thermo_run.core.parallel import get_worker_count
from thermo_run.io.file_manager import csv_path, write_csv, write_report
from thermo_run.io.json_handlers import load_document

logger = logging.getLogger('dev')

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_REJECTED = 2

# Define a comprehensive valid configuration structure for validation
VALID_CONFIG_STRUCTURE = {section: set(values) for section, values in DEFAULT_SETTINGS.items()}


def parse_arguments(argv=None):
    """Parse command-line arguments."""
    parser = argparse.ArgumentParser(description='Run thermodynamic formalism computations')
    parser.add_argument('command', choices=COMMANDS, help='Computation to run')
    parser.add_argument('--input', required=True, help='JSON input document')
    parser.add_argument('--output', help='JSON report path (default: standard output)')
    parser.add_argument('--config', type=str, help='YAML settings file')
    parser.add_argument('--tol', action='append', default=[], metavar='NAME=VALUE',
                        help='Tolerance override, e.g. root=1e-12 (repeatable)')
    parser.add_argument('--seed', type=int, help='Seed of the stochastic oracles')
    parser.add_argument('--threads', type=str, help="Worker count or 'auto'")
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='Console log level')
    return parser.parse_args(argv)


def load_config(config_file):
    """Load a YAML settings file.

    Raises:
        ConfigError: If the file is missing or does not parse.
    """
    if not os.path.exists(config_file):
        raise ConfigError(f"Config file not found: {config_file}")
    with open(config_file, 'r') as f:
        content = f.read()
    try:
        config = yaml.safe_load(content) or {}
    except yaml.YAMLError as e:
        logger.error(f"YAML parsing error in {config_file}: {e}")
        mark = getattr(e, 'problem_mark', None)
        if mark is not None:
            logger.error(f"Error position: line {mark.line + 1}, column {mark.column + 1}")
            lines = content.splitlines()
            if 0 <= mark.line < len(lines):
                logger.error(f"Problem line: {lines[mark.line]}")
                logger.error(f"              {' ' * mark.column}^")
        raise ConfigError(f"Invalid YAML in {config_file}") from e
    if not isinstance(config, dict):
        raise ConfigError(f"{config_file} must contain a mapping of sections")
    logger.info(f"Loaded configuration from {config_file}")
    logger.debug(f"Configuration structure: {list(config.keys())}")
    return config


def validate_config(config_to_validate, source='settings'):
    """Validate a settings dictionary against DEFAULT_SETTINGS.

    Unknown top-level sections abort the run; unknown keys inside a known
    section emit a warning and are passed through.
    """
    unknown_param_count = 0
    for section_name, values in config_to_validate.items():
        if section_name not in VALID_CONFIG_STRUCTURE:
            raise ConfigError(f"Unknown top-level section '{section_name}' in {source}")
        if not isinstance(values, dict):
            raise ConfigError(f"Section '{section_name}' in {source} must be a mapping")
        for param_name in values:
            if param_name not in VALID_CONFIG_STRUCTURE[section_name]:
                logger.warning("Unknown parameter '%s' in section '%s' of %s; check for typos.",
                               param_name, section_name, source)
                unknown_param_count += 1
    if unknown_param_count:
        logger.info("%s validated with %d unknown parameter(s).", source, unknown_param_count)
    else:
        logger.debug("%s validated successfully.", source)


def parse_tolerance_overrides(items):
    """``['root=1e-12', ...]`` to ``{'root': 1e-12}``; values must be positive."""
    overrides = {}
    for item in items:
        name, sep, value = item.partition('=')
        if not sep:
            raise ConfigError(f"Tolerance override '{item}' is not of the form NAME=VALUE")
        if name not in TOLERANCES:
            raise ConfigError(f"Unknown tolerance '{name}', expected one of {sorted(TOLERANCES)}")
        try:
            number = float(value)
        except ValueError:
            raise ConfigError(f"Tolerance '{name}' needs a number, got '{value}'")
        if not number > 0:
            raise ConfigError(f"Tolerance '{name}' must be positive, got {number}")
        overrides[name] = number
    return overrides


def build_settings(args, document):
    """Resolve settings with the precedence flags > YAML file > input block > defaults."""
    layers = []
    block = document.get('settings') or {}
    if not isinstance(block, dict):
        raise ConfigError("The input settings block must be an object")
    if block:
        validate_config(block, 'input settings block')
        layers.append(block)
    if args.config:
        config = load_config(args.config)
        validate_config(config, args.config)
        layers.append(config)
    flags = {}
    tolerances = parse_tolerance_overrides(args.tol)
    if tolerances:
        flags['tolerances'] = tolerances
    if args.seed is not None:
        flags['oracle'] = {'seed': args.seed}
    if args.threads is not None:
        threads = args.threads
        if threads != 'auto':
            if not threads.isdigit() or int(threads) < 1:
                raise ConfigError(f"--threads needs a positive integer or 'auto', got '{threads}'")
            threads = int(threads)
        flags['parallel'] = {'threads': threads}
    layers.append(flags)
    settings = resolve_settings(*layers)
    for name, value in settings['tolerances'].items():
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"Tolerance '{name}' needs a number, got {value!r}")
        if not value > 0:
            raise ConfigError(f"Tolerance '{name}' must be positive, got {value}")
        settings['tolerances'][name] = value
    return settings


def log_run_settings(settings, n_workers):
    logger.info("Tolerances in effect:")
    for name, value in settings['tolerances'].items():
        logger.info(f"  {name}: {value:g}")
    logger.info(f"Seed: {settings['oracle']['seed']}")
    logger.info(f"Threads: {n_workers} ({settings['parallel']['backend']} backend)")


def run(args):
    """Execute one run and return its exit code."""
    command = args.command
    settings = resolve_settings()
    try:
        document = load_document(args.input)
        settings = build_settings(args, document)
        n_workers = get_worker_count(settings['parallel']['threads'], settings['parallel']['reserved_cpus'])
        log_run_settings(settings, n_workers)
        report, tables = run_command(command, document, settings, n_workers=n_workers)
    except FileNotFoundError as e:
        logger.error(f"Input file not found: {e.filename}")
        return EXIT_REJECTED
    except ThermoRunError as e:
        if not isinstance(e, ValueError):
            logger.error(f"Error running '{command}': {e}")
            logger.debug(f"Traceback: {traceback.format_exc()}")
            return EXIT_FAILURE
        logger.error(f"Input rejected ({type(e).__name__}): {e}")
        write_report(rejection_report(command, e, settings), args.output,
                     settings['output']['report_digits'])
        return EXIT_REJECTED
    except Exception as e:
        logger.error(f"Error running '{command}': {e}")
        logger.error(f"Error details: {type(e).__name__}")
        logger.error(f"Traceback: {traceback.format_exc()}")
        return EXIT_FAILURE

    write_report(report, args.output, settings['output']['report_digits'])
    for table, (header, rows) in tables.items():
        path = csv_path(args.output, table)
        if args.output in (None, '-'):
            logger.info(f"Report went to stdout; writing the {table} table to {os.path.abspath(path)}")
        write_csv(path, header, rows, settings['output']['csv_digits'])
    return EXIT_OK


def main(argv=None):
    """Main entry point for the thermo_run CLI."""
    args = parse_arguments(argv)
    logging.config.dictConfig(get_logging_config(console_level=args.log_level))
    start_time = datetime.now()
    logger.info(f"========== THERMO RUN '{args.command}' STARTED ==========")
    logger.info(f"Command-line arguments: {vars(args)}")
    try:
        code = run(args)
    finally:
        total_run_time = (datetime.now() - start_time).total_seconds()
        logger.info(f"Total execution time: {total_run_time:.2f} seconds")
    logger.info(f"========== THERMO RUN FINISHED WITH EXIT CODE {code} ==========")
    return code


if __name__ == '__main__':
    sys.exit(main())
