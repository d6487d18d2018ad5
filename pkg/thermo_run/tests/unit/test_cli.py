"""Test the command line interface."""

import logging
import pytest
from unittest.mock import patch

from thermo_run.cli.runner import (
    build_settings, load_config, parse_arguments, parse_tolerance_overrides, validate_config
)
from thermo_run.core.exceptions import ConfigError


def test_parse_arguments_pressure():
    """Test parsing command line arguments for a pressure run."""
    with patch('sys.argv', ['thermo_run', 'pressure', '--input', 'run.json']):
        args = parse_arguments()

        assert args.command == 'pressure'
        assert args.input == 'run.json'
        assert args.output is None
        assert args.tol == []
        assert args.seed is None
        assert args.log_level == 'INFO'


def test_parse_arguments_all_flags():
    """Test parsing every optional flag."""
    args = parse_arguments(['spectrum', '--input', 'in.json', '--output', 'out/run.json',
                            '--config', 'settings.yaml', '--tol', 'root=1e-12', '--tol', 'golden=1e-9',
                            '--seed', '7', '--threads', 'auto', '--log-level', 'DEBUG'])
    assert args.command == 'spectrum'
    assert args.tol == ['root=1e-12', 'golden=1e-9']
    assert args.seed == 7
    assert args.threads == 'auto'


def test_unknown_command_exits():
    """Unknown commands are rejected by argparse."""
    with patch('sys.argv', ['thermo_run', 'entropy', '--input', 'run.json']):
        with pytest.raises(SystemExit):
            parse_arguments()


def test_input_is_required():
    with pytest.raises(SystemExit):
        parse_arguments(['pressure'])


# ---------------------------------------------------------------------------
# validate_config
# ---------------------------------------------------------------------------

def test_validate_config_accepts_known_keys():
    config = {
        'tolerances': {'root': 1e-11, 'golden': 1e-9},
        'solver': {'t_grid_points': 32},
        'oracle': {'seed': 4, 'starts': 8},
        'parallel': {'threads': 2},
    }
    # Should return cleanly
    validate_config(config)


def test_validate_config_warns_on_unknown_key(caplog):
    """Unknown keys inside a known section only warn."""
    with caplog.at_level(logging.WARNING, logger='dev'):
        validate_config({'tolerances': {'roots': 1e-11}}, 'settings.yaml')
    assert any("roots" in record.message for record in caplog.records)


def test_validate_config_rejects_unknown_section():
    with pytest.raises(ConfigError):
        validate_config({'database': {'type': 'sqlite'}})


def test_validate_config_rejects_non_mapping_section():
    with pytest.raises(ConfigError):
        validate_config({'tolerances': [1e-9]})


# ---------------------------------------------------------------------------
# tolerance overrides and settings precedence
# ---------------------------------------------------------------------------

def test_parse_tolerance_overrides():
    assert parse_tolerance_overrides(['root=1e-12', 'outer=2e-9']) == {'root': 1e-12, 'outer': 2e-9}
    assert parse_tolerance_overrides([]) == {}


@pytest.mark.parametrize("item", ['root', 'unknown=1e-9', 'root=abc', 'root=0', 'root=-1e-9'])
def test_parse_tolerance_overrides_rejects(item):
    with pytest.raises(ConfigError):
        parse_tolerance_overrides([item])


def test_settings_precedence(tmp_path):
    """Flags beat the YAML file, which beats the input block, which beats the defaults."""
    config = tmp_path / 'settings.yaml'
    config.write_text("tolerances:\n  root: 1.0e-9\n  golden: 1.0e-8\noracle:\n  seed: 5\n")
    document = {'settings': {'tolerances': {'root': 1e-8, 'outer': 1e-7}, 'oracle': {'seed': 3}}}

    args = parse_arguments(['levelset', '--input', 'in.json', '--config', str(config),
                            '--tol', 'root=1e-11', '--threads', '3'])
    settings = build_settings(args, document)
    assert settings['tolerances']['root'] == 1e-11
    assert settings['tolerances']['golden'] == 1e-8
    assert settings['tolerances']['outer'] == 1e-7
    assert settings['tolerances']['t_root'] == 1e-11
    assert settings['oracle']['seed'] == 5
    assert settings['parallel']['threads'] == 3

    args = parse_arguments(['levelset', '--input', 'in.json', '--seed', '9'])
    settings = build_settings(args, document)
    assert settings['tolerances']['root'] == 1e-8
    assert settings['oracle']['seed'] == 9


def test_yaml_exponent_strings_are_coerced(tmp_path):
    config = tmp_path / 'settings.yaml'
    config.write_text("tolerances:\n  root: 1e-12\n")
    args = parse_arguments(['pressure', '--input', 'in.json', '--config', str(config)])
    assert build_settings(args, {})['tolerances']['root'] == 1e-12


@pytest.mark.parametrize("threads", ['0', 'many', '-2'])
def test_invalid_thread_count(threads):
    args = parse_arguments(['pressure', '--input', 'in.json', '--threads', threads])
    with pytest.raises(ConfigError):
        build_settings(args, {})


def test_settings_block_must_be_an_object():
    args = parse_arguments(['pressure', '--input', 'in.json'])
    with pytest.raises(ConfigError):
        build_settings(args, {'settings': [1, 2]})


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / 'missing.yaml'))
    broken = tmp_path / 'broken.yaml'
    broken.write_text("tolerances: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(str(broken))
    scalar = tmp_path / 'scalar.yaml'
    scalar.write_text("42\n")
    with pytest.raises(ConfigError):
        load_config(str(scalar))
