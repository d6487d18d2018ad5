"""JSON handling for thermo_run input documents and reports.

An input document describes one experiment: the system, the command
parameters and optional settings overrides. Every parse error is raised as a
:class:`SchemaError` carrying the JSON pointer of the offending value, for
example ``/carpet/rows/1/phi/0``.

Document keys:

    shift       {"symbols": n, "transitions": [[0/1, ...], ...]}
    phi, psi    {"depth": k, "values": {"0-1": real, ...}} or a list of reals (depth 1)
    alpha       real
    alpha_grid  list of reals or {"start", "stop", "num", "open"}
    carpet      {"base": shift, "rows": [{"row": i, "columns": [ids], "phi": [reals]}], "psi": [reals]}
    mcmullen    {"l": int, "m": int, "row_counts": [ints]}
    measure     {"stochastic": [[...]], "stationary": [...] (optional)}
    gibbs_max_len, max_cycle_length, resolution, beta   integers / reals
    settings    partial settings dictionary
"""

import json
import logging
import math
from numbers import Real

import numpy as np

from thermo_run.core.exceptions import SchemaError, ThermoRunError
from thermo_run.core.utils import round_sig
from thermo_run.models.carpet import CarpetRow, CarpetSystem
from thermo_run.models.shift_space import MarkovMeasure, Potential, ShiftSpace, markov_measure

logger = logging.getLogger('dev')

DOCUMENT_KEYS = {
    'command', 'shift', 'phi', 'psi', 'alpha', 'alpha_grid', 'carpet', 'mcmullen', 'measure',
    'gibbs_max_len', 'max_cycle_length', 'resolution', 'beta', 'settings', 'description',
}


def _child(pointer, key):
    return f"{pointer}/{key}"


def _require(data, key, pointer):
    if not isinstance(data, dict):
        raise SchemaError(f"expected an object, got {type(data).__name__}", pointer)
    if key not in data:
        raise SchemaError(f"missing required key '{key}'", pointer)
    return data[key]


def parse_number(value, pointer):
    if isinstance(value, bool) or not isinstance(value, Real) or not math.isfinite(value):
        raise SchemaError(f"expected a finite number, got {value!r}", pointer)
    return float(value)


def parse_integer(value, pointer, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"expected an integer, got {value!r}", pointer)
    if minimum is not None and value < minimum:
        raise SchemaError(f"expected an integer >= {minimum}, got {value}", pointer)
    return value


def parse_number_list(value, pointer, length=None):
    if not isinstance(value, list):
        raise SchemaError(f"expected a list, got {type(value).__name__}", pointer)
    if length is not None and len(value) != length:
        raise SchemaError(f"expected {length} entries, got {len(value)}", pointer)
    return [parse_number(v, _child(pointer, i)) for i, v in enumerate(value)]


def parse_matrix(value, pointer, size=None):
    if not isinstance(value, list) or not value:
        raise SchemaError("expected a non-empty list of rows", pointer)
    size = size if size is not None else len(value)
    if len(value) != size:
        raise SchemaError(f"expected {size} rows, got {len(value)}", pointer)
    return np.array([parse_number_list(row, _child(pointer, i), size) for i, row in enumerate(value)])


def parse_shift_space(data, pointer='/shift'):
    """``{"symbols": n, "transitions": [[0/1, ...], ...]}`` to a ShiftSpace."""
    n = parse_integer(_require(data, 'symbols', pointer), _child(pointer, 'symbols'), minimum=1)
    matrix = parse_matrix(_require(data, 'transitions', pointer), _child(pointer, 'transitions'), n)
    for (a, b), entry in np.ndenumerate(matrix):
        if entry not in (0.0, 1.0):
            raise SchemaError(f"transition entries must be 0 or 1, got {entry:g}",
                              _child(_child(_child(pointer, 'transitions'), a), b))
    try:
        return ShiftSpace(matrix.astype(np.int64))
    except ThermoRunError as exc:
        raise SchemaError(str(exc), pointer) from exc


def parse_word(key, pointer):
    try:
        return tuple(int(s) for s in key.split('-'))
    except ValueError:
        raise SchemaError(f"word keys are symbols separated by '-', got '{key}'", pointer)


def parse_potential(data, space, pointer):
    """Potential object, or a bare list of per-symbol values for depth 1."""
    if isinstance(data, list):
        values = parse_number_list(data, pointer, space.symbol_count)
        return Potential.from_vector(values)
    depth = parse_integer(_require(data, 'depth', pointer), _child(pointer, 'depth'), minimum=1)
    raw = _require(data, 'values', pointer)
    if not isinstance(raw, dict):
        raise SchemaError("expected an object keyed by words", _child(pointer, 'values'))
    values = {}
    for key, value in raw.items():
        key_pointer = _child(_child(pointer, 'values'), key)
        values[parse_word(key, key_pointer)] = parse_number(value, key_pointer)
    try:
        potential = Potential(depth, values)
        potential.check_against(space)
    except ThermoRunError as exc:
        raise SchemaError(str(exc), pointer) from exc
    return potential


def parse_measure(data, space, pointer='/measure'):
    """Markov measure; the stationary vector is computed when omitted."""
    stochastic = parse_matrix(_require(data, 'stochastic', pointer), _child(pointer, 'stochastic'),
                              space.symbol_count)
    try:
        if 'stationary' in data:
            stationary = parse_number_list(data['stationary'], _child(pointer, 'stationary'), space.symbol_count)
            measure = MarkovMeasure(stochastic, np.array(stationary))
            measure.check_compatible(space)
            return measure
        return markov_measure(space, stochastic)
    except ThermoRunError as exc:
        raise SchemaError(str(exc), pointer) from exc


def parse_carpet(data, pointer='/carpet'):
    """CarpetSystem from ``{"base", "rows", "psi"}``; rows may be listed in any order."""
    base = parse_shift_space(_require(data, 'base', pointer), _child(pointer, 'base'))
    raw_rows = _require(data, 'rows', pointer)
    if not isinstance(raw_rows, list):
        raise SchemaError("expected a list of rows", _child(pointer, 'rows'))
    rows = {}
    for k, row in enumerate(raw_rows):
        row_pointer = _child(_child(pointer, 'rows'), k)
        index = parse_integer(_require(row, 'row', row_pointer), _child(row_pointer, 'row'), minimum=0)
        if index >= base.symbol_count or index in rows:
            raise SchemaError(f"row index {index} is out of range or repeated", _child(row_pointer, 'row'))
        columns = _require(row, 'columns', row_pointer)
        if not isinstance(columns, list):
            raise SchemaError("expected a list of rectangle ids", _child(row_pointer, 'columns'))
        ids = [parse_integer(c, _child(_child(row_pointer, 'columns'), i), minimum=0) for i, c in enumerate(columns)]
        phi = parse_number_list(_require(row, 'phi', row_pointer), _child(row_pointer, 'phi'), len(ids))
        rows[index] = (ids, phi, row_pointer)
    if len(rows) != base.symbol_count:
        raise SchemaError(f"expected {base.symbol_count} rows, got {len(rows)}", _child(pointer, 'rows'))
    psi = parse_number_list(_require(data, 'psi', pointer), _child(pointer, 'psi'), base.symbol_count)
    try:
        carpet_rows = []
        for i in range(base.symbol_count):
            ids, phi, row_pointer = rows[i]
            try:
                carpet_rows.append(CarpetRow(tuple(ids), phi))
            except ThermoRunError as exc:
                raise SchemaError(str(exc), row_pointer) from exc
        return CarpetSystem(base, tuple(carpet_rows), psi)
    except SchemaError:
        raise
    except ThermoRunError as exc:
        raise SchemaError(str(exc), pointer) from exc


def parse_mcmullen(data, pointer='/mcmullen'):
    """``(l, m, row_counts)`` of a general Sierpinski carpet."""
    l = parse_integer(_require(data, 'l', pointer), _child(pointer, 'l'), minimum=2)
    m = parse_integer(_require(data, 'm', pointer), _child(pointer, 'm'), minimum=2)
    raw = _require(data, 'row_counts', pointer)
    if not isinstance(raw, list):
        raise SchemaError("expected a list of integers", _child(pointer, 'row_counts'))
    counts = [parse_integer(r, _child(_child(pointer, 'row_counts'), i), minimum=0) for i, r in enumerate(raw)]
    return l, m, counts


def parse_alpha_grid(data, pointer='/alpha_grid'):
    if isinstance(data, list):
        return parse_number_list(data, pointer)
    if not isinstance(data, dict):
        raise SchemaError("expected a list or an object with start, stop and num", pointer)
    grid = {
        'start': parse_number(_require(data, 'start', pointer), _child(pointer, 'start')),
        'stop': parse_number(_require(data, 'stop', pointer), _child(pointer, 'stop')),
        'num': parse_integer(_require(data, 'num', pointer), _child(pointer, 'num'), minimum=1),
    }
    if 'open' in data:
        if not isinstance(data['open'], bool):
            raise SchemaError("expected true or false", _child(pointer, 'open'))
        grid['open'] = data['open']
    return grid


def load_document(path):
    """Read an input document, rejecting unknown top-level keys."""
    try:
        with open(path, 'r') as f:
            document = json.load(f)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", '')
    if not isinstance(document, dict):
        raise SchemaError("the input document must be a JSON object", '')
    unknown = sorted(set(document) - DOCUMENT_KEYS)
    if unknown:
        raise SchemaError(f"unknown key '{unknown[0]}'", f"/{unknown[0]}")
    logger.debug(f"Loaded input document {path} with keys {sorted(document)}")
    return document


def to_jsonable(value, digits=15):
    """Recursively convert numpy data to JSON types, rounding floats to ``digits`` significant digits."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v, digits) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist(), digits)
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = round_sig(value, digits)
        if not math.isfinite(value):
            return None
        return value
    return value


def dumps_report(report, digits=15):
    """Serialize a report deterministically (insertion-ordered keys, fixed rounding)."""
    return json.dumps(to_jsonable(report, digits), indent=2) + '\n'


def loads_report(text):
    """Parse an emitted report and re-validate the systems it embeds."""
    try:
        report = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON report: {exc.msg}", '')
    for key in ('command', 'settings', 'result'):
        _require(report, key, '')
    system = report.get('input', {})
    if 'shift' in system:
        space = parse_shift_space(system['shift'], '/input/shift')
        for name in ('phi', 'psi'):
            if name in system:
                parse_potential(system[name], space, f'/input/{name}')
    if 'carpet' in system:
        parse_carpet(system['carpet'], '/input/carpet')
    return report


__all__ = [
    'DOCUMENT_KEYS', 'parse_number', 'parse_integer', 'parse_number_list', 'parse_matrix',
    'parse_shift_space', 'parse_word', 'parse_potential', 'parse_measure', 'parse_carpet',
    'parse_mcmullen', 'parse_alpha_grid', 'load_document', 'to_jsonable', 'dumps_report', 'loads_report',
]
