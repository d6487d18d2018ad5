"""Tests for carpet systems, fibre dimensions and the measure of full dimension."""

import math

import numpy as np
import pytest

from thermo_run.config.default_config import resolve_settings
from thermo_run.core.exceptions import ConvergenceError, IncompatibleMeasureError, InvalidCarpetError
from thermo_run.models.carpet import (
    CASES, CarpetRow, CarpetSystem, _InnerProblem, fiber_dimension, fiber_pressure, inner_trace,
    ly_dimension, measure_dimension, pressure_relation, solve_full_dimension, t_extremes, t_of_nu
)
from thermo_run.models.parameters import (
    mcmullen_row_weights, random_carpet, random_fiber_weights, random_markov_measure
)
from thermo_run.models.shift_space import ShiftSpace, bernoulli, point_mass
from thermo_run.models.transfer import bowen_root, equilibrium
from thermo_run.tests.conftest import LOG2, LOG3

EXPONENT = LOG2 / LOG3
MCMULLEN_D = math.log(2.0 ** EXPONENT + 1.0) / LOG2


@pytest.fixture(scope='module')
def mcmullen_report():
    return solve_full_dimension(CarpetSystem.from_mcmullen(3, 2, [2, 1]))


def _uniform_rows_carpet():
    """Golden-mean base where every row has two rectangles of the same width."""
    rows = (CarpetRow((0, 1), [math.log(4.0)] * 2), CarpetRow((2, 3), [math.log(4.0)] * 2))
    return CarpetSystem(ShiftSpace.golden_mean(), rows, [LOG2, LOG3])


def test_fiber_pressure(mcmullen_carpet):
    assert fiber_pressure(mcmullen_carpet, 0.0).log_A.tolist() == pytest.approx([LOG2, 0.0])
    assert fiber_pressure(mcmullen_carpet, 1.0).log_A.tolist() == pytest.approx([LOG2 - LOG3, -LOG3])
    assert fiber_pressure(mcmullen_carpet, 0.5).to_dict()['t'] == 0.5
    with pytest.raises(ValueError):
        fiber_pressure(mcmullen_carpet, -0.1)


def test_t_of_nu_examples(mcmullen_carpet, full_shift):
    assert t_of_nu(mcmullen_carpet, point_mass(full_shift, [1])) == 0.0
    assert t_of_nu(mcmullen_carpet, point_mass(full_shift, [0])) == pytest.approx(EXPONENT, abs=1e-12)
    assert t_of_nu(mcmullen_carpet, bernoulli(full_shift, [0.5, 0.5])) == pytest.approx(EXPONENT / 2.0, abs=1e-12)


def test_t_of_nu_rejects_measures_on_other_bases(mcmullen_carpet, golden_mean):
    parry = equilibrium(golden_mean, [0.0, 0.0]).measure
    with pytest.raises(IncompatibleMeasureError):
        t_of_nu(mcmullen_carpet, parry)


def test_t_extremes(mcmullen_carpet, golden_carpet):
    assert t_extremes(mcmullen_carpet) == pytest.approx((0.0, EXPONENT), abs=1e-12)
    # on the golden base the two-cycle 0-1 gives the smallest mean of log A_t
    assert t_extremes(golden_carpet) == pytest.approx((EXPONENT / 2.0, EXPONENT), abs=1e-12)


def test_t_of_nu_lies_in_t_range(rng, golden_carpet):
    t_lower, t_upper = t_extremes(golden_carpet)
    for _ in range(30):
        nu = random_markov_measure(rng, golden_carpet.base, concentration=0.5)
        assert t_lower - 1e-10 <= t_of_nu(golden_carpet, nu) <= t_upper + 1e-10


def test_measure_dimension_examples(mcmullen_carpet, full_shift):
    assert measure_dimension(mcmullen_carpet, point_mass(full_shift, [0])) == pytest.approx(EXPONENT, abs=1e-10)
    uniform = bernoulli(full_shift, [0.5, 0.5])
    assert measure_dimension(mcmullen_carpet, uniform) == pytest.approx(1.315465, abs=1e-6)
    optimal = bernoulli(full_shift, mcmullen_row_weights(3, 2, [2, 1]))
    assert measure_dimension(mcmullen_carpet, optimal) == pytest.approx(MCMULLEN_D, abs=1e-10)


def test_ly_dimension_of_uniform_rectangles(mcmullen_carpet, full_shift):
    rows = bernoulli(full_shift, [2.0 / 3.0, 1.0 / 3.0])
    value = ly_dimension(mcmullen_carpet, rows, [[0.5, 0.5], [1.0]])
    assert value == pytest.approx(1.338916, abs=1e-6)
    assert value < MCMULLEN_D
    assert fiber_dimension(mcmullen_carpet, rows, [[0.5, 0.5], [1.0]]) == pytest.approx(
        (2.0 / 3.0) * LOG2 / LOG3, abs=1e-12)


def test_ly_dimension_checks_fiber_weights(mcmullen_carpet, full_shift):
    rows = bernoulli(full_shift, [0.5, 0.5])
    with pytest.raises(IncompatibleMeasureError):
        ly_dimension(mcmullen_carpet, rows, [[0.5, 0.6], [1.0]])
    with pytest.raises(IncompatibleMeasureError):
        ly_dimension(mcmullen_carpet, rows, [[1.0]])


def test_restraint_inequality(rng, markov_carpet):
    for _ in range(40):
        nu = random_markov_measure(rng, markov_carpet.base)
        weights = random_fiber_weights(rng, markov_carpet)
        assert ly_dimension(markov_carpet, nu, weights) <= measure_dimension(markov_carpet, nu) + 1e-10


@pytest.mark.slow
def test_restraint_on_random_carpets():
    rng = np.random.default_rng(2024)
    for _ in range(5):
        system = random_carpet(rng)
        for _ in range(100):
            nu = random_markov_measure(rng, system.base, concentration=0.5)
            weights = random_fiber_weights(rng, system)
            t_nu = t_of_nu(system, nu)
            assert fiber_dimension(system, nu, weights) <= t_nu + 1e-9
            assert fiber_dimension(system, nu, system.fiber_weights(t_nu)) == pytest.approx(t_nu, abs=1e-8)


def test_restraint_equality_at_canonical_weights(rng, markov_carpet):
    for _ in range(20):
        nu = random_markov_measure(rng, markov_carpet.base)
        canonical = markov_carpet.fiber_weights(t_of_nu(markov_carpet, nu))
        assert ly_dimension(markov_carpet, nu, canonical) == pytest.approx(
            measure_dimension(markov_carpet, nu), abs=1e-9)


def test_lifted_measure_is_a_markov_measure(markov_carpet):
    nu = equilibrium(markov_carpet.base, [0.0, 0.0]).measure
    weights = markov_carpet.fiber_weights(0.7)
    lifted = markov_carpet.lift_measure(nu, weights)
    total, row_of = markov_carpet.total_space()
    lifted.check_compatible(total)
    assert total.symbol_count == 4
    assert row_of.tolist() == [0, 0, 0, 1]
    assert np.bincount(row_of, weights=lifted.stationary) == pytest.approx(nu.stationary)


def test_scaling_laws(rng, markov_carpet):
    nu = random_markov_measure(rng, markov_carpet.base)
    doubled = markov_carpet.scaled(2.0)
    assert t_of_nu(doubled, nu) == pytest.approx(t_of_nu(markov_carpet, nu) / 2.0, abs=1e-12)
    assert measure_dimension(doubled, nu) == pytest.approx(measure_dimension(markov_carpet, nu) / 2.0, abs=1e-12)


def test_pressure_relation_agrees_at_beta_one(markov_carpet, mcmullen_carpet):
    for system in (markov_carpet, mcmullen_carpet):
        relation = pressure_relation(system, 1.0)
        assert relation['difference'] == pytest.approx(0.0, abs=1e-10)
    assert set(pressure_relation(markov_carpet, 0.5)) == {'beta', 'base_pressure', 'total_pressure', 'difference'}


@pytest.mark.parametrize("rows, psi", [
    ((((0,), [LOG2]),), [LOG2]),                                # single rectangle
    ((((0, 1), [LOG2, LOG2]), ((2,), [LOG2])), [LOG3, LOG3]),   # domination fails
    ((((0, 1), [LOG3, LOG3]), ((2,), [LOG3])), [LOG2, 0.0]),    # psi not positive
    ((((0, 1), [LOG3, LOG3]), ((1,), [LOG3])), [LOG2, LOG2]),   # repeated rectangle
    ((((0, 1), [LOG3, LOG3]),), [LOG2, LOG2]),                  # too few rows
])
def test_invalid_carpets(rows, psi):
    base = ShiftSpace.full_shift(len(psi))
    with pytest.raises(InvalidCarpetError):
        CarpetSystem(base, tuple(CarpetRow(*row) for row in rows), psi)


def test_invalid_mcmullen_patterns():
    for l, m, counts in [(2, 2, [1, 1]), (3, 1, [2]), (3, 2, [4, 1]), (3, 2, [0, 0]), (3, 2, [1, 1, 1]),
                         (3, 2, [1, 0])]:
        with pytest.raises(InvalidCarpetError):
            CarpetSystem.from_mcmullen(l, m, counts)


def test_carpet_row_shape_checks():
    with pytest.raises(InvalidCarpetError):
        CarpetRow((), [])
    with pytest.raises(InvalidCarpetError):
        CarpetRow((0, 1), [LOG3])


def test_full_dimension_mcmullen(mcmullen_report):
    assert mcmullen_report.D == pytest.approx(MCMULLEN_D, abs=1e-6)
    assert mcmullen_report.t_range == pytest.approx((0.0, EXPONENT), abs=1e-12)
    assert mcmullen_report.case in CASES
    row0 = mcmullen_row_weights(3, 2, [2, 1])[0]
    assert mcmullen_report.t_star == pytest.approx(row0 * EXPONENT, abs=1e-4)
    assert mcmullen_report.nu_star.stationary[0] == pytest.approx(row0, abs=1e-4)


def test_full_dimension_measure_attains_value(mcmullen_report):
    system = CarpetSystem.from_mcmullen(3, 2, [2, 1])
    assert measure_dimension(system, mcmullen_report.nu_star) == pytest.approx(mcmullen_report.D, abs=1e-8)
    assert mcmullen_report.diagnostics['dimension_residual'] < 1e-8
    weights = mcmullen_report.fiber_weights
    assert weights[0] == pytest.approx([0.5, 0.5])
    payload = mcmullen_report.to_dict()
    assert payload['fiber_weights'][1] == [1.0]
    branches = [c['branch'] for c in payload['diagnostics']['candidates']]
    assert set(branches) >= {'bowen', 'lower_endpoint', 'upper_endpoint'}
    assert branches.count('bowen') == 1


def test_full_dimension_dominates_bernoulli_measures(mcmullen_report, full_shift, rng):
    system = CarpetSystem.from_mcmullen(3, 2, [2, 1])
    for _ in range(50):
        weights = rng.dirichlet([1.0, 1.0])
        assert measure_dimension(system, bernoulli(full_shift, weights)) <= mcmullen_report.D + 1e-9


def test_full_dimension_dominates_markov_measures(mcmullen_report, full_shift, rng):
    system = CarpetSystem.from_mcmullen(3, 2, [2, 1])
    for _ in range(200):
        nu = random_markov_measure(rng, full_shift, concentration=0.5)
        assert measure_dimension(system, nu) <= mcmullen_report.D + 1e-8
    assert measure_dimension(system, mcmullen_report.nu_star) == pytest.approx(mcmullen_report.D, abs=1e-8)


def test_degenerate_t_range_uses_bowen_measure():
    system = _uniform_rows_carpet()
    report = solve_full_dimension(system)
    t_lower, t_upper = report.t_range
    assert t_lower == pytest.approx(0.5, abs=1e-12)
    assert t_upper == pytest.approx(0.5, abs=1e-12)
    assert report.case == 'lower_endpoint'
    assert report.diagnostics['solution_branch'] == 'bowen'
    assert report.D == pytest.approx(bowen_root(system.base, system.psi) + 0.5, abs=1e-10)


def test_outer_residual_is_enforced(mcmullen_carpet, mocker):
    # inner maximum stuck at 1e-3 for every D: no root of G exists
    mocker.patch.object(_InnerProblem, 'maximize', return_value=((1e-3, 0.3, None), []))
    with pytest.raises(ConvergenceError) as excinfo:
        solve_full_dimension(mcmullen_carpet)
    diagnostics = excinfo.value.diagnostics
    assert diagnostics['outer_residual'] == pytest.approx(1e-3)
    assert diagnostics['tolerance'] == 1e-9
    assert diagnostics['t'] == 0.3


def test_product_carpets():
    line = CarpetSystem(ShiftSpace.full_shift(2), (CarpetRow((0,), [math.log(4.0)]), CarpetRow((1,), [math.log(4.0)])),
                        [LOG2, LOG2])
    assert solve_full_dimension(line).D == pytest.approx(1.0, abs=1e-10)
    square = CarpetSystem(ShiftSpace.full_shift(2), (CarpetRow((0, 1), [LOG2, LOG2]), CarpetRow((2, 3), [LOG2, LOG2])),
                          [LOG2, LOG2])
    assert solve_full_dimension(square).D == pytest.approx(2.0, abs=1e-10)


def test_inner_trace(mcmullen_carpet):
    settings = resolve_settings({'solver': {'t_grid_points': 12}})
    trace = inner_trace(mcmullen_carpet, MCMULLEN_D, settings)
    assert 0 < len(trace) <= 12
    ts = [t for t, _, _ in trace]
    assert ts == sorted(ts)
    assert all(0.0 < t < EXPONENT for t in ts)
    # at the optimal value the inner maximum is zero
    assert max(h for _, _, h in trace) == pytest.approx(0.0, abs=1e-3)


@pytest.mark.slow
def test_full_dimension_golden_carpet(golden_carpet, rng):
    report = solve_full_dimension(golden_carpet)
    assert report.t_range[0] - 1e-12 <= report.t_star <= report.t_range[1] + 1e-12
    assert measure_dimension(golden_carpet, report.nu_star) == pytest.approx(report.D, abs=1e-8)
    for _ in range(200):
        nu = random_markov_measure(rng, golden_carpet.base, concentration=0.5)
        assert measure_dimension(golden_carpet, nu) <= report.D + 1e-9


@pytest.mark.slow
def test_full_dimension_markov_carpet_scaling(markov_carpet):
    report = solve_full_dimension(markov_carpet)
    scaled = solve_full_dimension(markov_carpet.scaled(3.0))
    assert 3.0 * scaled.D == pytest.approx(report.D, abs=1e-7)
    assert solve_full_dimension(markov_carpet, n_workers=2).D == report.D
