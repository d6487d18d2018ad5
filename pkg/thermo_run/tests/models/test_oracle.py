"""Tests for the closed-form, search, enumeration and grid oracles."""

import math

import numpy as np
import pytest
from scipy.special import entr

from thermo_run.core.exceptions import (
    EnumerationGuardError, IncompatibleMeasureError, InfeasibleGridError, InvalidCarpetError
)
from thermo_run.models.carpet import CarpetSystem, ly_dimension
from thermo_run.models.constrained import birkhoff_range, solve_beta
from thermo_run.models.oracle import (
    OracleResult, bernoulli_search, constrained_grid_search, cycle_enumeration, mcmullen_dimension,
    project_simplex
)
from thermo_run.models.shift_space import ShiftSpace, bernoulli
from thermo_run.tests.conftest import LOG2, LOG3

EXPONENT = LOG2 / LOG3
MCMULLEN_D = math.log(2.0 ** EXPONENT + 1.0) / LOG2
OPTIMAL_WEIGHTS = [2.0 ** (EXPONENT - 1.0) / (2.0 ** EXPONENT + 1.0)] * 2 + [1.0 / (2.0 ** EXPONENT + 1.0)]


class TestMcMullenDimension:

    def test_closed_form_values(self):
        assert mcmullen_dimension(3, 2, [2, 1]).value == pytest.approx(MCMULLEN_D, abs=1e-14)
        assert mcmullen_dimension(3, 2, [3, 3]).value == pytest.approx(2.0, abs=1e-14)
        assert mcmullen_dimension(3, 2, [2, 0]).value == pytest.approx(EXPONENT, abs=1e-14)
        assert mcmullen_dimension(3, 2, [1, 0]).value == 0.0

    def test_certificate_weights(self):
        result = mcmullen_dimension(3, 2, [2, 1])
        total = 2.0 ** EXPONENT + 1.0
        assert result.method == 'mcmullen_closed_form'
        assert result.certificate['row_weights'] == pytest.approx([2.0 ** EXPONENT / total, 1.0 / total])
        rectangles = [w for row in result.certificate['rectangle_weights'] for w in row]
        assert rectangles == pytest.approx(OPTIMAL_WEIGHTS, abs=1e-14)
        assert rectangles == pytest.approx([0.3038, 0.3038, 0.3924], abs=1e-4)
        assert sum(rectangles) == pytest.approx(1.0)

    def test_certificate_reproduces_value(self):
        for l, m, counts in [(3, 2, [2, 1]), (4, 3, [3, 1, 2]), (5, 2, [4, 1])]:
            result = mcmullen_dimension(l, m, counts)
            system = CarpetSystem.from_mcmullen(l, m, counts)
            rows = bernoulli(system.base, result.certificate['row_weights'])
            fibres = [np.full(r, 1.0 / r) for r in counts if r > 0]
            assert ly_dimension(system, rows, fibres) == pytest.approx(result.value, abs=1e-12)

    @pytest.mark.parametrize("l, m, counts", [
        (2, 2, [1, 1]), (3, 1, [1]), (3, 2, [4, 0]), (3, 2, [0, 0]), (3, 2, [1, 1, 1]), (3.5, 2, [1, 1]),
    ])
    def test_invalid_patterns(self, l, m, counts):
        with pytest.raises(InvalidCarpetError):
            mcmullen_dimension(l, m, counts)


class TestBernoulliSearch:

    def test_matches_closed_form(self, mcmullen_carpet):
        result = bernoulli_search(mcmullen_carpet, starts=4, seed=1)
        assert result.value == pytest.approx(MCMULLEN_D, abs=1e-6)
        assert result.certificate['weights'] == pytest.approx(OPTIMAL_WEIGHTS, abs=1e-4)
        assert sum(result.certificate['row_weights']) == pytest.approx(1.0)

    def test_full_grid_and_single_rectangle_rows(self):
        assert bernoulli_search(CarpetSystem.from_mcmullen(3, 2, [3, 3]), starts=2).value == pytest.approx(2.0, abs=1e-6)
        assert bernoulli_search(CarpetSystem.from_mcmullen(3, 2, [1, 1]), starts=2).value == pytest.approx(1.0, abs=1e-6)

    def test_certificate_weights_attain_value(self, mcmullen_carpet):
        result = bernoulli_search(mcmullen_carpet, starts=3, seed=5)
        weights = np.array(result.certificate['weights'])
        rows = np.array(result.certificate['row_weights'])
        fibres = [weights[:2] / rows[0], weights[2:] / rows[1]]
        value = ly_dimension(mcmullen_carpet, bernoulli(mcmullen_carpet.base, rows), fibres)
        assert value == pytest.approx(result.value, abs=1e-12)

    def test_seeded_and_worker_independent(self, mcmullen_carpet):
        first = bernoulli_search(mcmullen_carpet, starts=4, seed=3)
        second = bernoulli_search(mcmullen_carpet, starts=4, seed=3, n_workers=2)
        assert first.to_dict() == second.to_dict()
        assert first.certificate['seed'] == 3
        assert 0 <= first.certificate['best_start'] < 4

    def test_requires_full_shift_base(self, golden_carpet):
        with pytest.raises(IncompatibleMeasureError):
            bernoulli_search(golden_carpet, starts=1)


class TestCycleEnumeration:

    def test_golden_mean(self, golden_mean):
        result = cycle_enumeration(golden_mean, [0.0, 1.0], max_len=2)
        assert result.value == pytest.approx(0.5)
        assert result.certificate['lower'] == 0.0
        assert result.certificate['upper_cycle'] == [0, 1]
        assert result.certificate['cycle_count'] == 2

    def test_agrees_with_karp(self, cyclic_shift, rng):
        bounds = birkhoff_range(cyclic_shift, [1.0, 2.0, 3.0])
        result = cycle_enumeration(cyclic_shift, [1.0, 2.0, 3.0], max_len=3)
        assert (result.certificate['lower'], result.value) == pytest.approx((bounds.lower, bounds.upper))
        space = ShiftSpace.full_shift(3)
        for _ in range(10):
            psi = rng.uniform(-1.0, 1.0, 3)
            bounds = birkhoff_range(space, psi)
            result = cycle_enumeration(space, psi, max_len=3)
            assert result.value == pytest.approx(bounds.upper, abs=1e-12)
            assert result.certificate['lower'] == pytest.approx(bounds.lower, abs=1e-12)

    @pytest.mark.parametrize("max_len", [0, 21])
    def test_length_limits(self, golden_mean, max_len):
        with pytest.raises(ValueError):
            cycle_enumeration(golden_mean, [0.0, 1.0], max_len=max_len)


class TestGridSearch:

    def test_full_shift_lower_bound(self, full_shift):
        exact = float(entr(0.75) + entr(0.25))
        result = constrained_grid_search(full_shift, [0.0, 0.0], [0.0, 1.0], 0.75)
        assert result.value <= exact + 1e-12
        assert exact - result.value < 2e-3
        assert result.certificate['resolution'] == 200
        assert len(result.certificate['pair']) == 2
        assert 0.0 <= result.certificate['mixing_weight'] <= 1.0

    def test_full_shift_unconstrained_mean(self, full_shift):
        result = constrained_grid_search(full_shift, [0.0, 0.0], [0.0, 1.0], 0.5, resolution=20)
        assert result.value == pytest.approx(LOG2, abs=1e-12)

    def test_golden_mean_gap(self, golden_mean):
        exact = solve_beta(golden_mean, [0.0, 0.0], [0.0, 1.0], 0.25).pressure_K_alpha
        result = constrained_grid_search(golden_mean, [0.0, 0.0], [0.0, 1.0], 0.25)
        assert result.value <= exact + 1e-12
        assert exact - result.value < 5e-3

    def test_certificate_pair_brackets_alpha(self, golden_mean):
        result = constrained_grid_search(golden_mean, [0.3, -0.1], [0.0, 1.0], 0.2, resolution=50)
        left, right = result.certificate['pair']
        assert left['integral_psi'] <= 0.2 <= right['integral_psi']
        weight = result.certificate['mixing_weight']
        assert weight * left['value'] + (1.0 - weight) * right['value'] == pytest.approx(result.value)

    def test_preconditions(self, full_shift):
        with pytest.raises(ValueError):
            constrained_grid_search(ShiftSpace.full_shift(4), np.zeros(4), np.arange(4.0), 1.5, resolution=4)
        with pytest.raises(ValueError):
            constrained_grid_search(full_shift, [0.0, 0.0], [0.0, 1.0], 0.5, resolution=0)
        with pytest.raises(EnumerationGuardError):
            constrained_grid_search(ShiftSpace.full_shift(3), np.zeros(3), [0.0, 1.0, 2.0], 1.0, resolution=200)

    def test_infeasible_alpha(self, full_shift):
        with pytest.raises(InfeasibleGridError) as excinfo:
            constrained_grid_search(full_shift, [0.0, 0.0], [0.0, 1.0], 1.5, resolution=10)
        assert excinfo.value.payload == {'alpha': 1.5, 'resolution': 10, 'kept': 0}


def test_project_simplex(rng):
    assert project_simplex(np.array([0.5, 0.5])).tolist() == [0.5, 0.5]
    assert project_simplex(np.array([2.0, 0.0])).tolist() == [1.0, 0.0]
    for _ in range(20):
        point = project_simplex(rng.normal(size=4))
        assert point.min() >= 0.0
        assert point.sum() == pytest.approx(1.0)


def test_oracle_result_method_is_checked():
    with pytest.raises(ValueError):
        OracleResult(1.0, 'guess')
    assert OracleResult(1.0, 'grid_search').to_dict() == {'value': 1.0, 'method': 'grid_search', 'certificate': {}}
