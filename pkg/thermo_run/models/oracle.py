"""Independent ground truth for the pressure and dimension solvers.

Every oracle returns an :class:`OracleResult` whose certificate carries enough
data to recompute ``value``: closed-form weights, the optimal start of a direct
search, the extreme cycles, or the pair of grid measures whose mixture attains
the grid value.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import comb, entr

from thermo_run.config.default_config import get_setting
from thermo_run.core.exceptions import (
    EnumerationGuardError, IncompatibleMeasureError, InfeasibleGridError, InvalidCarpetError
)
from thermo_run.core.parallel import run_parallel
from thermo_run.models.carpet import CarpetSystem
from thermo_run.models.cycles import enumerate_cycles
from thermo_run.models.shift_space import ShiftSpace, potential_vector

logger = logging.getLogger('dev')

METHODS = ('mcmullen_closed_form', 'bernoulli_search', 'cycle_enumeration', 'grid_search')
GRID_MAX_SYMBOLS = 3


@dataclass(frozen=True)
class OracleResult:
    value: float
    method: str
    certificate: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"Unknown oracle method '{self.method}'")

    def to_dict(self) -> dict:
        return {'value': self.value, 'method': self.method, 'certificate': self.certificate}


def mcmullen_dimension(l: int, m: int, row_counts: Sequence[int]) -> OracleResult:
    """Closed-form dimension ``log_m sum_i r_i^(log m / log l)`` of a general Sierpinski carpet.

    The optimal Bernoulli measure gives each rectangle of row ``i`` the weight
    ``r_i^(a-1) / sum_k r_k^a`` with ``a = log m / log l``.
    """
    counts = list(row_counts)
    if any(int(v) != v for v in [l, m] + counts):
        raise InvalidCarpetError(f"l, m and row counts must be integers, got {l}, {m}, {counts}")
    if not l > m > 1:
        raise InvalidCarpetError(f"Need l > m > 1, got l={l}, m={m}")
    if len(counts) > m or any(r < 0 or r > l for r in counts) or sum(counts) < 1:
        raise InvalidCarpetError(f"Row counts {counts} do not describe a pattern in a {l}x{m} grid")
    exponent = math.log(m) / math.log(l)
    total = sum(r ** exponent for r in counts if r > 0)
    value = math.log(total) / math.log(m)
    certificate = {
        'l': int(l),
        'm': int(m),
        'row_counts': [int(r) for r in counts],
        'exponent': exponent,
        'row_weights': [r ** exponent / total for r in counts if r > 0],
        'rectangle_weights': [[r ** (exponent - 1) / total] * int(r) for r in counts if r > 0],
    }
    logger.debug(f"McMullen dimension of {l}x{m} pattern {counts}: {value:.15g}")
    return OracleResult(value, 'mcmullen_closed_form', certificate)


def project_simplex(vector: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    ordered = np.sort(vector)[::-1]
    cumulative = np.cumsum(ordered) - 1.0
    ranks = np.arange(1, vector.size + 1)
    rho = ranks[ordered - cumulative / ranks > 0][-1]
    return np.maximum(vector - cumulative[rho - 1] / rho, 0.0)


def _bernoulli_objective(system: CarpetSystem):
    row_of = np.concatenate([np.full(len(row.columns), i) for i, row in enumerate(system.rows)])
    phi = np.concatenate([row.phi for row in system.rows])
    psi = system.psi
    rows = system.row_count

    def objective(weights):
        row_weights = np.bincount(row_of, weights=weights, minlength=rows)
        row_entropy = entr(row_weights).sum()
        return float(row_entropy / (row_weights @ psi) + (entr(weights).sum() - row_entropy) / (weights @ phi))

    return objective, row_of


def _pattern_search(objective, start, step, shrink, min_step, max_evaluations):
    x = project_simplex(start)
    best = objective(x)
    evaluations = 1
    size = x.size
    while step >= min_step and evaluations < max_evaluations:
        improved = False
        for i in range(size):
            for sign in (1.0, -1.0):
                trial = x.copy()
                trial[i] += sign * step
                trial = project_simplex(trial)
                value = objective(trial)
                evaluations += 1
                if value > best:
                    x, best, improved = trial, value, True
        if not improved:
            step *= shrink
    return best, x, evaluations


def bernoulli_search(system: CarpetSystem, settings=None, seed: Optional[int] = None,
                     starts: Optional[int] = None, n_workers=1) -> OracleResult:
    """Maximize the Ledrappier-Young dimension over Bernoulli measures on the rectangles.

    Multi-start projected pattern search: coordinate moves ``+-step e_i`` are
    projected back onto the simplex; the step shrinks when no move improves.
    Starts are Dirichlet draws from ``numpy.random.default_rng(seed)``; the best
    start wins, ties going to the lowest index.
    """
    if not system.base.is_full_shift():
        raise IncompatibleMeasureError("bernoulli_search requires a full-shift base")
    seed = get_setting(settings, 'oracle', 'seed') if seed is None else seed
    starts = get_setting(settings, 'oracle', 'starts') if starts is None else starts
    objective, row_of = _bernoulli_objective(system)
    size = row_of.size
    initial = np.random.default_rng(seed).dirichlet(np.ones(size), size=starts)

    options = dict(
        step=get_setting(settings, 'oracle', 'initial_step'),
        shrink=get_setting(settings, 'oracle', 'shrink'),
        min_step=get_setting(settings, 'oracle', 'min_step'),
        max_evaluations=get_setting(settings, 'oracle', 'max_iterations'),
    )
    results = run_parallel(lambda start: _pattern_search(objective, start, **options), list(initial),
                           n_workers=n_workers, backend=get_setting(settings, 'parallel', 'backend'))

    best_index = 0
    for index, (value, _, _) in enumerate(results):
        if value > results[best_index][0]:
            best_index = index
    value, weights, evaluations = results[best_index]
    row_weights = np.bincount(row_of, weights=weights, minlength=system.row_count)
    certificate = {
        'seed': int(seed),
        'starts': int(starts),
        'best_start': best_index,
        'evaluations': int(evaluations),
        'weights': weights.tolist(),
        'row_weights': row_weights.tolist(),
    }
    logger.info(f"Bernoulli search best value {value:.15g} from start {best_index}/{starts}")
    return OracleResult(value, 'bernoulli_search', certificate)


def cycle_enumeration(space: ShiftSpace, psi, max_len: Optional[int] = None, settings=None) -> OracleResult:
    """Extreme mean of ``psi`` over all simple cycles up to ``max_len``.

    ``value`` is the largest cycle mean; the smallest is in the certificate.
    """
    limit = get_setting(settings, 'oracle', 'max_cycle_length')
    max_len = limit if max_len is None else max_len
    if not 1 <= max_len <= limit:
        raise ValueError(f"max_len must lie in [1, {limit}], got {max_len}")
    values = potential_vector(space, psi)
    cycles = enumerate_cycles(space, max_len, get_setting(settings, 'solver', 'enumeration_guard'))
    means = [cycle.mean(values) for cycle in cycles]
    low, high = int(np.argmin(means)), int(np.argmax(means))
    certificate = {
        'lower': means[low],
        'upper': means[high],
        'lower_cycle': list(cycles[low].symbols),
        'upper_cycle': list(cycles[high].symbols),
        'cycle_count': len(cycles),
        'max_len': max_len,
    }
    return OracleResult(means[high], 'cycle_enumeration', certificate)


def _row_grids(space: ShiftSpace, resolution: int) -> List[np.ndarray]:
    grids = []
    n = space.symbol_count
    for a in range(n):
        allowed = np.flatnonzero(space.transitions[a])
        k = allowed.size
        compositions = [c for c in itertools.product(range(resolution + 1), repeat=k - 1) if sum(c) <= resolution]
        rows = np.zeros((len(compositions), n))
        for index, c in enumerate(compositions):
            rows[index, allowed] = np.array(list(c) + [resolution - sum(c)]) / resolution
        grids.append(rows)
    return grids


def _upper_hull(points):
    hull = []
    for point in points:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2][:2], hull[-1][:2]
            if (x2 - x1) * (point[1] - y1) - (y2 - y1) * (point[0] - x1) >= 0:
                hull.pop()
            else:
                break
        hull.append(point)
    return hull


def constrained_grid_search(space: ShiftSpace, phi, psi, alpha: float, resolution: Optional[int] = None,
                            settings=None) -> OracleResult:
    """Certified lower bound for the constrained pressure from a grid of Markov measures.

    Stochastic matrices are taken from a grid of row compositions; points whose
    ``int psi`` lies within one grid step (times the spread of psi) of ``alpha``
    are kept. The value is the upper concave envelope of ``h + int phi`` at
    ``alpha`` over the kept points: a convex combination of two invariant
    measures is invariant and entropy is affine, so the envelope is attained.

    Raises:
        EnumerationGuardError: If the grid exceeds the point guard.
        InfeasibleGridError: If no kept point lies on one side of alpha.
    """
    resolution = get_setting(settings, 'oracle', 'grid_resolution') if resolution is None else resolution
    if space.symbol_count > GRID_MAX_SYMBOLS:
        raise ValueError(f"constrained_grid_search supports at most {GRID_MAX_SYMBOLS} symbols")
    if not 1 <= resolution <= 200:
        raise ValueError(f"Resolution must lie in [1, 200], got {resolution}")
    phi_values = potential_vector(space, phi)
    psi_values = potential_vector(space, psi)

    sizes = [int(comb(resolution + k - 1, k - 1, exact=True)) for k in space.transitions.sum(axis=1)]
    total = int(np.prod(sizes, dtype=object))
    guard = get_setting(settings, 'solver', 'grid_point_guard')
    if total > guard:
        raise EnumerationGuardError(f"{total} grid points exceed the guard {guard}; lower the resolution")

    grids = _row_grids(space, resolution)
    n = space.symbol_count
    index = np.stack(np.meshgrid(*[np.arange(size) for size in sizes], indexing='ij'), axis=-1).reshape(-1, n)
    stochastic = np.stack([grids[a][index[:, a]] for a in range(n)], axis=1)

    system = np.swapaxes(stochastic, 1, 2) - np.eye(n)
    system[:, -1, :] = 1.0
    regular = np.abs(np.linalg.det(system)) > 1e-12
    stochastic, system = stochastic[regular], system[regular]
    rhs = np.zeros((system.shape[0], n, 1))
    rhs[:, -1, 0] = 1.0
    stationary = np.clip(np.linalg.solve(system, rhs)[..., 0], 0.0, None)
    stationary /= stationary.sum(axis=1, keepdims=True)

    constraint = stationary @ psi_values
    value = np.einsum('ka,kab->k', stationary, entr(stochastic)) + stationary @ phi_values
    slack = (psi_values.max() - psi_values.min()) / resolution
    kept = np.flatnonzero(np.abs(constraint - alpha) < slack)
    below = kept[constraint[kept] <= alpha]
    above = kept[constraint[kept] >= alpha]
    if below.size == 0 or above.size == 0:
        raise InfeasibleGridError(
            f"No grid measures on both sides of alpha={alpha!r} at resolution {resolution}",
            payload={'alpha': alpha, 'resolution': resolution, 'kept': int(kept.size)},
        )

    points = sorted(((constraint[k], value[k], k) for k in kept), key=lambda p: (p[0], -p[1]))
    hull = _upper_hull(points)
    left = max((p for p in hull if p[0] <= alpha), key=lambda p: p[0])
    right = min((p for p in hull if p[0] >= alpha), key=lambda p: p[0])
    if right[0] == left[0]:
        weight = 1.0
    else:
        weight = (right[0] - alpha) / (right[0] - left[0])
    estimate = weight * left[1] + (1.0 - weight) * right[1]

    def describe(point):
        k = point[2]
        return {
            'stochastic': stochastic[k].tolist(),
            'stationary': stationary[k].tolist(),
            'integral_psi': float(constraint[k]),
            'value': float(value[k]),
        }

    certificate = {
        'resolution': resolution,
        'slack': float(slack),
        'grid_points': int(stochastic.shape[0]),
        'points_kept': int(kept.size),
        'pair': [describe(left), describe(right)],
        'mixing_weight': float(weight),
    }
    logger.debug(f"Grid search at alpha={alpha}: {estimate:.12g} from {kept.size} kept points")
    return OracleResult(float(estimate), 'grid_search', certificate)


__all__ = [
    'OracleResult', 'METHODS', 'GRID_MAX_SYMBOLS', 'mcmullen_dimension', 'project_simplex', 'bernoulli_search',
    'cycle_enumeration', 'constrained_grid_search',
]
