"""Skew-product carpet systems and the invariant measure of full dimension.

A carpet system is row driven: the base shift constrains which rows may follow
each other, and inside row ``i`` any rectangle of ``C_i`` may be chosen at every
step. Rectangle ``j`` has fibre log-expansion ``phi(j)`` and row ``i`` has base
log-expansion ``psi(i)``. The pressure of ``-t phi`` along a fibre then depends
on the current row only::

    log A_t(i) = log sum_{j in C_i} exp(-t phi(j))

For a base measure ``nu`` the fibre dimension ``t(nu)`` solves
``int log A_t dnu = 0`` and the relativized equilibrium state above ``nu`` has
dimension ``h_nu / int psi dnu + t(nu)``. :func:`solve_full_dimension` maximizes
this over invariant base measures.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import entr, logsumexp, softmax

from thermo_run.config.default_config import get_setting
from thermo_run.core.exceptions import (
    ConvergenceError, DomainRejection, IncompatibleMeasureError, InvalidCarpetError
)
from thermo_run.core.parallel import run_parallel
from thermo_run.core.utils import find_root
from thermo_run.models.constrained import LevelSetSolution, solve_beta
from thermo_run.models.cycles import critical_components, extreme_mean
from thermo_run.models.shift_space import MarkovMeasure, ShiftSpace, measure_entropy
from thermo_run.models.transfer import bowen_root, equilibrium, pressure, require_mixing

logger = logging.getLogger('dev')

CASES = ('interior', 'lower_endpoint', 'upper_endpoint')


@dataclass(frozen=True, eq=False)
class CarpetRow:
    """Rectangles available in one row and their fibre log-expansions."""

    columns: Tuple[int, ...]
    phi: np.ndarray

    def __post_init__(self):
        columns = tuple(int(c) for c in self.columns)
        phi = np.array(self.phi, dtype=float, copy=True).reshape(-1)
        if not columns:
            raise InvalidCarpetError("Every row needs at least one column")
        if phi.shape != (len(columns),):
            raise InvalidCarpetError(f"Row has {len(columns)} columns but {phi.size} phi values")
        phi.setflags(write=False)
        object.__setattr__(self, 'columns', columns)
        object.__setattr__(self, 'phi', phi)


@dataclass(frozen=True, eq=False)
class CarpetSystem:
    """Row shift, per-row rectangle sets, fibre potential phi and base potential psi."""

    base: ShiftSpace
    rows: Tuple[CarpetRow, ...]
    psi: np.ndarray

    def __post_init__(self):
        rows = tuple(r if isinstance(r, CarpetRow) else CarpetRow(*r) for r in self.rows)
        psi = np.array(self.psi, dtype=float, copy=True).reshape(-1)
        n = self.base.symbol_count
        if len(rows) != n:
            raise InvalidCarpetError(f"Base has {n} symbols but {len(rows)} rows were given")
        if psi.shape != (n,):
            raise InvalidCarpetError(f"Expected {n} psi values, got {psi.size}")
        ids = [c for row in rows for c in row.columns]
        if len(set(ids)) != len(ids):
            raise InvalidCarpetError("Rectangle ids must be unique across rows")
        phi_all = np.concatenate([row.phi for row in rows])
        if not (np.all(np.isfinite(phi_all)) and np.all(np.isfinite(psi))):
            raise InvalidCarpetError("phi and psi must be finite")
        if np.any(phi_all <= 0) or np.any(psi <= 0):
            raise InvalidCarpetError("phi and psi must be strictly positive")
        if phi_all.min() < psi.max():
            raise InvalidCarpetError(
                f"Domination fails: min phi {phi_all.min():.12g} < max psi {psi.max():.12g}"
            )
        if phi_all.min() == psi.max():
            logger.warning("Domination min phi >= max psi holds only with equality")
        if n < 2 and len(rows[0].columns) < 2:
            raise InvalidCarpetError("Degenerate carpet: a single row with a single column")

        width = max(len(row.columns) for row in rows)
        table = np.zeros((n, width))
        mask = np.zeros((n, width), dtype=bool)
        for i, row in enumerate(rows):
            table[i, :len(row.columns)] = row.phi
            mask[i, :len(row.columns)] = True
        psi.setflags(write=False)
        object.__setattr__(self, 'rows', rows)
        object.__setattr__(self, 'psi', psi)
        object.__setattr__(self, '_phi_table', table)
        object.__setattr__(self, '_phi_mask', mask)

    @property
    def row_count(self) -> int:
        return self.base.symbol_count

    @property
    def column_counts(self) -> np.ndarray:
        return np.array([len(row.columns) for row in self.rows])

    def log_A(self, t: float) -> np.ndarray:
        return logsumexp(np.where(self._phi_mask, -t * self._phi_table, -np.inf), axis=1)

    def fiber_weights(self, t: float) -> List[np.ndarray]:
        """Per-row weights proportional to ``exp(-t phi(j))``."""
        return [softmax(-t * row.phi) for row in self.rows]

    def scaled(self, factor: float) -> 'CarpetSystem':
        rows = tuple(CarpetRow(row.columns, factor * row.phi) for row in self.rows)
        return CarpetSystem(self.base, rows, factor * self.psi)

    def total_space(self) -> Tuple[ShiftSpace, np.ndarray]:
        """Shift on rectangles (in row order) and the row of each rectangle."""
        row_of = np.concatenate([np.full(len(row.columns), i) for i, row in enumerate(self.rows)])
        return ShiftSpace(self.base.transitions[np.ix_(row_of, row_of)]), row_of

    def lift_measure(self, nu: MarkovMeasure, fiber_weights: Sequence[Sequence[float]]) -> MarkovMeasure:
        """Product measure on the total space: rows Markov via ``nu``, columns independent."""
        weights = _check_fiber_weights(self, fiber_weights)
        _, row_of = self.total_space()
        column_weight = np.concatenate(weights)
        q = nu.stochastic[np.ix_(row_of, row_of)] * column_weight[None, :]
        p = nu.stationary[row_of] * column_weight
        return MarkovMeasure(q, p)

    def to_dict(self) -> dict:
        return {
            'base': self.base.to_dict(),
            'rows': [
                {'row': i, 'columns': list(row.columns), 'phi': row.phi.tolist()}
                for i, row in enumerate(self.rows)
            ],
            'psi': self.psi.tolist(),
        }

    @classmethod
    def from_mcmullen(cls, l: int, m: int, row_counts: Sequence[int]) -> 'CarpetSystem':
        """General Sierpinski carpet: ``l`` columns, ``m`` rows, ``r_i`` rectangles kept in row i.

        Rows without rectangles are dropped; the base is the full shift on the rest.
        """
        if int(l) != l or int(m) != m or not l > m > 1:
            raise InvalidCarpetError(f"Need integers l > m > 1, got l={l}, m={m}")
        counts = [int(r) for r in row_counts]
        if len(counts) > m or any(r < 0 or r > l for r in counts) or not any(counts):
            raise InvalidCarpetError(f"Row counts {counts} do not describe a pattern in a {l}x{m} grid")
        rows, next_id = [], 0
        for r in counts:
            if r:
                rows.append(CarpetRow(tuple(range(next_id, next_id + r)), np.full(r, math.log(l))))
                next_id += r
        return cls(ShiftSpace.full_shift(len(rows)), tuple(rows), np.full(len(rows), math.log(m)))


def _check_fiber_weights(system: CarpetSystem, fiber_weights) -> List[np.ndarray]:
    if len(fiber_weights) != system.row_count:
        raise IncompatibleMeasureError(
            f"Expected fibre weights for {system.row_count} rows, got {len(fiber_weights)}"
        )
    tol = get_setting(None, 'tolerances', 'structural')
    weights = []
    for i, (row, w) in enumerate(zip(system.rows, fiber_weights)):
        w = np.asarray(w, dtype=float)
        if w.shape != (len(row.columns),) or np.any(w < -tol) or abs(w.sum() - 1.0) > tol:
            raise IncompatibleMeasureError(f"Fibre weights of row {i} are not a probability vector on its columns")
        weights.append(np.clip(w, 0.0, None))
    return weights


@dataclass(frozen=True)
class FiberPressure:
    t: float
    log_A: np.ndarray

    def to_dict(self) -> dict:
        return {'t': self.t, 'log_A': self.log_A.tolist()}


def fiber_pressure(system: CarpetSystem, t: float) -> FiberPressure:
    if t < 0:
        raise ValueError(f"Fibre pressure is defined for t >= 0, got {t}")
    return FiberPressure(float(t), system.log_A(t))


def t_of_nu(system: CarpetSystem, nu: MarkovMeasure, settings=None) -> float:
    """Unique root of ``t -> sum_i p(i) log A_t(i)``."""
    nu.check_compatible(system.base)
    p = nu.stationary

    def average(t):
        return float(p @ system.log_A(t))

    if average(0.0) <= 0.0:
        return 0.0
    t = find_root(average, 0.0, 1.0, increasing=False, xtol=1e-15,
                  max_doublings=get_setting(settings, 'solver', 'max_bracket_doublings'))
    residual = abs(average(t))
    if residual > get_setting(settings, 'tolerances', 't_root'):
        logger.warning(f"t(nu) residual {residual:.3e} above tolerance")
    return float(t)


def _cycle_root(system: CarpetSystem, maximize: bool, settings) -> float:
    def extreme(t):
        return extreme_mean(system.base, system.log_A(t), maximize)

    if extreme(0.0) <= 0.0:
        return 0.0
    return float(find_root(extreme, 0.0, 1.0, increasing=False, xtol=1e-15,
                           max_doublings=get_setting(settings, 'solver', 'max_bracket_doublings')))


def t_extremes(system: CarpetSystem, settings=None) -> Tuple[float, float]:
    """Infimum and supremum of ``t(nu)`` over invariant base measures.

    Each is the root of an extreme cycle mean of ``log A_t``; both functions are
    strictly decreasing in ``t``.
    """
    t_lower = _cycle_root(system, False, settings)
    t_upper = _cycle_root(system, True, settings)
    if t_upper > 1.0:
        logger.warning(f"t_upper = {t_upper:.12g} exceeds 1; phi does not dominate psi in the dimension sense")
    logger.debug(f"t range [{t_lower:.15g}, {t_upper:.15g}]")
    return t_lower, t_upper


def measure_dimension(system: CarpetSystem, nu: MarkovMeasure, settings=None) -> float:
    """Dimension ``h_nu / int psi dnu + t(nu)`` of the relativized equilibrium state above ``nu``."""
    entropy = measure_entropy(system.base, nu)
    return entropy / float(nu.stationary @ system.psi) + t_of_nu(system, nu, settings)


def fiber_dimension(system: CarpetSystem, mu_row: MarkovMeasure, fiber_weights) -> float:
    """``(h_mu - h_nu) / int phi dmu`` for a product measure."""
    mu_row.check_compatible(system.base)
    weights = _check_fiber_weights(system, fiber_weights)
    p = mu_row.stationary
    fibre_entropy = sum(p[i] * entr(w).sum() for i, w in enumerate(weights))
    integral_phi = sum(p[i] * float(w @ row.phi) for i, (w, row) in enumerate(zip(weights, system.rows)))
    return float(fibre_entropy / integral_phi)


def ly_dimension(system: CarpetSystem, mu_row: MarkovMeasure, fiber_weights) -> float:
    """Ledrappier-Young dimension of a product measure (rows Markov, columns independent)."""
    entropy = measure_entropy(system.base, mu_row)
    base_part = entropy / float(mu_row.stationary @ system.psi)
    return float(base_part + fiber_dimension(system, mu_row, fiber_weights))


def pressure_relation(system: CarpetSystem, beta: float, settings=None) -> Dict[str, float]:
    """Tabulate ``P(beta log A_phi + psi)`` on the base against ``P(phi + psi o pi)`` on the total space.

    The two agree at ``beta = 1``; nothing is asserted for other values.
    """
    base_value = pressure(system.base, beta * system.log_A(-1.0) + system.psi, settings)
    total, row_of = system.total_space()
    phi_total = np.concatenate([row.phi for row in system.rows])
    total_value = pressure(total, phi_total + system.psi[row_of], settings)
    return {
        'beta': float(beta),
        'base_pressure': base_value,
        'total_pressure': total_value,
        'difference': base_value - total_value,
    }


@dataclass
class _Candidate:
    case: str
    D: float
    t: float
    beta: Optional[float]
    nu: MarkovMeasure
    residuals: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class FullDimensionReport:
    D: float
    t_star: float
    beta_star: Optional[float]
    nu_star: MarkovMeasure
    fiber_weights: List[np.ndarray]
    case: str
    t_range: Tuple[float, float]
    diagnostics: Dict[str, object] = field(default_factory=dict)
    trace: List[Tuple[float, float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'D': self.D,
            't_star': self.t_star,
            'beta_star': self.beta_star,
            'nu_star': self.nu_star.to_dict(),
            'fiber_weights': [w.tolist() for w in self.fiber_weights],
            'case': self.case,
            't_range': list(self.t_range),
            'diagnostics': self.diagnostics,
        }


def _embed(base: ShiftSpace, symbols: Sequence[int], measure: MarkovMeasure) -> MarkovMeasure:
    q = np.array(base.transitions / base.transitions.sum(axis=1, keepdims=True), dtype=float)
    p = np.zeros(base.symbol_count)
    index = np.array(symbols)
    q[index] = 0.0
    q[np.ix_(index, index)] = measure.stochastic
    p[index] = measure.stationary
    return MarkovMeasure(q, p)


def _critical_candidate(system: CarpetSystem, t: float, maximize: bool, settings) -> _Candidate:
    """Best measure with ``t(nu) = t`` at an end of the t-range.

    Such measures live on the tight edges of the extreme-mean components of
    ``log A_t``; on each component the Bowen root maximizes ``h / int psi``.
    """
    best = None
    for component in critical_components(system.base, system.log_A(t), maximize, settings):
        space = component.shift_space()
        psi = system.psi[list(component.symbols)]
        s = bowen_root(space, psi, settings, allow_periodic=True)
        if best is None or s > best[0]:
            best = (s, component, space, psi)
    s, component, space, psi = best
    report = equilibrium(space, -s * psi, settings, allow_periodic=True)
    nu = _embed(system.base, component.symbols, report.measure)
    integral_psi = float(report.measure.stationary @ psi)
    return _Candidate(
        case='upper_endpoint' if maximize else 'lower_endpoint',
        D=s + t,
        t=t,
        beta=None,
        nu=nu,
        residuals={
            'certificate_residual': abs(report.entropy - s * integral_psi),
            'component': list(component.symbols),
            'component_bowen_root': s,
        },
    )


class _InnerProblem:
    """``h_D(t) = max {h_nu + (t - D) int psi : int log A_t dnu = 0}`` on a fixed t-grid."""

    def __init__(self, system, t_range, settings, n_workers):
        self.system = system
        self.t_range = t_range
        self.settings = settings
        self.n_workers = n_workers
        points = get_setting(settings, 'solver', 't_grid_points')
        t_lower, t_upper = t_range
        self.grid = t_lower + (t_upper - t_lower) * np.arange(1, points + 1) / (points + 1)

    def solve(self, D, t, hint=None) -> Optional[LevelSetSolution]:
        try:
            return solve_beta(self.system.base, (t - D) * self.system.psi, self.system.log_A(t), 0.0,
                              self.settings, beta_hint=hint)
        except (DomainRejection, ConvergenceError) as exc:
            logger.debug(f"t={t:.12g} infeasible for the inner problem: {exc}")
            return None

    def scan(self, D) -> List[Optional[LevelSetSolution]]:
        # warm starts chain within fixed blocks, so results do not depend on the worker count
        block = get_setting(self.settings, 'solver', 'warm_start_block')
        chunks = [self.grid[i:i + block] for i in range(0, len(self.grid), block)]

        def run_chunk(chunk):
            hint, solved = None, []
            for t in chunk:
                solution = self.solve(D, float(t), hint)
                if solution is not None:
                    hint = solution.beta
                solved.append(solution)
            return solved

        results = run_parallel(run_chunk, chunks, n_workers=self.n_workers,
                               backend=get_setting(self.settings, 'parallel', 'backend'))
        solutions = [s for chunk in results for s in chunk]
        skipped = sum(s is None for s in solutions)
        if skipped:
            logger.warning(f"Skipped {skipped} infeasible t-grid points at D={D:.12g}")
        return solutions

    def maximize(self, D):
        """Grid scan plus golden-section refinement; returns ``(h, t, solution, scan)``."""
        solutions = self.scan(D)
        values = np.array([s.pressure_K_alpha if s is not None else -np.inf for s in solutions])
        k = int(np.argmax(values))
        if not np.isfinite(values[k]):
            return None, solutions
        best = (float(values[k]), float(self.grid[k]), solutions[k])
        hint = solutions[k].beta
        evaluated = {}

        def objective(t):
            solution = self.solve(D, float(t), hint)
            evaluated[float(t)] = solution
            return -solution.pressure_K_alpha if solution is not None else np.inf

        tol = get_setting(self.settings, 'tolerances', 'golden')
        last = len(self.grid) - 1
        try:
            if 0 < k < last and np.isfinite(values[k - 1]) and np.isfinite(values[k + 1]):
                result = minimize_scalar(objective, bracket=(self.grid[k - 1], self.grid[k], self.grid[k + 1]),
                                         method='golden', tol=tol)
            else:
                lo = self.grid[k - 1] if k > 0 else self.t_range[0]
                hi = self.grid[k + 1] if k < last else self.t_range[1]
                result = minimize_scalar(objective, bounds=(lo, hi), method='bounded', options={'xatol': tol})
        except (ValueError, RuntimeError) as exc:
            logger.debug(f"Golden refinement skipped: {exc}")
            return best, solutions
        t_refined = float(result.x)
        solution = evaluated.get(t_refined) or self.solve(D, t_refined, hint)
        if solution is not None and solution.pressure_K_alpha > best[0]:
            best = (float(solution.pressure_K_alpha), t_refined, solution)
        return best, solutions


def _interior_candidate(system, t_range, s, floor, settings, n_workers):
    inner = _InnerProblem(system, t_range, settings, n_workers)
    best, _ = inner.maximize(floor)
    if best is None or best[0] <= 0.0:
        logger.info(f"Interior values do not exceed the endpoint candidates (D >= {floor:.12g})")
        return None

    ceiling = s + t_range[1]
    seen = {floor: best[0]}

    def interior_value(D):
        if D not in seen:
            found, _ = inner.maximize(D)
            if found is None:
                raise ConvergenceError(f"No feasible t on the inner grid at D={D:.12g}")
            seen[D] = found[0]
        return seen[D]

    if interior_value(ceiling) >= 0.0:
        logger.warning("Interior value is nonnegative at the upper bound s + t_upper")
        D = ceiling
    else:
        D = brentq(interior_value, floor, ceiling, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)

    best, solutions = inner.maximize(D)
    h, t_star, solution = best
    outer_tol = get_setting(settings, 'tolerances', 'outer')
    if not abs(h) < outer_tol:
        raise ConvergenceError(
            f"Outer root residual |G(D)| = {abs(h):.3e} exceeds {outer_tol:g} at D={D:.15g}",
            diagnostics={'D': float(D), 't': t_star, 'outer_residual': abs(h), 'tolerance': outer_tol},
        )
    trace = [(float(t), s_.beta, s_.pressure_K_alpha) for t, s_ in zip(inner.grid, solutions) if s_ is not None]
    candidate = _Candidate(
        case='interior',
        D=float(D),
        t=t_star,
        beta=solution.beta,
        nu=solution.maximizer.measure,
        residuals={
            'outer_residual': abs(h),
            'constraint_residual': solution.diagnostics['constraint_residual'],
            'variational_residual': solution.diagnostics['variational_residual'],
        },
    )
    return candidate, trace


def inner_trace(system: CarpetSystem, D: float, settings=None, n_workers=1) -> List[Tuple[float, float, float]]:
    """``(t, beta(t), h_D(t))`` over the feasible points of the inner t-grid."""
    inner = _InnerProblem(system, t_extremes(system, settings), settings, n_workers)
    return [(float(t), s.beta, s.pressure_K_alpha) for t, s in zip(inner.grid, inner.scan(D)) if s is not None]


def solve_full_dimension(system: CarpetSystem, settings=None, n_workers=1) -> FullDimensionReport:
    """Value D and maximizing measure of ``sup_nu h_nu / int psi dnu + t(nu)``.

    Candidates are compared and the largest is reported:

    - the Bowen measure ``nu_s`` (equilibrium of ``-s psi``, ``s`` the Bowen root)
      with dimension ``s + t(nu_s)``;
    - for each end of ``[t_lower, t_upper]`` the best measure on the extreme-mean
      components of ``log A_t``;
    - the interior solution: the root in D of ``G(D) = max_t h_D(t)``, where the
      inner value is a constrained pressure solved for ``beta(t)``.

    When ``t_upper - t_lower`` is below the degenerate tolerance, ``t(nu)`` is
    constant and the Bowen measure is optimal.

    Args:
        system (CarpetSystem): Valid carpet system on a mixing base.
        settings (dict, optional): Resolved settings.
        n_workers (int, optional): Workers for the inner t-grid.

    Returns:
        FullDimensionReport
    """
    base = system.base
    require_mixing(base)
    t_lower, t_upper = t_extremes(system, settings)
    s = bowen_root(base, system.psi, settings)
    nu_s = equilibrium(base, -s * system.psi, settings).measure
    t_s = t_of_nu(system, nu_s, settings)
    candidates = [_Candidate('bowen', s + t_s, t_s, 0.0, nu_s)]

    trace = []
    degenerate = t_upper - t_lower < get_setting(settings, 'tolerances', 'degenerate')
    if not degenerate:
        candidates.append(_critical_candidate(system, t_upper, True, settings))
        candidates.append(_critical_candidate(system, t_lower, False, settings))
        interior = _interior_candidate(system, (t_lower, t_upper), s, max(c.D for c in candidates),
                                       settings, n_workers)
        if interior is not None:
            candidates.insert(0, interior[0])
            trace = interior[1]

    winner = candidates[0]
    for candidate in candidates[1:]:
        if candidate.D > winner.D:
            winner = candidate

    endpoint_tol = get_setting(settings, 'tolerances', 'endpoint')
    if degenerate or abs(winner.t - t_lower) <= endpoint_tol:
        case = 'lower_endpoint'
    elif abs(winner.t - t_upper) <= endpoint_tol:
        case = 'upper_endpoint'
    else:
        case = 'interior'

    t_nu = t_of_nu(system, winner.nu, settings)
    dimension = measure_dimension(system, winner.nu, settings)
    diagnostics = dict(winner.residuals)
    diagnostics.update({
        'bowen_root': s,
        'solution_branch': winner.case,
        't_nu_residual': abs(t_nu - winner.t),
        'dimension_residual': abs(dimension - winner.D),
        'candidates': [{'branch': c.case, 'D': c.D, 't': c.t} for c in candidates],
    })
    report = FullDimensionReport(
        D=float(winner.D),
        t_star=float(winner.t),
        beta_star=winner.beta,
        nu_star=winner.nu,
        fiber_weights=system.fiber_weights(winner.t),
        case=case,
        t_range=(t_lower, t_upper),
        diagnostics=diagnostics,
        trace=trace,
    )
    logger.info(f"Full dimension D={report.D:.15g} at t*={report.t_star:.12g} ({case})")
    return report


__all__ = [
    'CarpetRow', 'CarpetSystem', 'FiberPressure', 'FullDimensionReport', 'fiber_pressure', 't_of_nu',
    't_extremes', 'measure_dimension', 'fiber_dimension', 'ly_dimension', 'pressure_relation',
    'inner_trace', 'solve_full_dimension',
]
