"""Constrained equilibrium states on Birkhoff level sets.

For a depth-1 constraint potential ``psi`` and a value ``alpha`` inside the open
range ``I_psi`` of ``int psi dmu``, the supremum of ``h_mu + int phi dmu`` over
invariant measures with ``int psi dmu = alpha`` equals
``P(phi + beta psi) - beta alpha`` for the unique ``beta`` with
``int psi dmu_beta = alpha``. ``beta -> int psi dmu_beta`` is strictly increasing,
which makes ``beta`` the root of a monotone function.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from thermo_run.config.default_config import get_setting
from thermo_run.core.exceptions import (
    AlphaOutsideRangeError, ConvergenceError, DegenerateRangeError, ThermoRunError
)
from thermo_run.core.parallel import run_parallel
from thermo_run.core.utils import expand_bracket
from thermo_run.models.cycles import mean_cycle
from thermo_run.models.shift_space import MarkovMeasure, ShiftSpace, Word, potential_vector
from thermo_run.models.transfer import EquilibriumReport, equilibrium, require_mixing

logger = logging.getLogger('dev')


@dataclass(frozen=True)
class BirkhoffRange:
    lower: float
    upper: float
    lower_cycle: Word
    upper_cycle: Word

    @property
    def is_degenerate(self) -> bool:
        return self.upper - self.lower <= get_setting(None, 'tolerances', 'structural') * max(
            1.0, abs(self.lower), abs(self.upper))

    def contains(self, alpha: float, margin: float = 0.0) -> bool:
        return self.lower + margin < alpha < self.upper - margin

    def to_dict(self) -> dict:
        return {
            'lower': self.lower,
            'upper': self.upper,
            'lower_cycle': list(self.lower_cycle.symbols),
            'upper_cycle': list(self.upper_cycle.symbols),
        }


def birkhoff_range(space: ShiftSpace, psi, settings=None) -> BirkhoffRange:
    """Range of ``int psi dmu`` over invariant measures, with extreme periodic orbits."""
    require_mixing(space)
    low = mean_cycle(space, psi, maximize=False, settings=settings)
    high = mean_cycle(space, psi, maximize=True, settings=settings)
    logger.debug(f"Birkhoff range [{low.value:.15g}, {high.value:.15g}] "
                 f"with witnesses {low.cycle.as_string()} / {high.cycle.as_string()}")
    return BirkhoffRange(low.value, high.value, low.cycle, high.cycle)


@dataclass(frozen=True)
class LevelSetSolution:
    alpha: float
    beta: float
    pressure_K_alpha: float
    maximizer: EquilibriumReport
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def to_dict(self, include_maximizer: bool = True) -> dict:
        data = {
            'alpha': self.alpha,
            'beta': self.beta,
            'pressure_K_alpha': self.pressure_K_alpha,
            'diagnostics': dict(self.diagnostics),
        }
        if include_maximizer:
            data['maximizer'] = self.maximizer.to_dict()
        return data


def check_alpha(rng: BirkhoffRange, alpha: float, settings=None) -> None:
    """Reject degenerate ranges and constraint values off the open interval."""
    if rng.is_degenerate:
        raise DegenerateRangeError(
            f"All cycle means of psi equal {rng.lower:.15g}; psi is cohomologous to a constant",
            payload={'birkhoff_range': rng.to_dict()},
        )
    margin = get_setting(settings, 'tolerances', 'interior_margin')
    if not rng.contains(alpha, margin):
        raise AlphaOutsideRangeError(
            f"alpha={alpha!r} is not inside I_psi=({rng.lower:.15g}, {rng.upper:.15g}) "
            f"by the margin {margin:g}",
            payload={'alpha': alpha, 'birkhoff_range': rng.to_dict()},
        )
    if abs(rng.lower) <= margin or abs(rng.upper) <= margin:
        logger.warning("0 lies on the boundary of I_psi")


def solve_beta(space: ShiftSpace, phi, psi, alpha: float, settings=None,
               beta_hint: Optional[float] = None, rng: Optional[BirkhoffRange] = None) -> LevelSetSolution:
    """Solve ``int psi dmu_beta = alpha`` for the Gibbs state of ``phi + beta psi``.

    The bracket starts at ``[-1, 1]`` (or ``beta_hint +- 1``) and doubles until
    the sign condition holds; Brent's method then runs to the root tolerance.

    Args:
        space: Mixing shift space.
        phi: Depth-1 potential to maximize.
        psi: Depth-1 constraint potential.
        alpha (float): Constraint value, strictly inside I_psi.
        settings (dict, optional): Resolved settings.
        beta_hint (float, optional): Warm start for the bracket.
        rng (BirkhoffRange, optional): Precomputed range of ``psi``.

    Returns:
        LevelSetSolution

    Raises:
        AlphaOutsideRangeError: If alpha is outside or on the boundary of I_psi.
        DegenerateRangeError: If I_psi is a single point.
        ConvergenceError: If no bracket is found or monotonicity fails.
    """
    phi_values = potential_vector(space, phi)
    psi_values = potential_vector(space, psi)
    rng = rng or birkhoff_range(space, psi_values, settings)
    check_alpha(rng, alpha, settings)

    reports = {}

    def excess(beta):
        report = equilibrium(space, phi_values + beta * psi_values, settings)
        reports[beta] = report
        return float(report.measure.stationary @ psi_values) - alpha

    center = 0.0 if beta_hint is None else float(beta_hint)
    lo, hi, f_lo, f_hi = expand_bracket(
        excess, center - 1.0, center + 1.0, increasing=True,
        max_doublings=get_setting(settings, 'solver', 'max_bracket_doublings'),
    )
    f_mid = excess(0.5 * (lo + hi))
    if not f_lo < f_mid < f_hi:
        raise ConvergenceError(
            "beta -> int psi dmu_beta is not increasing on the bracket",
            diagnostics={'lo': lo, 'hi': hi, 'f_lo': f_lo, 'f_mid': f_mid, 'f_hi': f_hi},
        )

    if f_lo == 0.0:
        beta = lo
    elif f_hi == 0.0:
        beta = hi
    else:
        beta = brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    report = reports[beta] if beta in reports else equilibrium(space, phi_values + beta * psi_values, settings)
    residual = abs(float(report.measure.stationary @ psi_values) - alpha)
    tol = get_setting(settings, 'tolerances', 'root') * max(1.0, rng.upper - rng.lower)
    if residual > tol:
        raise ConvergenceError(
            f"Constraint residual {residual:.3e} above tolerance {tol:.1e}",
            diagnostics={'beta': beta, 'residual': residual},
        )

    solution = LevelSetSolution(
        alpha=alpha,
        beta=float(beta),
        pressure_K_alpha=report.pressure - beta * alpha,
        maximizer=report,
        diagnostics={
            'constraint_residual': residual,
            'variational_residual': report.variational_residual,
            'bracket_lo': lo,
            'bracket_hi': hi,
        },
    )
    logger.debug(f"alpha={alpha:.12g}: beta={beta:.12g}, P(phi, K_alpha)={solution.pressure_K_alpha:.12g}")
    return solution


@dataclass(frozen=True)
class SpectrumEntry:
    alpha: float
    solution: Optional[LevelSetSolution] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        if self.solution is None:
            return {'alpha': self.alpha, 'error': self.error}
        return self.solution.to_dict(include_maximizer=False)


def levelset_spectrum(space: ShiftSpace, phi, psi, grid: Sequence[float], settings=None,
                      n_workers: Optional[int] = 1) -> List[SpectrumEntry]:
    """Solve a batch of constraint values; failures are reported per entry."""
    phi_values = potential_vector(space, phi)
    psi_values = potential_vector(space, psi)
    rng = birkhoff_range(space, psi_values, settings)

    def solve_point(alpha):
        try:
            return SpectrumEntry(alpha, solve_beta(space, phi_values, psi_values, alpha, settings, rng=rng))
        except ThermoRunError as exc:
            logger.warning(f"Spectrum point alpha={alpha!r} failed: {exc}")
            return SpectrumEntry(alpha, error=f"{type(exc).__name__}: {exc}")

    entries = run_parallel(solve_point, [float(a) for a in grid], n_workers=n_workers,
                           backend=get_setting(settings, 'parallel', 'backend'))
    solved = sum(entry.solution is not None for entry in entries)
    logger.info(f"Spectrum solved at {solved}/{len(entries)} grid points")
    return entries


def concavity_defect(entries: Sequence[SpectrumEntry]) -> float:
    """Largest normalized second difference of ``alpha -> P(phi, K_alpha)`` over solved points."""
    points = [(e.alpha, e.solution.pressure_K_alpha) for e in entries if e.solution is not None]
    points.sort()
    worst = -np.inf
    for (a0, p0), (a1, p1), (a2, p2) in zip(points, points[1:], points[2:]):
        slope_left = (p1 - p0) / (a1 - a0)
        slope_right = (p2 - p1) / (a2 - a1)
        worst = max(worst, slope_right - slope_left)
    return float(worst)


def empirical_means(measure: MarkovMeasure, psi_values, length: int, seeds: Sequence[int],
                    block: int = 4096) -> np.ndarray:
    """Birkhoff averages of ``psi`` along seeded trajectories of a Markov measure.

    Trajectory ``k`` draws its uniforms from ``numpy.random.default_rng(seeds[k])``;
    all trajectories advance together.
    """
    psi_values = np.asarray(psi_values, dtype=float)
    generators = [np.random.default_rng(seed) for seed in seeds]
    cumulative = np.cumsum(measure.stochastic, axis=1)
    cumulative[:, -1] = 1.0
    initial = np.cumsum(measure.stationary)
    initial[-1] = 1.0
    last = measure.symbol_count - 1

    states = None
    totals = np.zeros(len(generators))
    done = 0
    while done < length:
        size = min(block, length - done)
        uniforms = np.stack([g.random(size) for g in generators])
        for k in range(size):
            if states is None:
                states = np.minimum(np.searchsorted(initial, uniforms[:, k], side='right'), last)
            else:
                states = np.minimum((uniforms[:, k, None] >= cumulative[states]).sum(axis=1), last)
            totals += psi_values[states]
        done += size
    return totals / length


def sample_path(measure: MarkovMeasure, length: int, seed: int = 0) -> np.ndarray:
    """One trajectory of the Markov chain, started from its stationary vector."""
    generator = np.random.default_rng(seed)
    uniforms = generator.random(length)
    cumulative = np.cumsum(measure.stochastic, axis=1)
    cumulative[:, -1] = 1.0
    initial = np.cumsum(measure.stationary)
    initial[-1] = 1.0
    last = measure.symbol_count - 1
    path = np.empty(length, dtype=np.int64)
    state = min(int(np.searchsorted(initial, uniforms[0], side='right')), last)
    path[0] = state
    for k in range(1, length):
        state = min(int(np.searchsorted(cumulative[state], uniforms[k], side='right')), last)
        path[k] = state
    return path


__all__ = [
    'BirkhoffRange', 'LevelSetSolution', 'SpectrumEntry', 'birkhoff_range', 'check_alpha',
    'solve_beta', 'levelset_spectrum', 'concavity_defect', 'empirical_means', 'sample_path',
]
