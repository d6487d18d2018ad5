"""Pressure, equilibrium states and correlation sums via weighted transfer matrices.

For a depth-1 potential ``phi`` the transfer matrix is
``B(a, b) = transitions(a, b) * exp(phi(a))`` (the weight sits on the source
symbol, so ``S_n phi(x) = phi(x_0) + ... + phi(x_{n-1})``). The pressure is the
logarithm of its Perron root. Matrices are stored shifted by ``max(phi)`` so
that large potentials do not overflow; eigenvectors are unaffected.
"""

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from thermo_run.config.default_config import get_setting
from thermo_run.core.exceptions import (
    ConvergenceError, EnumerationGuardError, NotMixingError
)
from thermo_run.core.utils import find_root
from thermo_run.models.shift_space import (
    MarkovMeasure, ShiftSpace, count_words, measure_entropy, potential_vector,
    validate_mixing
)

logger = logging.getLogger('dev')


@functools.lru_cache(maxsize=512)
def _mixing_witness(space: ShiftSpace) -> Tuple[bool, Optional[int]]:
    return validate_mixing(space)


@functools.lru_cache(maxsize=512)
def _is_irreducible(space: ShiftSpace) -> bool:
    n = space.symbol_count
    reach = ((np.eye(n, dtype=np.int64) + space.transitions) > 0).astype(np.int64)
    for _ in range(max(1, int(math.ceil(math.log2(max(n, 2)))))):
        reach = ((reach @ reach) > 0).astype(np.int64)
    return bool(np.all(reach > 0))


def require_mixing(space: ShiftSpace, allow_periodic: bool = False) -> float:
    """Refuse shift spaces without a simple Perron root.

    Args:
        space: Shift space to check.
        allow_periodic: Accept irreducible periodic matrices as well.

    Returns:
        float: Diagonal shift to use for power iteration (0 for mixing spaces).
    """
    mixing, _ = _mixing_witness(space)
    if mixing:
        return 0.0
    if allow_periodic and _is_irreducible(space):
        return 1.0
    raise NotMixingError("Transition matrix is not primitive; the Perron root need not be simple")


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """Weighted transition matrix ``exp(offset) * scaled``."""

    scaled: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        matrix = np.array(self.scaled, dtype=float, copy=True)
        if not np.all(np.isfinite(matrix)) or np.any(matrix < 0):
            raise ConvergenceError("Transfer matrix entries must be finite and nonnegative")
        matrix.setflags(write=False)
        object.__setattr__(self, 'scaled', matrix)

    @property
    def entries(self) -> np.ndarray:
        return self.scaled * math.exp(self.offset)

    @classmethod
    def from_potential(cls, space: ShiftSpace, phi) -> 'TransferMatrix':
        values = potential_vector(space, phi)
        offset = float(values.max())
        weights = np.exp(values - offset)
        scaled = space.transitions * weights[:, None]
        if np.any((space.transitions > 0) & (scaled == 0.0)):
            raise ConvergenceError(
                "Potential range too wide: transfer weights underflow",
                diagnostics={'range': float(values.max() - values.min())},
            )
        return cls(scaled, offset)


def _collatz_power(matrix, accelerated, tol, max_iterations):
    n = matrix.shape[0]
    vector = np.ones(n)
    residual = math.inf
    for iteration in range(1, max_iterations + 1):
        nxt = accelerated @ vector
        top = nxt.max()
        if not top > 0:
            raise ConvergenceError("Power iteration collapsed to the zero vector")
        nxt /= top
        if np.all(nxt > 0):
            ratios = (matrix @ nxt) / nxt
            lo, hi = ratios.min(), ratios.max()
            residual = (hi - lo) / hi
            if residual <= tol:
                if iteration > 1000:
                    logger.warning(f"Power iteration needed {iteration} steps; matrix is ill-conditioned")
                return 0.5 * (lo + hi), nxt / nxt.sum(), iteration
        elif iteration > n + 1:
            raise ConvergenceError(
                "Perron vector has vanishing entries; weights underflow",
                diagnostics={'iteration': iteration},
            )
        vector = nxt
    raise ConvergenceError(
        f"Power iteration did not converge in {max_iterations} iterations",
        diagnostics={'iterations': max_iterations, 'relative_residual': float(residual)},
    )


def perron_eigenpair(matrix, shift: float = 0.0, settings=None) -> Tuple[float, np.ndarray, np.ndarray]:
    """Perron root with left and right eigenvectors of a nonnegative matrix.

    Power iteration runs on ``M^(2^squarings)`` where ``M`` is the max-normalized
    matrix ``B + shift*I``; convergence is declared when the Collatz-Wielandt
    bounds ``min (Mv)/v <= rho <= max (Mv)/v`` agree to the relative power
    residual. A positive ``shift`` makes irreducible periodic matrices primitive.

    Args:
        matrix (array_like): Square nonnegative irreducible matrix.
        shift (float): Diagonal shift in units of the largest entry.
        settings (dict, optional): Resolved settings.

    Returns:
        tuple: ``(eigenvalue, left, right)``; both vectors positive with unit sum.

    Raises:
        ConvergenceError: If the iteration budget is exhausted.
    """
    tol = get_setting(settings, 'tolerances', 'power_residual')
    max_iterations = get_setting(settings, 'solver', 'max_power_iterations')
    squarings = get_setting(settings, 'solver', 'squarings')

    b = np.asarray(matrix, dtype=float)
    n = b.shape[0]
    top = b.max()
    if not top > 0:
        raise ConvergenceError("Zero matrix has no Perron root")
    m = b / top + shift * np.eye(n)
    scale = m.max()
    m = m / scale

    accelerated = m.copy()
    for _ in range(squarings):
        accelerated = accelerated @ accelerated
        accelerated /= accelerated.max()

    rho_right, right, it_right = _collatz_power(m, accelerated, tol, max_iterations)
    rho_left, left, it_left = _collatz_power(m.T, accelerated.T, tol, max_iterations)
    logger.debug(f"Perron pair found in {it_right}/{it_left} iterations (n={n}, shift={shift})")
    eigenvalue = (0.5 * (rho_right + rho_left) * scale - shift) * top
    return float(eigenvalue), left, right


def _perron_data(space, values, settings, allow_periodic=False):
    shift = require_mixing(space, allow_periodic)
    transfer = TransferMatrix.from_potential(space, values)
    eigenvalue, left, right = perron_eigenpair(transfer.scaled, shift=shift, settings=settings)
    return transfer, eigenvalue, left, right


def pressure(space: ShiftSpace, phi, settings=None, allow_periodic: bool = False) -> float:
    """Topological pressure of a depth-1 potential (Potential or vector)."""
    values = potential_vector(space, phi)
    transfer, eigenvalue, _, _ = _perron_data(space, values, settings, allow_periodic)
    return math.log(eigenvalue) + transfer.offset


@dataclass(frozen=True, eq=False)
class EquilibriumReport:
    """Equilibrium state of a depth-1 potential with its Perron data."""

    pressure: float
    measure: MarkovMeasure
    entropy: float
    integral_phi: float
    left_eigvec: np.ndarray
    right_eigvec: np.ndarray
    gibbs_lower: float
    gibbs_upper: float

    @property
    def variational_residual(self) -> float:
        return abs(self.entropy + self.integral_phi - self.pressure)

    def to_dict(self) -> dict:
        return {
            'pressure': self.pressure,
            'entropy': self.entropy,
            'integral_phi': self.integral_phi,
            'measure': self.measure.to_dict(),
            'left_eigvec': self.left_eigvec.tolist(),
            'right_eigvec': self.right_eigvec.tolist(),
            'gibbs_lower': self.gibbs_lower,
            'gibbs_upper': self.gibbs_upper,
        }


def equilibrium(space: ShiftSpace, phi, settings=None, allow_periodic: bool = False) -> EquilibriumReport:
    """Equilibrium (Gibbs) state of a depth-1 potential.

    The measure is Markov with ``q(a,b) = B(a,b) v(b) / (lambda v(a))`` and
    stationary vector ``p ∝ u * v`` where ``u``/``v`` are the left/right Perron
    vectors. The eigenvectors are normalized so that ``u . v = 1``; the Gibbs
    constants then bound every cylinder ratio
    ``mu[w] / exp(-P n + S_n phi(w)) = u(w_0) v(w_{n-1}) exp(P - phi(w_{n-1}))``.

    Args:
        space: Mixing shift space (or irreducible with ``allow_periodic``).
        phi: Depth-1 Potential or vector of values.
        settings (dict, optional): Resolved settings.
        allow_periodic (bool): Accept irreducible periodic shift spaces.

    Returns:
        EquilibriumReport
    """
    values = potential_vector(space, phi)
    transfer, eigenvalue, left, right = _perron_data(space, values, settings, allow_periodic)
    log_pressure = math.log(eigenvalue) + transfer.offset

    q = transfer.scaled * right[None, :] / (eigenvalue * right[:, None])
    q /= q.sum(axis=1, keepdims=True)
    p = left * right
    p /= p.sum()
    measure = MarkovMeasure(q, p)

    left = left / float(left @ right)
    entropy = measure_entropy(space, measure)
    integral = float(p @ values)
    boundary = right * np.exp(log_pressure - values)
    report = EquilibriumReport(
        pressure=log_pressure,
        measure=measure,
        entropy=entropy,
        integral_phi=integral,
        left_eigvec=left,
        right_eigvec=right,
        gibbs_lower=float(left.min() * boundary.min()),
        gibbs_upper=float(left.max() * boundary.max()),
    )
    if report.variational_residual > get_setting(settings, 'tolerances', 'variational'):
        logger.warning(f"Variational identity residual {report.variational_residual:.3e} exceeds tolerance")
    return report


@dataclass(frozen=True)
class GibbsRatioCheck:
    min_ratio: float
    max_ratio: float
    per_length: List[Tuple[int, float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'min_ratio': self.min_ratio,
            'max_ratio': self.max_ratio,
            'per_length': [{'length': n, 'min': lo, 'max': hi} for n, lo, hi in self.per_length],
        }


def gibbs_ratio_check(report: EquilibriumReport, space: ShiftSpace, phi, max_len: int,
                      settings=None) -> GibbsRatioCheck:
    """Exhaustive cylinder ratios ``mu[w] / exp(-P n + S_n phi(w))`` for n = 1..max_len.

    Raises:
        EnumerationGuardError: If more words than the enumeration guard would be visited.
    """
    guard = get_setting(settings, 'solver', 'enumeration_guard')
    total = sum(count_words(space, n) for n in range(1, max_len + 1))
    if total > guard:
        raise EnumerationGuardError(f"{total} cylinders up to length {max_len} exceed the guard {guard}")

    values = potential_vector(space, phi)
    measure = report.measure
    with np.errstate(divide='ignore'):
        log_q = np.log(measure.stochastic)
    last = np.arange(space.symbol_count)
    log_mass = np.log(measure.stationary)
    birkhoff = values.copy()

    per_length = []
    for length in range(1, max_len + 1):
        if length > 1:
            rows, succ = np.nonzero(space.transitions[last])
            log_mass = log_mass[rows] + log_q[last[rows], succ]
            birkhoff = birkhoff[rows] + values[succ]
            last = succ
        ratios = np.exp(log_mass + length * report.pressure - birkhoff)
        per_length.append((length, float(ratios.min()), float(ratios.max())))

    check = GibbsRatioCheck(
        min_ratio=min(lo for _, lo, _ in per_length),
        max_ratio=max(hi for _, _, hi in per_length),
        per_length=per_length,
    )
    logger.debug(f"Gibbs ratios over {total} cylinders in [{check.min_ratio:.6g}, {check.max_ratio:.6g}]")
    return check


def second_eigenvalue_modulus(measure: MarkovMeasure, squarings: int = 50) -> float:
    """Spectral radius of ``Q - 1 p^T``, i.e. |lambda_2| of the stochastic matrix.

    Gelfand's formula on repeated squares, renormalized at every step.
    """
    q = np.asarray(measure.stochastic, dtype=float)
    deflated = q - np.outer(np.ones(q.shape[0]), measure.stationary)
    log_scale = 0.0
    for _ in range(squarings):
        norm = np.abs(deflated).sum(axis=1).max()
        if norm == 0.0:
            return 0.0
        deflated = deflated / norm
        log_scale += math.log(norm)
        deflated = deflated @ deflated
        log_scale *= 2.0
    norm = np.abs(deflated).sum(axis=1).max()
    if norm == 0.0:
        return 0.0
    return float(min(1.0, math.exp((log_scale + math.log(norm)) / 2.0 ** squarings)))


@dataclass(frozen=True)
class QFormEstimate:
    value: float
    truncation_n: int
    tail_bound: float
    second_eigenvalue: float = 0.0
    terms: Tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            'value': self.value,
            'truncation_n': self.truncation_n,
            'tail_bound': self.tail_bound,
            'second_eigenvalue': self.second_eigenvalue,
        }


def q_form(space: ShiftSpace, h_base, h1, h2, truncation: Optional[int] = None,
           settings=None) -> QFormEstimate:
    """Truncated correlation sum ``sum_{n=0}^{N} (int h1 (h2 o f^n) - int h1 int h2)``.

    Terms are evaluated exactly as ``p . (h1 * Q^n h2_c)`` with ``h2_c`` centered,
    under the equilibrium state of ``h_base``. The tail bound is a geometric
    envelope of the computed terms with ratio |lambda_2|.
    """
    truncation = truncation if truncation is not None else get_setting(settings, 'solver', 'qform_truncation')
    if truncation < 1:
        raise ValueError(f"Truncation must be at least 1, got {truncation}")
    report = equilibrium(space, h_base, settings)
    p, q = report.measure.stationary, report.measure.stochastic
    first = potential_vector(space, h1)
    second = potential_vector(space, h2)

    weighted = p * first
    propagated = second - p @ second
    terms = []
    for _ in range(truncation + 1):
        terms.append(float(weighted @ propagated))
        propagated = q @ propagated
    value = float(np.sum(terms))

    rho = second_eigenvalue_modulus(report.measure)
    magnitudes = np.abs(terms)
    floor = 1e3 * np.finfo(float).eps * max(magnitudes[0], np.abs(first).max() * np.abs(second).max(), 1e-300)
    if rho < 1e-14 or magnitudes.max() <= floor:
        tail = 0.0
    elif rho >= 1.0:
        tail = math.inf
    else:
        significant = [n for n, c in enumerate(magnitudes) if c > floor]
        log_envelope = max(math.log(magnitudes[n]) - n * math.log(rho) for n in significant)
        tail = math.exp(log_envelope + (truncation + 1) * math.log(rho)) / (1.0 - rho)
    logger.debug(f"Q-form {value:.12g} with {truncation} terms, |lambda_2|={rho:.6g}, tail {tail:.3e}")
    return QFormEstimate(value, truncation, tail, rho, tuple(terms))


def bowen_root(space: ShiftSpace, psi, settings=None, allow_periodic: bool = False) -> float:
    """Root ``s >= 0`` of the Bowen equation ``P(-s psi) = 0`` for positive ``psi``."""
    values = potential_vector(space, psi)
    if np.any(values <= 0):
        raise ValueError("Bowen equation requires a strictly positive potential")
    top = pressure(space, np.zeros_like(values), settings, allow_periodic)
    if top <= 0.0:
        return 0.0
    root = find_root(
        lambda s: pressure(space, -s * values, settings, allow_periodic),
        0.0, top / values.min(), increasing=False,
        xtol=get_setting(settings, 'tolerances', 'root') * 1e-4,
        max_doublings=get_setting(settings, 'solver', 'max_bracket_doublings'),
    )
    logger.debug(f"Bowen root {root:.15g} (topological entropy {top:.15g})")
    return float(root)


__all__ = [
    'TransferMatrix', 'EquilibriumReport', 'GibbsRatioCheck', 'QFormEstimate', 'require_mixing',
    'perron_eigenpair', 'pressure', 'equilibrium', 'gibbs_ratio_check', 'second_eigenvalue_modulus',
    'q_form', 'bowen_root',
]
