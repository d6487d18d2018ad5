"""Parameter grids and seeded random systems for thermo_run experiments."""

import logging
import math

import numpy as np

from thermo_run.models.carpet import CarpetRow, CarpetSystem
from thermo_run.models.shift_space import (
    Potential, ShiftSpace, allowed_words, markov_measure, validate_mixing
)

logger = logging.getLogger('dev')


def alpha_grid(config):
    """Build the list of constraint values of a spectrum run.

    Args:
        config (list or dict): Either an explicit list of values or a mapping
            with ``start``, ``stop`` and ``num``; endpoints are excluded when
            ``open`` is true (the default), since I_psi is an open interval.

    Returns:
        list: Constraint values in increasing order.
    """
    if isinstance(config, (list, tuple)):
        values = sorted(float(a) for a in config)
        logger.debug(f"Explicit alpha grid with {len(values)} values")
        return values
    try:
        start, stop, num = float(config['start']), float(config['stop']), int(config['num'])
    except (KeyError, TypeError, ValueError) as e:
        logger.error(f"Invalid alpha grid {config!r}: {e}")
        raise ValueError(f"Invalid alpha grid: {e}")
    if num < 1 or not stop > start:
        raise ValueError(f"Alpha grid needs num >= 1 and stop > start, got {config!r}")
    if config.get('open', True):
        values = (start + (stop - start) * np.arange(1, num + 1) / (num + 1)).tolist()
    else:
        values = np.linspace(start, stop, num).tolist()
    logger.debug(f"Alpha grid of {num} values in ({start}, {stop}): {values[:3]}{'...' if num > 3 else ''}")
    return values


def random_mixing_shift(rng, max_symbols=5, density=0.6, max_tries=1000):
    """Random mixing shift space with 1..max_symbols symbols.

    Args:
        rng (numpy.random.Generator): Source of randomness.
        max_symbols (int): Largest alphabet size.
        density (float): Probability that a transition is allowed.
        max_tries (int): Rejection-sampling budget.

    Returns:
        ShiftSpace
    """
    for attempt in range(max_tries):
        n = int(rng.integers(1, max_symbols + 1))
        transitions = (rng.random((n, n)) < density).astype(np.int64)
        if transitions.sum(axis=1).min() == 0 or transitions.sum(axis=0).min() == 0:
            continue
        space = ShiftSpace(transitions)
        if validate_mixing(space)[0]:
            logger.debug(f"Random mixing shift on {n} symbols after {attempt + 1} draws")
            return space
    raise RuntimeError(f"No mixing shift found in {max_tries} draws")


def random_potential(rng, space, depth=1, low=-2.0, high=2.0):
    """Potential with independent uniform values on the allowed words of ``depth``."""
    words = allowed_words(space, depth)
    return Potential(depth, {w: float(v) for w, v in zip(words, rng.uniform(low, high, len(words)))})


def random_markov_measure(rng, space, concentration=1.0):
    """Markov measure with Dirichlet rows on the allowed transitions."""
    n = space.symbol_count
    stochastic = np.zeros((n, n))
    for a in range(n):
        allowed = np.flatnonzero(space.transitions[a])
        stochastic[a, allowed] = rng.dirichlet(np.full(allowed.size, concentration))
    return markov_measure(space, stochastic)


def random_fiber_weights(rng, system, concentration=1.0):
    """Per-row Dirichlet weights on the rectangles of a carpet system."""
    return [rng.dirichlet(np.full(len(row.columns), concentration)) for row in system.rows]


def random_mcmullen_pattern(rng, l, m):
    """Row counts of a random carpet pattern with at least one nonempty row.

    The pattern avoids the single-rectangle carpet.
    """
    while True:
        counts = rng.integers(0, l + 1, size=m).tolist()
        if sum(counts) >= 2:
            logger.debug(f"Random {l}x{m} carpet pattern {counts}")
            return counts


def random_carpet(rng, max_rows=3, max_columns=3, psi_range=(0.5, 1.0), phi_range=(1.0, 2.0)):
    """Random row-driven carpet system on a random mixing base.

    Returns:
        CarpetSystem
    """
    base = random_mixing_shift(rng, max_rows)
    n = base.symbol_count
    rows, next_id = [], 0
    for _ in range(n):
        size = int(rng.integers(2 if n == 1 else 1, max_columns + 1))
        rows.append(CarpetRow(tuple(range(next_id, next_id + size)), rng.uniform(*phi_range, size)))
        next_id += size
    psi = rng.uniform(*psi_range, n)
    logger.debug(f"Random carpet with rows {[len(r.columns) for r in rows]}")
    return CarpetSystem(base, tuple(rows), psi)


def mcmullen_row_weights(l, m, row_counts):
    """Optimal row probabilities ``p_i ∝ r_i^(log m / log l)`` over nonempty rows."""
    exponent = math.log(m) / math.log(l)
    counts = np.array([r for r in row_counts if r > 0], dtype=float)
    weights = counts ** exponent
    return weights / weights.sum()


__all__ = [
    'alpha_grid', 'random_mixing_shift', 'random_potential', 'random_markov_measure',
    'random_fiber_weights', 'random_mcmullen_pattern', 'random_carpet', 'mcmullen_row_weights',
]
