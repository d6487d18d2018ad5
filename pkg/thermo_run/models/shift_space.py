"""Subshifts of finite type, locally constant potentials and Markov measures.

A shift space is stored as its 0/1 transition matrix; symbols are the integers
``0..n-1``. Potentials are locally constant of some depth ``k`` and are stored as
a mapping from allowed k-words (tuples) to reals. Depth-k potentials are turned
into depth-1 potentials on the k-block shift by :func:`higher_block`.

All objects are immutable after construction; numpy arrays are stored read-only.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import entr

from thermo_run.config.default_config import TOLERANCES
from thermo_run.core.exceptions import (
    EnumerationGuardError, IncompatibleMeasureError, InvalidShiftError
)

logger = logging.getLogger('dev')

WordKey = Tuple[int, ...]


def _frozen(array, dtype=float):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ShiftSpace:
    """Subshift of finite type given by a square 0/1 transition matrix."""

    transitions: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.transitions)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
            raise InvalidShiftError(f"Transition matrix must be square and nonempty, got shape {matrix.shape}")
        if not np.all((matrix == 0) | (matrix == 1)):
            raise InvalidShiftError("Transition matrix entries must be 0 or 1")
        empty_rows = np.flatnonzero(matrix.sum(axis=1) == 0)
        empty_cols = np.flatnonzero(matrix.sum(axis=0) == 0)
        if empty_rows.size or empty_cols.size:
            raise InvalidShiftError(
                f"Stranded symbols: empty rows {empty_rows.tolist()}, empty columns {empty_cols.tolist()}"
            )
        object.__setattr__(self, 'transitions', _frozen(matrix, dtype=np.int64))

    @property
    def symbol_count(self) -> int:
        return self.transitions.shape[0]

    def allowed(self, a: int, b: int) -> bool:
        return bool(self.transitions[a, b])

    def is_full_shift(self) -> bool:
        return bool(np.all(self.transitions == 1))

    def to_dict(self) -> dict:
        return {'symbols': self.symbol_count, 'transitions': self.transitions.tolist()}

    @classmethod
    def full_shift(cls, n: int) -> 'ShiftSpace':
        return cls(np.ones((n, n), dtype=np.int64))

    @classmethod
    def golden_mean(cls) -> 'ShiftSpace':
        return cls(np.array([[1, 1], [1, 0]]))


@dataclass(frozen=True)
class Word:
    """Finite sequence of symbols; cycles are stored as one period."""

    symbols: Tuple[int, ...]

    def is_allowed(self, space: ShiftSpace) -> bool:
        return all(space.allowed(a, b) for a, b in zip(self.symbols, self.symbols[1:]))

    def is_cycle(self, space: ShiftSpace) -> bool:
        return bool(self.symbols) and self.is_allowed(space) and space.allowed(self.symbols[-1], self.symbols[0])

    def mean(self, values: np.ndarray) -> float:
        return float(np.mean([values[s] for s in self.symbols]))

    def as_string(self) -> str:
        return '-'.join(str(s) for s in self.symbols)

    def __len__(self):
        return len(self.symbols)


@dataclass(frozen=True, eq=False)
class Potential:
    """Locally constant potential of depth ``k``, one value per allowed k-word."""

    depth: int
    values: Dict[WordKey, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.depth < 1:
            raise InvalidShiftError(f"Potential depth must be positive, got {self.depth}")
        cleaned = {}
        for word, value in self.values.items():
            key = tuple(int(s) for s in (word if isinstance(word, (tuple, list)) else (word,)))
            if len(key) != self.depth:
                raise InvalidShiftError(f"Word {key} has length {len(key)}, expected depth {self.depth}")
            if not np.isfinite(value):
                raise InvalidShiftError(f"Potential value at {key} is not finite: {value}")
            cleaned[key] = float(value)
        object.__setattr__(self, 'values', cleaned)

    @classmethod
    def from_vector(cls, values: Sequence[float]) -> 'Potential':
        """Depth-1 potential reading the first symbol."""
        return cls(1, {(a,): float(v) for a, v in enumerate(values)})

    @classmethod
    def constant(cls, space: ShiftSpace, value: float) -> 'Potential':
        return cls.from_vector([value] * space.symbol_count)

    def check_against(self, space: ShiftSpace) -> None:
        """Raise unless the potential is defined on exactly the allowed k-words."""
        expected = set(allowed_words(space, self.depth))
        given = set(self.values)
        if given != expected:
            missing = sorted(expected - given)[:5]
            extra = sorted(given - expected)[:5]
            raise InvalidShiftError(
                f"Depth-{self.depth} potential does not match allowed words: missing {missing}, extra {extra}"
            )

    def vector(self, space: ShiftSpace) -> np.ndarray:
        """Values of a depth-1 potential in symbol order."""
        if self.depth != 1:
            raise InvalidShiftError(f"Expected a depth-1 potential, got depth {self.depth}; recode with higher_block")
        self.check_against(space)
        return np.array([self.values[(a,)] for a in range(space.symbol_count)])

    def deepened(self, space: ShiftSpace, depth: int) -> 'Potential':
        """The same function read through allowed ``depth``-words, ``depth >= self.depth``."""
        if depth < self.depth:
            raise InvalidShiftError(f"Cannot lower the depth of a potential from {self.depth} to {depth}")
        if depth == self.depth:
            return self
        return Potential(depth, {w: self.values[w[:self.depth]] for w in allowed_words(space, depth)})

    def scaled(self, factor: float) -> 'Potential':
        return Potential(self.depth, {w: factor * v for w, v in self.values.items()})

    def plus(self, other: 'Potential', weight: float = 1.0) -> 'Potential':
        if other.depth != self.depth or set(other.values) != set(self.values):
            raise InvalidShiftError("Potentials must share depth and domain to be added")
        return Potential(self.depth, {w: v + weight * other.values[w] for w, v in self.values.items()})

    def to_dict(self) -> dict:
        return {
            'depth': self.depth,
            'values': {'-'.join(str(s) for s in w): v for w, v in sorted(self.values.items())},
        }


@dataclass(frozen=True, eq=False)
class MarkovMeasure:
    """Shift-invariant 1-step Markov measure."""

    stochastic: np.ndarray
    stationary: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.stochastic, dtype=float)
        p = np.asarray(self.stationary, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or p.shape != (q.shape[0],):
            raise IncompatibleMeasureError(f"Shape mismatch: stochastic {q.shape}, stationary {p.shape}")
        tol = TOLERANCES['structural']
        if np.any(q < -tol) or np.max(np.abs(q.sum(axis=1) - 1.0)) > tol:
            raise IncompatibleMeasureError("Stochastic matrix must be nonnegative with unit row sums")
        if np.any(p < -tol) or abs(p.sum() - 1.0) > tol:
            raise IncompatibleMeasureError("Stationary vector must be a probability vector")
        if np.max(np.abs(p @ q - p)) > TOLERANCES['stationary']:
            raise IncompatibleMeasureError("Stationary vector is not invariant under the stochastic matrix")
        object.__setattr__(self, 'stochastic', _frozen(np.clip(q, 0.0, None)))
        object.__setattr__(self, 'stationary', _frozen(np.clip(p, 0.0, None)))

    @property
    def symbol_count(self) -> int:
        return self.stationary.shape[0]

    def check_compatible(self, space: ShiftSpace) -> None:
        if self.symbol_count != space.symbol_count:
            raise IncompatibleMeasureError(
                f"Measure has {self.symbol_count} symbols, shift space has {space.symbol_count}"
            )
        if np.any((space.transitions == 0) & (self.stochastic > 0)):
            raise IncompatibleMeasureError("Measure charges a forbidden transition")

    def cylinder(self, word: Sequence[int]) -> float:
        """Measure of the cylinder [w_0 ... w_{n-1}]."""
        mass = self.stationary[word[0]]
        for a, b in zip(word, word[1:]):
            mass *= self.stochastic[a, b]
        return float(mass)

    def to_dict(self) -> dict:
        return {'stochastic': self.stochastic.tolist(), 'stationary': self.stationary.tolist()}


def stationary_vector(stochastic: np.ndarray) -> np.ndarray:
    """Stationary probability vector of a row-stochastic matrix.

    Unique for irreducible chains; for reducible chains a nonnegative solution
    of minimal norm is returned.
    """
    q = np.asarray(stochastic, dtype=float)
    n = q.shape[0]
    system = np.vstack([q.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    p, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def markov_measure(space: ShiftSpace, stochastic: np.ndarray) -> MarkovMeasure:
    """Build a Markov measure on ``space`` from a stochastic matrix."""
    measure = MarkovMeasure(stochastic, stationary_vector(stochastic))
    measure.check_compatible(space)
    return measure


def bernoulli(space: ShiftSpace, weights: Sequence[float]) -> MarkovMeasure:
    """Bernoulli measure on a full shift."""
    if not space.is_full_shift():
        raise IncompatibleMeasureError("Bernoulli measures require a full shift")
    w = np.asarray(weights, dtype=float)
    if w.shape != (space.symbol_count,):
        raise IncompatibleMeasureError(f"Expected {space.symbol_count} weights, got {w.shape}")
    w = w / w.sum()
    return MarkovMeasure(np.tile(w, (space.symbol_count, 1)), w)


def point_mass(space: ShiftSpace, cycle: Sequence[int]) -> MarkovMeasure:
    """Periodic-orbit measure on a simple cycle, as a Markov chain.

    Rows of symbols off the cycle carry the uniform distribution on their
    successors; they have zero stationary mass.
    """
    cycle = [int(s) for s in cycle]
    if len(set(cycle)) != len(cycle) or not Word(tuple(cycle)).is_cycle(space):
        raise IncompatibleMeasureError(f"{cycle} is not a simple cycle of the shift space")
    n = space.symbol_count
    q = space.transitions / space.transitions.sum(axis=1, keepdims=True)
    q = np.array(q, dtype=float)
    p = np.zeros(n)
    for i, a in enumerate(cycle):
        q[a] = 0.0
        q[a, cycle[(i + 1) % len(cycle)]] = 1.0
        p[a] = 1.0 / len(cycle)
    return MarkovMeasure(q, p)


def validate_mixing(space: ShiftSpace) -> Tuple[bool, Optional[int]]:
    """Check primitivity of the transition matrix.

    Args:
        space: Shift space (construction already rejects stranded symbols).

    Returns:
        tuple: ``(True, k)`` with the smallest k such that A^k > 0, or ``(False, None)``.
    """
    a = (space.transitions > 0).astype(np.int64)
    n = space.symbol_count
    bound = (n - 1) ** 2 + 1
    power = a.copy()
    for k in range(1, bound + 1):
        if np.all(power > 0):
            logger.debug(f"Transition matrix is primitive with witness power {k}")
            return True, k
        power = ((power @ a) > 0).astype(np.int64)
    logger.debug(f"No positive power up to the Wielandt bound {bound}; matrix is not primitive")
    return False, None


def count_words(space: ShiftSpace, length: int) -> int:
    """Number of allowed words of the given length."""
    if length <= 0:
        return 0
    a = space.transitions.astype(object)
    vector = np.ones(space.symbol_count, dtype=object)
    for _ in range(length - 1):
        vector = a @ vector
    return int(sum(vector))


def enumerate_words(space: ShiftSpace, length: int) -> Iterator[WordKey]:
    """Allowed words of the given length in lexicographic order."""
    if length <= 0:
        return
    stack = [(a,) for a in reversed(range(space.symbol_count))]
    while stack:
        word = stack.pop()
        if len(word) == length:
            yield word
            continue
        last = word[-1]
        for b in reversed(range(space.symbol_count)):
            if space.transitions[last, b]:
                stack.append(word + (b,))


def allowed_words(space: ShiftSpace, length: int, guard: Optional[int] = None) -> List[WordKey]:
    """List of allowed words of ``length``; raises when the count exceeds ``guard``."""
    if guard is not None:
        total = count_words(space, length)
        if total > guard:
            raise EnumerationGuardError(f"{total} words of length {length} exceed the guard {guard}")
    return list(enumerate_words(space, length))


def higher_block(space: ShiftSpace, potential: Potential) -> Tuple[ShiftSpace, Potential]:
    """Recode a depth-k potential as a depth-1 potential on the k-block shift.

    New symbol ``i`` is the i-th allowed k-word in lexicographic order (see
    :func:`allowed_words`). Word ``w`` may be followed by ``w'`` iff they overlap
    in k-1 symbols and the concatenation is allowed.

    Args:
        space: Original shift space.
        potential: Potential of depth k >= 1.

    Returns:
        tuple: (recoded ShiftSpace, depth-1 Potential).
    """
    potential.check_against(space)
    k = potential.depth
    if k == 1:
        return space, potential
    words = allowed_words(space, k)
    if not words:
        raise InvalidShiftError(f"No allowed words of length {k}")
    n = len(words)
    transitions = np.zeros((n, n), dtype=np.int64)
    for i, w in enumerate(words):
        for j, v in enumerate(words):
            if w[1:] == v[:-1] and space.allowed(w[-1], v[-1]):
                transitions[i, j] = 1
    logger.debug(f"Recoded depth-{k} potential onto {n} block symbols with {int(transitions.sum())} transitions")
    recoded = ShiftSpace(transitions)
    return recoded, Potential.from_vector([potential.values[w] for w in words])


def common_block(space: ShiftSpace,
                 potentials: Sequence[Potential]) -> Tuple[ShiftSpace, List[Potential], List[WordKey]]:
    """Recode potentials of mixed depths onto one block shift.

    Every potential is deepened to the largest depth k and recoded with
    :func:`higher_block`, so all of them live on the same k-block alphabet.

    Returns:
        tuple: (block ShiftSpace, depth-1 Potentials in input order, the k-word
        of each block symbol). For k = 1 the space is returned unchanged and the
        words are the one-symbol words.
    """
    for potential in potentials:
        potential.check_against(space)
    k = max(p.depth for p in potentials)
    words = allowed_words(space, k)
    block, first = higher_block(space, potentials[0].deepened(space, k))
    recoded = [first]
    for potential in potentials[1:]:
        deep = potential.deepened(space, k)
        recoded.append(Potential.from_vector([deep.values[w] for w in words]))
    return block, recoded, words


def unblock_cycle(words: Sequence[WordKey], cycle: Sequence[int]) -> List[int]:
    """Original symbols of a periodic orbit written in block symbols."""
    return [int(words[b][0]) for b in cycle]


def measure_entropy(space: ShiftSpace, measure: MarkovMeasure) -> float:
    """Metric entropy -sum_a p(a) sum_b q(a,b) log q(a,b) of a Markov measure."""
    measure.check_compatible(space)
    return float(measure.stationary @ entr(measure.stochastic).sum(axis=1))


def integrate(potential: Potential, measure: MarkovMeasure, space: Optional[ShiftSpace] = None) -> float:
    """Integral of a locally constant potential against a Markov measure.

    Depth-1 potentials integrate as ``sum_a p(a) phi(a)``. Deeper potentials are
    summed over cylinders and need ``space`` to enumerate the allowed words.
    """
    if space is not None:
        measure.check_compatible(space)
    if potential.depth == 1:
        n = measure.symbol_count
        if set(potential.values) != {(a,) for a in range(n)}:
            raise IncompatibleMeasureError("Potential and measure live on different alphabets")
        values = np.array([potential.values[(a,)] for a in range(n)])
        return float(measure.stationary @ values)
    if space is None:
        raise IncompatibleMeasureError("Integrating a deeper potential requires its shift space")
    potential.check_against(space)
    return float(sum(measure.cylinder(w) * v for w, v in potential.values.items()))


def potential_vector(space: ShiftSpace, potential) -> np.ndarray:
    """Depth-1 values in symbol order from a Potential or a plain sequence."""
    if isinstance(potential, Potential):
        return potential.vector(space)
    values = np.asarray(potential, dtype=float)
    if values.shape != (space.symbol_count,):
        raise InvalidShiftError(f"Expected {space.symbol_count} potential values, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise InvalidShiftError("Potential values must be finite")
    return values


__all__ = [
    'ShiftSpace', 'Word', 'Potential', 'MarkovMeasure', 'stationary_vector', 'markov_measure',
    'bernoulli', 'point_mass', 'validate_mixing', 'count_words', 'enumerate_words',
    'allowed_words', 'higher_block', 'common_block', 'unblock_cycle', 'measure_entropy', 'integrate',
    'potential_vector',
]
