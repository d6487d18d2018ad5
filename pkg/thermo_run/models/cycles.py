"""Mean-weight cycles of transition graphs with vertex weights.

A depth-1 weight ``w`` puts ``w(a)`` on every edge leaving ``a``, so the mean
weight of a cycle is the average of ``w`` over its symbols. Extreme cycle means
are computed with Karp's algorithm; the optimal cycles are then located in the
tight subgraph (edges with zero reduced cost for the shortest-path potential).
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import networkx as nx
import numpy as np

from thermo_run.config.default_config import get_setting
from thermo_run.core.exceptions import EnumerationGuardError
from thermo_run.models.shift_space import ShiftSpace, Word, potential_vector

logger = logging.getLogger('dev')


@dataclass(frozen=True)
class CycleExtreme:
    value: float
    cycle: Word
    karp_value: float


@dataclass(frozen=True, eq=False)
class CriticalComponent:
    """Strongly connected piece of the tight subgraph, with its tight edges only."""

    symbols: Tuple[int, ...]
    transitions: np.ndarray

    def shift_space(self) -> ShiftSpace:
        return ShiftSpace(self.transitions)


def _canonical(symbols) -> Tuple[int, ...]:
    symbols = list(symbols)
    start = symbols.index(min(symbols))
    return tuple(symbols[start:] + symbols[:start])


def _karp(space: ShiftSpace, weights: np.ndarray):
    n = space.symbol_count
    edge = np.where(space.transitions > 0, weights[:, None], np.inf)
    dist = np.zeros((n + 1, n))
    for k in range(n):
        dist[k + 1] = np.min(dist[k][:, None] + edge, axis=0)
    steps = (n - np.arange(n))[:, None]
    value = float(np.min(np.max((dist[n][None, :] - dist[:n]) / steps, axis=0)))
    potential = np.min(dist - np.arange(n + 1)[:, None] * value, axis=0)
    return value, potential


def _tight_graph(space, weights, value, potential, tol):
    graph = nx.DiGraph()
    graph.add_nodes_from(range(space.symbol_count))
    reduced = potential[:, None] + weights[:, None] - value - potential[None, :]
    for a, b in zip(*np.nonzero(space.transitions)):
        if reduced[a, b] <= tol:
            graph.add_edge(int(a), int(b))
    return graph


def _components(graph):
    found = []
    for nodes in nx.strongly_connected_components(graph):
        nodes = sorted(nodes)
        if len(nodes) == 1 and not graph.has_edge(nodes[0], nodes[0]):
            continue
        index = {v: i for i, v in enumerate(nodes)}
        transitions = np.zeros((len(nodes), len(nodes)), dtype=np.int64)
        for a, b in graph.subgraph(nodes).edges():
            transitions[index[a], index[b]] = 1
        found.append(CriticalComponent(tuple(nodes), transitions))
    return sorted(found, key=lambda c: c.symbols[0])


def _signed(weights, maximize):
    return -weights if maximize else weights


def extreme_mean(space: ShiftSpace, weights, maximize: bool = False) -> float:
    """Karp value of the minimum (or maximum) cycle mean, without a witness."""
    values = potential_vector(space, weights)
    value, _ = _karp(space, _signed(values, maximize))
    return -value if maximize else value


def critical_components(space: ShiftSpace, weights, maximize: bool = True, settings=None) -> List[CriticalComponent]:
    """Components carrying every cycle of extreme (maximal by default) mean.

    Invariant measures with ``int w = extreme mean`` are exactly the measures
    supported on the tight edges of these components.
    """
    signed = _signed(potential_vector(space, weights), maximize)
    value, potential = _karp(space, signed)
    tol = get_setting(settings, 'tolerances', 'eigen') * max(1.0, float(np.abs(signed).max()))
    return _components(_tight_graph(space, signed, value, potential, tol))


def mean_cycle(space: ShiftSpace, weights, maximize: bool = False, settings=None) -> CycleExtreme:
    """Minimum (or maximum) mean cycle with a simple witness cycle.

    Returns:
        CycleExtreme: ``value`` is the exact mean of the witness cycle,
        ``karp_value`` the value from Karp's recurrence.
    """
    values = potential_vector(space, weights)
    signed = _signed(values, maximize)
    karp_value, potential = _karp(space, signed)
    tol = get_setting(settings, 'tolerances', 'eigen') * max(1.0, float(np.abs(signed).max()))
    graph = _tight_graph(space, signed, karp_value, potential, tol)
    component = _components(graph)[0]
    edges = nx.find_cycle(graph.subgraph(component.symbols), source=component.symbols[0])
    witness = Word(_canonical(a for a, _ in edges))
    mean = witness.mean(values)
    karp_value = -karp_value if maximize else karp_value
    if abs(mean - karp_value) > tol:
        logger.warning(f"Witness cycle mean {mean:.15g} differs from Karp value {karp_value:.15g}")
    return CycleExtreme(mean, witness, karp_value)


def enumerate_cycles(space: ShiftSpace, max_len: int, guard=None) -> List[Word]:
    """All simple cycles of length at most ``max_len`` in canonical rotation."""
    guard = guard if guard is not None else get_setting(None, 'solver', 'enumeration_guard')
    graph = nx.DiGraph()
    graph.add_nodes_from(range(space.symbol_count))
    graph.add_edges_from((int(a), int(b)) for a, b in zip(*np.nonzero(space.transitions)))
    cycles = []
    for cycle in nx.simple_cycles(graph, length_bound=max_len):
        cycles.append(Word(_canonical(cycle)))
        if len(cycles) > guard:
            raise EnumerationGuardError(f"More than {guard} simple cycles of length <= {max_len}")
    cycles.sort(key=lambda w: (len(w), w.symbols))
    logger.debug(f"Enumerated {len(cycles)} simple cycles up to length {max_len}")
    return cycles
