"""Homogeneous Markov chain over graph states: validation, stationary law, sampling."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from math import gcd
from typing import Sequence

import numpy as np

from .errors import ChainError
from .graphs import MeasurementGraph, WeightAssignment, is_connected, union_graph

ROW_SUM_TOL = 1e-12
STATIONARY_TOL = 1e-10
_POWER_ITERATION_CUTOFF = 500


@dataclass(frozen=True)
class TopologyChain:
    """Graph state space plus transition matrix plus per-state weights."""

    states: tuple[MeasurementGraph, ...]
    transition: np.ndarray
    weight_sets: tuple[WeightAssignment, ...]

    def __post_init__(self) -> None:
        p = np.asarray(self.transition, dtype=float)
        n_states = len(self.states)
        if n_states == 0:
            raise ChainError("chain needs at least one graph state")
        if p.shape != (n_states, n_states):
            raise ChainError(f"transition matrix shape {p.shape} does not match {n_states} states")
        if np.any(p < 0):
            raise ChainError("transition probabilities must be nonnegative")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise ChainError("transition matrix rows must sum to one")
        partition = self.states[0].partition
        for g in self.states:
            if g.partition != partition:
                raise ChainError("all graph states must share one node partition")
        if len(self.weight_sets) != n_states:
            raise ChainError("need one weight assignment per graph state")
        for g, w in zip(self.states, self.weight_sets):
            w.check_bound(g)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "weight_sets", tuple(self.weight_sets))

    @classmethod
    def with_unit_weights(cls, states: Sequence[MeasurementGraph], transition: np.ndarray) -> "TopologyChain":
        return cls(tuple(states), np.asarray(transition, dtype=float),
                   tuple(WeightAssignment.unit(g) for g in states))

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def partition(self):
        return self.states[0].partition

    def union(self) -> MeasurementGraph:
        return union_graph(self.states)


@dataclass(frozen=True)
class ValidationReport:
    """Flags for the hypotheses the convergence theory relies on."""

    row_stochastic: bool
    irreducible: bool
    aperiodic: bool
    positive_diagonal: bool
    union_connected: bool

    @property
    def ergodic(self) -> bool:
        return self.irreducible and self.aperiodic

    @property
    def all_hypotheses(self) -> bool:
        return self.row_stochastic and self.ergodic and self.positive_diagonal and self.union_connected

    def as_dict(self) -> dict:
        return {
            "row_stochastic": self.row_stochastic,
            "irreducible": self.irreducible,
            "aperiodic": self.aperiodic,
            "ergodic": self.ergodic,
            "positive_diagonal": self.positive_diagonal,
            "union_connected": self.union_connected,
        }


def _support_adjacency(p: np.ndarray) -> list[list[int]]:
    n = p.shape[0]
    return [[j for j in range(n) if p[i, j] > 0] for i in range(n)]


def _reachable(adj: list[list[int]], start: int) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def _is_strongly_connected(p: np.ndarray) -> bool:
    n = p.shape[0]
    if n == 1:
        return True
    fwd = _support_adjacency(p)
    bwd = _support_adjacency(p.T)
    return len(_reachable(fwd, 0)) == n and len(_reachable(bwd, 0)) == n


def _strongly_connected_components(p: np.ndarray) -> list[list[int]]:
    # Kosaraju: order by finish time on the forward graph, then sweep the reverse.
    n = p.shape[0]
    fwd = _support_adjacency(p)
    bwd = _support_adjacency(p.T)
    visited = [False] * n
    order: list[int] = []
    for root in range(n):
        if visited[root]:
            continue
        stack = [(root, iter(fwd[root]))]
        visited[root] = True
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if not visited[nxt]:
                    visited[nxt] = True
                    stack.append((nxt, iter(fwd[nxt])))
                    advanced = True
                    break
            if not advanced:
                order.append(node)
                stack.pop()
    comps: list[list[int]] = []
    assigned = [False] * n
    for node in reversed(order):
        if assigned[node]:
            continue
        comp = [node]
        assigned[node] = True
        queue = deque([node])
        while queue:
            u = queue.popleft()
            for v in bwd[u]:
                if not assigned[v]:
                    assigned[v] = True
                    comp.append(v)
                    queue.append(v)
        comps.append(comp)
    return comps


def _component_period(p: np.ndarray, comp: list[int]) -> int:
    """Period of one strongly connected component (0 if it has no internal edge)."""
    comp_set = set(comp)
    root = comp[0]
    level = {root: 0}
    queue = deque([root])
    period = 0
    while queue:
        u = queue.popleft()
        for v in range(p.shape[1]):
            if p[u, v] <= 0 or v not in comp_set:
                continue
            if v in level:
                period = gcd(period, level[u] + 1 - level[v])
            else:
                level[v] = level[u] + 1
                queue.append(v)
    return abs(period)


def _is_aperiodic(p: np.ndarray) -> bool:
    for comp in _strongly_connected_components(p):
        period = _component_period(p, comp)
        if period > 1:
            return False
    return True


def validate_chain(chain: TopologyChain) -> ValidationReport:
    """Check the chain against the hypotheses of the convergence theory.

    Non-stochastic rows are impossible here (the constructor rejects them);
    every other failure is reported as a flag rather than an error so the
    caller decides whether analysis may proceed.
    """
    p = chain.transition
    return ValidationReport(
        row_stochastic=bool(np.all(np.abs(p.sum(axis=1) - 1.0) <= ROW_SUM_TOL)),
        irreducible=_is_strongly_connected(p),
        aperiodic=_is_aperiodic(p),
        positive_diagonal=bool(np.all(np.diag(p) > 0)),
        union_connected=is_connected(chain.union()),
    )


def is_ergodic(p: np.ndarray) -> bool:
    p = np.asarray(p, dtype=float)
    return _is_strongly_connected(p) and _is_aperiodic(p)


def stationary_distribution(p: np.ndarray) -> np.ndarray:
    """Unique invariant probability vector of an ergodic transition matrix."""
    p = np.asarray(p, dtype=float)
    n = p.shape[0]
    if not is_ergodic(p):
        raise ChainError("stationary distribution requires an ergodic chain")
    if n == 1:
        return np.array([1.0])
    if n <= _POWER_ITERATION_CUTOFF:
        # (P^T - I) pi = 0 with a normalization row appended.
        a = np.vstack([p.T - np.eye(n), np.ones((1, n))])
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    else:
        pi = np.full(n, 1.0 / n)
        for _ in range(100_000):
            nxt = pi @ p
            if np.max(np.abs(nxt - pi)) < 1e-14:
                pi = nxt
                break
            pi = nxt
    pi = np.where(np.abs(pi) < 1e-15, 0.0, pi)
    if np.any(pi < -STATIONARY_TOL):
        raise ChainError("stationary solve produced negative probabilities")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    if np.max(np.abs(pi @ p - pi)) > STATIONARY_TOL:
        raise ChainError("stationary solve did not converge")
    return pi


def sample_path(chain: TopologyChain, length: int, initial, rng: np.random.Generator) -> np.ndarray:
    """Sample state indices theta(0..length-1); indices are 0-based.

    ``initial`` is a state index or the string ``"stationary"``, in which case
    theta(0) is drawn from the stationary distribution (consuming one draw).
    """
    n = chain.n_states
    p = chain.transition
    if isinstance(initial, str):
        if initial != "stationary":
            raise ChainError(f"unknown initial state spec {initial!r}")
        pi = stationary_distribution(p)
        start = int(np.searchsorted(np.cumsum(pi), rng.random(), side="right"))
        start = min(start, n - 1)
    else:
        start = int(initial)
        if not 0 <= start < n:
            raise ChainError(f"initial state {start} outside 0..{n - 1}")
    out = np.empty(length, dtype=np.int64)
    if length == 0:
        return out
    out[0] = start
    cum = np.cumsum(p, axis=1)
    draws = rng.random(length - 1)
    cur = start
    for k in range(1, length):
        cur = int(np.searchsorted(cum[cur], draws[k - 1], side="right"))
        if cur >= n:
            cur = n - 1
        out[k] = cur
    return out
