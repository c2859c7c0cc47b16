"""Measurement graphs, weight assignments, and the derived-matrix pipeline.

Node ids are 1-based in the public API: basic nodes occupy 1..n_basic and
reference nodes n_basic+1..n.  Matrix rows/columns are node id minus one.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import GraphError

Edge = tuple[int, int]


@dataclass(frozen=True)
class NodePartition:
    """Split of the node set into estimating (basic) and reference nodes."""

    n_basic: int
    n_reference: int

    def __post_init__(self) -> None:
        if self.n_basic < 1:
            raise GraphError("need at least one basic node")
        if self.n_reference < 1:
            raise GraphError("need at least one reference node, estimation is indeterminate otherwise")

    @property
    def n(self) -> int:
        return self.n_basic + self.n_reference

    def is_basic(self, node: int) -> bool:
        return 1 <= node <= self.n_basic

    @property
    def basic_nodes(self) -> range:
        return range(1, self.n_basic + 1)

    @property
    def reference_nodes(self) -> range:
        return range(self.n_basic + 1, self.n + 1)


def _canonical_edge(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class MeasurementGraph:
    """Undirected graph whose edges carry relative measurements."""

    partition: NodePartition
    edges: frozenset[Edge] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        canon = set()
        for u, v in self.edges:
            if u == v:
                raise GraphError(f"self-loop on node {u}")
            if not (1 <= u <= self.partition.n and 1 <= v <= self.partition.n):
                raise GraphError(f"edge ({u},{v}) outside node range 1..{self.partition.n}")
            canon.add(_canonical_edge(u, v))
        object.__setattr__(self, "edges", frozenset(canon))

    @classmethod
    def from_edges(cls, partition: NodePartition, edges: Iterable[Sequence[int]]) -> "MeasurementGraph":
        return cls(partition, frozenset((int(u), int(v)) for u, v in edges))

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def neighbors(self, node: int) -> list[int]:
        out = []
        for u, v in self.edges:
            if u == node:
                out.append(v)
            elif v == node:
                out.append(u)
        return sorted(out)

    def has_edge(self, u: int, v: int) -> bool:
        return _canonical_edge(u, v) in self.edges


def union_graph(graphs: Sequence[MeasurementGraph]) -> MeasurementGraph:
    """Graph whose edge set is the union over all inputs."""
    if not graphs:
        raise GraphError("union of an empty graph collection is undefined")
    partition = graphs[0].partition
    edges: set[Edge] = set()
    for g in graphs:
        if g.partition != partition:
            raise GraphError("union requires a common node partition")
        edges |= g.edges
    return MeasurementGraph(partition, frozenset(edges))


def is_connected(g: MeasurementGraph) -> bool:
    """True iff every node is reachable from node 1 over undirected edges."""
    n = g.partition.n
    adj: list[list[int]] = [[] for _ in range(n + 1)]
    for u, v in g.edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = [False] * (n + 1)
    seen[1] = True
    queue = deque([1])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return all(seen[1:])


@dataclass(frozen=True)
class WeightAssignment:
    """Dense weight matrix bound to a measurement graph.

    Entry (u, v) holds the weight node u applies to the information arriving
    from neighbor v; the diagonal holds each node's self weight.  Off-diagonal
    entries must be positive exactly on the edges of the bound graph.
    """

    matrix: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.matrix, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise GraphError("weight matrix must be square")
        if np.any(w < 0):
            raise GraphError("weights must be nonnegative")
        if np.any(np.diag(w) <= 0):
            raise GraphError("self weights must be strictly positive")
        object.__setattr__(self, "matrix", w)

    @classmethod
    def unit(cls, g: MeasurementGraph) -> "WeightAssignment":
        """All self and edge weights equal to one."""
        n = g.partition.n
        w = np.eye(n)
        for u, v in g.edges:
            w[u - 1, v - 1] = 1.0
            w[v - 1, u - 1] = 1.0
        return cls(w)

    def check_bound(self, g: MeasurementGraph) -> None:
        """Raise unless the sparsity pattern matches the graph's edges."""
        n = g.partition.n
        if self.matrix.shape[0] != n:
            raise GraphError(f"weight matrix is {self.matrix.shape[0]}x{self.matrix.shape[0]}, graph has {n} nodes")
        for u in range(1, n + 1):
            for v in range(u + 1, n + 1):
                on_edge = g.has_edge(u, v)
                for a, b in ((u, v), (v, u)):
                    positive = self.matrix[a - 1, b - 1] > 0
                    if positive != on_edge:
                        raise GraphError(f"weight sparsity mismatch at ({a},{b}): edge={on_edge}")


def noise_column(u: int, v: int, n: int) -> int:
    """Column of the stacked per-node noise layout owned by pair (u, v).

    Blocks are ordered by basic node u; inside a block the columns run over
    v = 1..n skipping v = u.  Indices are 1-based node ids.
    """
    if u == v:
        raise GraphError("noise coordinates are defined for distinct nodes only")
    offset = v - 1 if v < u else v - 2
    return (u - 1) * (n - 1) + offset


@dataclass(frozen=True)
class DerivedMatrices:
    """Matrices induced by one (graph, weights) pair.

    ``update_full`` is the n x n averaging matrix of the estimator update;
    ``update_basic`` its principal submatrix over basic nodes.  ``noise_gain``
    maps the stacked measurement-noise vector (length n_b*(n-1), layout per
    :func:`noise_column`) into the basic-node update.
    """

    self_weight: np.ndarray       # diagonal matrix of self weights
    neighbor_weight: np.ndarray   # off-diagonal weights (zero diagonal)
    neighbor_total: np.ndarray    # diagonal matrix of per-node neighbor weight sums
    self_weight_basic: np.ndarray
    neighbor_weight_basic: np.ndarray
    neighbor_total_basic: np.ndarray
    update_full: np.ndarray
    update_basic: np.ndarray
    noise_rows: np.ndarray        # block-diagonal neighbor-weight rows
    noise_gain: np.ndarray


def derive_matrices(g: MeasurementGraph, w: WeightAssignment) -> DerivedMatrices:
    """Run the full pipeline from a bound weight matrix to update/noise matrices."""
    w.check_bound(g)
    n = g.partition.n
    nb = g.partition.n_basic
    mat = w.matrix
    diag = np.diag(mat).copy()
    neighbor = mat - np.diag(diag)
    totals = neighbor.sum(axis=1)

    denom = totals + diag
    update_full = (neighbor + np.diag(diag)) / denom[:, None]

    nbr_b = neighbor[:nb, :nb]
    diag_b = diag[:nb]
    denom_b = denom[:nb]
    update_basic = (nbr_b + np.diag(diag_b)) / denom_b[:, None]

    noise_rows = np.zeros((nb, nb * (n - 1)))
    for u in range(nb):
        row = np.delete(neighbor[u], u)
        noise_rows[u, u * (n - 1):(u + 1) * (n - 1)] = row
    noise_gain = noise_rows / denom_b[:, None]

    return DerivedMatrices(
        self_weight=np.diag(diag),
        neighbor_weight=neighbor,
        neighbor_total=np.diag(totals),
        self_weight_basic=np.diag(diag_b),
        neighbor_weight_basic=nbr_b,
        neighbor_total_basic=np.diag(totals[:nb]),
        update_full=update_full,
        update_basic=update_basic,
        noise_rows=noise_rows,
        noise_gain=noise_gain,
    )


def full_update_matrix(g: MeasurementGraph, w: WeightAssignment) -> np.ndarray:
    """The row-stochastic n x n averaging matrix over all nodes."""
    return derive_matrices(g, w).update_full
