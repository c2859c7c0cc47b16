"""The distributed update law, measurement generation, and scenario traces.

Each basic node repeatedly replaces its estimate by a weighted average of its
own estimate and every current neighbor's estimate shifted by the shared
relative measurement; reference nodes keep their known values.  Running this
over a switching graph sequence yields the error traces analyzed in
:mod:`relsync.analysis`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import _backends
from .chains import TopologyChain, sample_path
from .errors import DimensionError, MeasurementError
from .graphs import (
    Edge,
    MeasurementGraph,
    NodePartition,
    WeightAssignment,
    noise_column,
)

__all__ = [
    "EdgeNoise",
    "NoiseModel",
    "MeasurementSet",
    "EstimatorState",
    "TraceRecord",
    "generate_measurements",
    "update_step",
    "apply_async_mask",
    "run_scenario",
    "run_dynamic_scenario",
]


@dataclass(frozen=True)
class EdgeNoise:
    """Gaussian spec for the canonical (lower-index node's) measurement noise."""

    mean: float = 0.0
    std: float = 0.0


@dataclass(frozen=True)
class NoiseModel:
    """Per-edge noise specs plus the stacked first/second moments.

    The stacked noise vector has one coordinate per (basic node u, other node
    v) pair, laid out per :func:`relsync.graphs.noise_column`.  Mirrored
    coordinates carry the same draw with opposite sign, so they are perfectly
    anticorrelated.  Pairs that never occur as edges multiply zero columns of
    the noise-gain matrices; their moments are immaterial placeholders.
    """

    partition: NodePartition
    default: EdgeNoise = field(default_factory=EdgeNoise)
    overrides: Mapping[Edge, EdgeNoise] = field(default_factory=dict)

    def __post_init__(self) -> None:
        canon = {}
        for (u, v), spec in dict(self.overrides).items():
            if u == v:
                raise DimensionError("noise spec needs two distinct nodes")
            canon[(u, v) if u < v else (v, u)] = spec
        object.__setattr__(self, "overrides", canon)

    @classmethod
    def gaussian(cls, partition: NodePartition, mean: float = 0.0, std: float = 0.0) -> "NoiseModel":
        return cls(partition, EdgeNoise(mean, std))

    def spec_for(self, u: int, v: int) -> EdgeNoise:
        key = (u, v) if u < v else (v, u)
        return self.overrides.get(key, self.default)

    def draw(self, edges: Sequence[Edge], rng: np.random.Generator) -> np.ndarray:
        """Canonical noise draws, one per edge, in the given edge order."""
        if not edges:
            return np.empty(0)
        means = np.array([self.spec_for(u, v).mean for u, v in edges])
        stds = np.array([self.spec_for(u, v).std for u, v in edges])
        return rng.normal(means, stds)

    def _signed_indicator(self, u: int, v: int) -> np.ndarray:
        p = self.partition
        vec = np.zeros(p.n_basic * (p.n - 1))
        if p.is_basic(u):
            vec[noise_column(u, v, p.n)] = 1.0
        if p.is_basic(v):
            vec[noise_column(v, u, p.n)] = -1.0
        return vec

    def moments(self, pairs: Iterable[Edge]) -> tuple[np.ndarray, np.ndarray]:
        """Stacked mean vector and second-moment matrix over the given pairs.

        ``pairs`` should cover every edge occurring in any graph state; all
        other coordinates keep zero placeholder moments.
        """
        p = self.partition
        dim = p.n_basic * (p.n - 1)
        gamma = np.zeros(dim)
        cov = np.zeros((dim, dim))
        seen = set()
        for u, v in pairs:
            key = (u, v) if u < v else (v, u)
            if key in seen:
                continue
            seen.add(key)
            spec = self.spec_for(*key)
            vec = self._signed_indicator(*key)
            gamma += spec.mean * vec
            cov += spec.std ** 2 * np.outer(vec, vec)
        return gamma, np.outer(gamma, gamma) + cov


class MeasurementSet:
    """Antisymmetric map from ordered node pairs to shared measurements."""

    def __init__(self, canonical: Mapping[Edge, float]):
        values: dict[tuple[int, int], float] = {}
        for (u, v), z in canonical.items():
            if u == v:
                raise MeasurementError("measurement needs two distinct nodes")
            if u > v:
                u, v, z = v, u, -z
            values[(u, v)] = z
            values[(v, u)] = -z
        self._values = values

    def __getitem__(self, pair: tuple[int, int]) -> float:
        return self._values[pair]

    def __contains__(self, pair: tuple[int, int]) -> bool:
        return pair in self._values

    def __len__(self) -> int:
        return len(self._values) // 2

    def pairs(self) -> list[tuple[int, int]]:
        return sorted(self._values)


def generate_measurements(g: MeasurementGraph, x_true: np.ndarray, noise: NoiseModel,
                          rng: np.random.Generator) -> MeasurementSet:
    """Draw one round of relative measurements on the current edges.

    The lower-indexed endpoint obtains ``x_u - x_v + eps`` and shares it; the
    mirrored entry is the negation.
    """
    x = np.asarray(x_true, dtype=float)
    if x.shape != (g.partition.n,):
        raise DimensionError(f"x_true must have length {g.partition.n}")
    edges = g.sorted_edges()
    eps = noise.draw(edges, rng)
    return MeasurementSet({(u, v): x[u - 1] - x[v - 1] + e for (u, v), e in zip(edges, eps)})


@dataclass(frozen=True)
class EstimatorState:
    """Current estimates of all node variables; reference entries stay true."""

    x_hat: np.ndarray
    k: int = 0


def _neighbor_arrays(g: MeasurementGraph, w: WeightAssignment):
    """CSR-like arrays over basic rows for the update kernel (0-based)."""
    p = g.partition
    nb = p.n_basic
    indptr = np.zeros(nb + 1, dtype=np.int64)
    indices: list[int] = []
    weights: list[float] = []
    for u in range(1, nb + 1):
        nbrs = g.neighbors(u)
        indptr[u] = indptr[u - 1] + len(nbrs)
        indices.extend(v - 1 for v in nbrs)
        weights.extend(w.matrix[u - 1, v - 1] for v in nbrs)
    return (indptr, np.asarray(indices, dtype=np.int64), np.asarray(weights, dtype=float),
            np.ascontiguousarray(np.diag(w.matrix)[:nb]))


def update_step(state: EstimatorState, g: MeasurementGraph, w: WeightAssignment,
                m: MeasurementSet) -> EstimatorState:
    """Apply one synchronous update; nodes without neighbors keep their estimate."""
    w.check_bound(g)
    p = g.partition
    x_hat = np.asarray(state.x_hat, dtype=float)
    if x_hat.shape != (p.n,):
        raise DimensionError(f"estimate vector must have length {p.n}")
    indptr, indices, weights, self_w = _neighbor_arrays(g, w)
    zeta = np.empty(len(indices))
    pos = 0
    for u in range(1, p.n_basic + 1):
        for v in g.neighbors(u):
            if (u, v) not in m:
                raise MeasurementError(f"no measurement for edge ({u},{v})")
            zeta[pos] = m[(u, v)]
            pos += 1
    new_x = x_hat.copy()
    out = np.empty(p.n_basic)
    _backends.update_basic_estimates(
        np.ascontiguousarray(x_hat), self_w, indptr, indices,
        np.ascontiguousarray(weights), zeta, out)
    new_x[:p.n_basic] = out
    return EstimatorState(x_hat=new_x, k=state.k + 1)


def apply_async_mask(g: MeasurementGraph, active: Iterable[int]) -> MeasurementGraph:
    """Drop every edge touching an inactive node.

    Models nodes that gathered no new measurements during a global tick: their
    neighbor set becomes empty, so the update leaves their estimate unchanged.
    """
    active_set = set(active)
    kept = frozenset(e for e in g.edges if e[0] in active_set and e[1] in active_set)
    return MeasurementGraph(g.partition, kept)


@dataclass(frozen=True)
class TraceRecord:
    """Per-iteration estimates and basic-node errors of one scenario run."""

    estimates: np.ndarray   # (steps+1, n)
    errors: np.ndarray      # (steps+1, n_basic)
    modes: np.ndarray       # (steps,) chain state per step, -1 for dynamic graphs
    x_true: np.ndarray

    @property
    def steps(self) -> int:
        return self.estimates.shape[0] - 1

    @property
    def n_basic(self) -> int:
        return self.errors.shape[1]

    def iter_rows(self):
        """Long-format rows (k, node, estimate, error); node ids 1-based."""
        n = self.estimates.shape[1]
        for k in range(self.estimates.shape[0]):
            for node in range(1, n + 1):
                err = self.estimates[k, node - 1] - self.x_true[node - 1]
                yield k, node, self.estimates[k, node - 1], err

    def wide_rows(self):
        """One row per iteration: (k, estimates..., basic errors...)."""
        for k in range(self.estimates.shape[0]):
            yield (k, *self.estimates[k], *self.errors[k])


class _ModeKernel:
    """Precompiled per-mode arrays reused across steps and trials."""

    def __init__(self, g: MeasurementGraph, w: WeightAssignment, x_true: np.ndarray):
        self.edges = g.sorted_edges()
        edge_index = {e: i for i, e in enumerate(self.edges)}
        indptr, indices, weights, self_w = _neighbor_arrays(g, w)
        self.indptr, self.indices, self.weights, self.self_w = indptr, indices, weights, self_w
        nb = g.partition.n_basic
        rows = np.repeat(np.arange(nb), np.diff(indptr))
        self.base = x_true[rows] - x_true[indices] if len(indices) else np.empty(0)
        self.edge_ids = np.array(
            [edge_index[(min(u + 1, v + 1), max(u + 1, v + 1))] for u, v in zip(rows, indices)],
            dtype=np.int64)
        self.signs = np.where(rows < indices, 1.0, -1.0) if len(indices) else np.empty(0)


def _prepare_init(init, x_true: np.ndarray, partition: NodePartition) -> np.ndarray:
    x0 = np.array(init, dtype=float) if not np.isscalar(init) else np.full(partition.n, float(init))
    if x0.shape != (partition.n,):
        raise DimensionError(f"initial estimates must have length {partition.n}")
    x0[partition.n_basic:] = x_true[partition.n_basic:]
    return x0


def _run_kernel_loop(mode_kernels, thetas, noise, x_true, x0, partition, rng) -> TraceRecord:
    steps = len(thetas)
    n, nb = partition.n, partition.n_basic
    estimates = np.empty((steps + 1, n))
    estimates[0] = x0
    x_hat = np.ascontiguousarray(x0)
    out = np.empty(nb)
    for k in range(steps):
        mk = mode_kernels(k, thetas[k])
        eps = noise.draw(mk.edges, rng)
        zeta = mk.base + mk.signs * eps[mk.edge_ids] if len(mk.indices) else np.empty(0)
        _backends.update_basic_estimates(
            x_hat, mk.self_w, mk.indptr, mk.indices, mk.weights, zeta, out)
        x_hat = x_hat.copy()
        x_hat[:nb] = out
        estimates[k + 1] = x_hat
    errors = estimates[:, :nb] - x_true[:nb]
    return TraceRecord(estimates=estimates, errors=errors,
                       modes=np.asarray(thetas, dtype=np.int64), x_true=x_true.copy())


def run_scenario(chain: TopologyChain, noise: NoiseModel, x_true, init, steps: int,
                 rng, *, initial_state="stationary", k0: int = 0,
                 pre_k0_weight_sets: Sequence[WeightAssignment] | None = None) -> TraceRecord:
    """Simulate the estimator over a sampled switching sequence.

    The same generator drives (in order) the initial state draw, the state
    path, then the per-step measurement noise, so a fixed seed replays the
    exact run.  Weights may differ before iteration ``k0`` via an alternative
    per-mode weight list; from ``k0`` on each state uses its chain weights.
    """
    rng = np.random.default_rng(rng)
    partition = chain.partition
    x_true = np.asarray(x_true, dtype=float)
    if x_true.shape != (partition.n,):
        raise DimensionError(f"x_true must have length {partition.n}")
    if noise.partition != partition:
        raise DimensionError("noise model bound to a different partition")
    x0 = _prepare_init(init, x_true, partition)
    thetas = sample_path(chain, steps, initial_state, rng)

    main_kernels = [_ModeKernel(g, w, x_true) for g, w in zip(chain.states, chain.weight_sets)]
    if pre_k0_weight_sets is not None:
        early = [_ModeKernel(g, w, x_true) for g, w in zip(chain.states, pre_k0_weight_sets)]
    else:
        early = main_kernels

    def pick(k: int, theta: int) -> _ModeKernel:
        return early[theta] if k < k0 else main_kernels[theta]

    return _run_kernel_loop(pick, thetas, noise, x_true, x0, partition, rng)


def run_dynamic_scenario(next_graph: Callable[[np.random.Generator], MeasurementGraph],
                         noise: NoiseModel, x_true, init, steps: int, rng) -> TraceRecord:
    """Simulate over graphs produced on the fly (mobility-driven, unit weights).

    ``next_graph(rng)`` is called once per iteration and must consume draws
    deterministically; no topology chain or lifted analysis is involved.
    """
    rng = np.random.default_rng(rng)
    x_true = np.asarray(x_true, dtype=float)
    partition = noise.partition
    if x_true.shape != (partition.n,):
        raise DimensionError(f"x_true must have length {partition.n}")
    x0 = _prepare_init(init, x_true, partition)

    def kernels(k: int, theta: int) -> _ModeKernel:
        g = next_graph(rng)
        return _ModeKernel(g, WeightAssignment.unit(g), x_true)

    return _run_kernel_loop(kernels, np.full(steps, -1, dtype=np.int64), noise, x_true,
                            x0, partition, rng)
