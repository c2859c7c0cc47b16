"""Node motion models and range-based graph generation with random link failure."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _backends
from .errors import DimensionError
from .graphs import Edge, MeasurementGraph, NodePartition

UNIT_NORM_TOL = 1e-12


def project_to_sphere(x: np.ndarray) -> np.ndarray:
    """Normalize rows to unit length."""
    x = np.asarray(x, dtype=float)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return x / norms


@dataclass(frozen=True)
class SphereWalkState:
    """Positions on the unit sphere driven by projected white-noise steps."""

    positions: np.ndarray        # (n, 3), unit rows
    step_noise_sigma: float

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise DimensionError("sphere positions must be (n, 3)")
        if np.max(np.abs(np.linalg.norm(pos, axis=1) - 1.0)) > UNIT_NORM_TOL:
            raise DimensionError("sphere positions must have unit norm")
        if self.step_noise_sigma < 0:
            raise DimensionError("noise sigma must be nonnegative")
        object.__setattr__(self, "positions", pos)

    @classmethod
    def random(cls, n: int, step_noise_sigma: float, rng: np.random.Generator) -> "SphereWalkState":
        raw = rng.standard_normal((n, 3))
        return cls(project_to_sphere(raw), step_noise_sigma)


def sphere_step(state: SphereWalkState, rng: np.random.Generator) -> SphereWalkState:
    """Perturb every node independently and project back to the sphere."""
    if state.step_noise_sigma == 0.0:
        return state
    moved = state.positions + state.step_noise_sigma * rng.standard_normal(state.positions.shape)
    norms = np.linalg.norm(moved, axis=1)
    while np.any(norms == 0.0):
        # a zero vector cannot be projected; redraw those perturbations
        bad = norms == 0.0
        moved[bad] = state.positions[bad] + state.step_noise_sigma * rng.standard_normal((int(bad.sum()), 3))
        norms = np.linalg.norm(moved, axis=1)
    return SphereWalkState(moved / norms[:, None], state.step_noise_sigma)


@dataclass(frozen=True)
class RwpParams:
    """Random-waypoint parameters: region (m), speed band (m/s), pause (s), tick (s)."""

    width: float
    height: float
    v_min: float
    v_max: float
    t_p: float
    dt: float = 1.0

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise DimensionError("region sides must be positive")
        if not 0 < self.v_min <= self.v_max:
            raise DimensionError("need 0 < v_min <= v_max")
        if self.t_p < 0 or self.dt < 0:
            raise DimensionError("pause time and tick must be nonnegative")


@dataclass(frozen=True)
class RwpState:
    """Random-waypoint walkers: paused ones sit out their timer, movers head to a destination."""

    params: RwpParams
    positions: np.ndarray      # (n, 2)
    destinations: np.ndarray   # (n, 2), meaningful while moving
    speeds: np.ndarray         # (n,)
    pause_left: np.ndarray     # (n,)
    moving: np.ndarray         # (n,) uint8

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=float)
        p = self.params
        if np.any(pos[:, 0] < 0) or np.any(pos[:, 0] > p.width) \
                or np.any(pos[:, 1] < 0) or np.any(pos[:, 1] > p.height):
            raise DimensionError("positions must lie inside the region")

    @classmethod
    def initialize(cls, n: int, params: RwpParams, rng: np.random.Generator) -> "RwpState":
        """Uniform initial positions; every node starts with a full pause."""
        pos = np.column_stack([rng.uniform(0.0, params.width, n),
                               rng.uniform(0.0, params.height, n)])
        return cls(params=params, positions=pos, destinations=pos.copy(),
                   speeds=np.full(n, params.v_min), pause_left=np.full(n, params.t_p),
                   moving=np.zeros(n, dtype=np.uint8))

    @property
    def n(self) -> int:
        return self.positions.shape[0]


def rwp_step(state: RwpState, rng: np.random.Generator) -> RwpState:
    """Advance all walkers by one tick; see the kernel for the leg-by-leg rules."""
    pos = np.ascontiguousarray(state.positions.copy())
    dest = np.ascontiguousarray(state.destinations.copy())
    speed = np.ascontiguousarray(state.speeds.copy())
    pause = np.ascontiguousarray(state.pause_left.copy())
    moving = np.ascontiguousarray(state.moving.copy())
    p = state.params
    _backends.rwp_advance(pos, dest, speed, pause, moving,
                          p.dt, p.t_p, p.v_min, p.v_max, p.width, p.height, rng)
    return RwpState(params=p, positions=pos, destinations=dest, speeds=speed,
                    pause_left=pause, moving=moving)


@dataclass(frozen=True)
class ConnectivityRule:
    """Disk connectivity with i.i.d. link failure.

    Distance is Euclidean for planar positions and great-circle (geodesic)
    for unit-sphere positions.
    """

    comm_range: float
    link_fail_prob: float = 0.0

    def __post_init__(self) -> None:
        if self.comm_range <= 0:
            raise DimensionError("communication range must be positive")
        if not 0.0 <= self.link_fail_prob <= 1.0:
            raise DimensionError("link failure probability must be in [0, 1]")


def _pairwise_distances(positions: np.ndarray) -> np.ndarray:
    pos = np.asarray(positions, dtype=float)
    if pos.shape[1] == 3:
        dots = np.clip(pos @ pos.T, -1.0, 1.0)
        return np.arccos(dots)
    diff = pos[:, None, :] - pos[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def graph_from_positions(positions: np.ndarray, rule: ConnectivityRule,
                         partition: NodePartition,
                         rng: np.random.Generator | None = None) -> MeasurementGraph:
    """Edges between nodes within range, each dropped independently with the failure probability.

    Candidate pairs are visited in lexicographic order and each consumes
    exactly one uniform draw, so replays align.
    """
    pos = np.asarray(positions, dtype=float)
    if pos.shape[0] != partition.n:
        raise DimensionError(f"{pos.shape[0]} positions for {partition.n} nodes")
    dist = _pairwise_distances(pos)
    iu, ju = np.triu_indices(partition.n, k=1)
    in_range = dist[iu, ju] <= rule.comm_range
    cand_i, cand_j = iu[in_range], ju[in_range]
    if rule.link_fail_prob > 0.0:
        if rng is None:
            raise DimensionError("link failure needs an RNG")
        keep = rng.random(len(cand_i)) >= rule.link_fail_prob
        cand_i, cand_j = cand_i[keep], cand_j[keep]
    edges = frozenset((int(i) + 1, int(j) + 1) for i, j in zip(cand_i, cand_j))
    return MeasurementGraph(partition, edges)


class GraphProcess:
    """Trajectory driver: emits the current graph, then moves the nodes.

    The per-call draw order is fixed (link failures first, then motion), so a
    seeded generator replays the exact graph sequence.
    """

    def __init__(self, state: SphereWalkState | RwpState, rule: ConnectivityRule,
                 partition: NodePartition):
        if state.positions.shape[0] != partition.n:
            raise DimensionError("mobility state and partition disagree on node count")
        self.state = state
        self.rule = rule
        self.partition = partition

    def advance(self, rng: np.random.Generator) -> MeasurementGraph:
        g = graph_from_positions(self.state.positions, self.rule, self.partition, rng)
        if isinstance(self.state, RwpState):
            self.state = rwp_step(self.state, rng)
        else:
            self.state = sphere_step(self.state, rng)
        return g


def record_graph_sequence(model: SphereWalkState | RwpState, rule: ConnectivityRule,
                          steps: int, rng: np.random.Generator,
                          partition: NodePartition | None = None) -> list[MeasurementGraph]:
    """Step the motion model and capture the induced graph at every tick."""
    if partition is None:
        partition = NodePartition(n_basic=model.positions.shape[0] - 1, n_reference=1)
    process = GraphProcess(model, rule, partition)
    return [process.advance(rng) for _ in range(steps)]


def graph_symbol(g: MeasurementGraph) -> tuple[Edge, ...]:
    """Canonical identity of a graph for order testing: its sorted edge list."""
    return tuple(g.sorted_edges())


def positions_rows(history: Sequence[np.ndarray]):
    """Long-format rows (k, node, coordinates...) for position trace export."""
    for k, pos in enumerate(history):
        for node in range(pos.shape[0]):
            yield (k, node + 1, *pos[node])
