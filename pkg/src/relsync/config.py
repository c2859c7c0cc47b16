"""Scenario configuration: JSON schema parsing and object construction.

One config file drives every CLI subcommand.  Top-level keys:

    partition        {"n_basic": int, "n_reference": int}
    x_true           list of n floats (omit when "clocks" is given)
    clocks           {"alpha_beta": [[a, b], ...], "channel": "skew"|"offset",
                      "noise": {"mean": m, "std"|"variance": v}}
    init             scalar or list of n floats (default 0.0)
    chain            {"states": [{"edges": [[u, v], ...]}, ...],
                      "transition": N x N rows, "initial": "stationary"|int,
                      "weights": "unit" | [n*n row-major per state],
                      "pre_k0": {"k0": int, "weights": ...}}
    mobility         {"model": "rwp", "region": [w, h], "v_min": .., "v_max": ..,
                      "t_p": .., "dt": .., "range": .., "link_fail_prob": ..}
                     or {"model": "sphere_walk", "sigma": .., "range": ..,
                         "link_fail_prob": ..}
    noise            {"mean": m, "std"|"variance": v} measurement noise per edge
    steps, trials, seed
    comparison_window   final fraction of iterations compared against theory
    order_test       {"input_graphs": path|null, "threshold": .., "band": ..}
    out_dir, dump_matrices, workers

Exactly one of "chain" and "mobility" must be present.  Node ids are 1-based
with reference nodes last; mode indices are 0-based.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .chains import TopologyChain
from .clocks import Clock, offset_bias
from .errors import ConfigError
from .estimator import EdgeNoise, NoiseModel
from .graphs import MeasurementGraph, NodePartition, WeightAssignment
from .mobility import ConnectivityRule, GraphProcess, RwpParams, RwpState, SphereWalkState

DEFAULT_COMPARISON_WINDOW = 0.1
DEFAULT_VAR_REL_TOL = 0.10


def _require(cfg: dict, key: str, context: str = "config"):
    if key not in cfg:
        raise ConfigError(f"{context} is missing required key {key!r}")
    return cfg[key]


def _noise_spec(raw: dict, context: str) -> EdgeNoise:
    mean = float(raw.get("mean", 0.0))
    if "std" in raw and "variance" in raw:
        raise ConfigError(f"{context}: give either 'std' or 'variance', not both")
    if "std" in raw:
        std = float(raw["std"])
    elif "variance" in raw:
        var = float(raw["variance"])
        if var < 0:
            raise ConfigError(f"{context}: variance must be nonnegative")
        std = math.sqrt(var)
    else:
        std = 0.0
    if std < 0:
        raise ConfigError(f"{context}: std must be nonnegative")
    return EdgeNoise(mean=mean, std=std)


@dataclass(frozen=True)
class ClockSpec:
    clocks: tuple[Clock, ...]
    channel: str
    pair_noise: EdgeNoise


@dataclass(frozen=True)
class MobilitySpec:
    model: str
    rule: ConnectivityRule
    rwp: RwpParams | None = None
    sphere_sigma: float | None = None

    def start(self, n: int, rng: np.random.Generator):
        if self.model == "rwp":
            return RwpState.initialize(n, self.rwp, rng)
        return SphereWalkState.random(n, self.sphere_sigma, rng)


@dataclass(frozen=True)
class OrderTestSpec:
    input_graphs: str | None = None
    threshold: float = 0.1
    band: float = 0.2
    steps: int | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario inputs; see the module docstring for the file schema."""

    partition: NodePartition
    x_true: np.ndarray
    init: np.ndarray
    noise: NoiseModel
    steps: int
    trials: int
    seed: int
    chain: TopologyChain | None = None
    chain_initial: Any = "stationary"
    pre_k0: tuple[int, tuple[WeightAssignment, ...]] | None = None
    mobility: MobilitySpec | None = None
    clocks: ClockSpec | None = None
    comparison_window: float = DEFAULT_COMPARISON_WINDOW
    var_rel_tol: float = DEFAULT_VAR_REL_TOL
    order_test: OrderTestSpec = field(default_factory=OrderTestSpec)
    out_dir: str | None = None
    dump_matrices: bool = False
    workers: int = 1

    def graph_process(self, rng: np.random.Generator) -> GraphProcess:
        if self.mobility is None:
            raise ConfigError("scenario has no mobility section")
        state = self.mobility.start(self.partition.n, rng)
        return GraphProcess(state, self.mobility.rule, self.partition)

    def trial_rng(self, trial: int) -> np.random.Generator:
        """Per-trial generator: child seed = SeedSequence([seed, trial])."""
        return np.random.default_rng(np.random.SeedSequence([self.seed, trial]))


def _parse_weight_sets(raw, states: list[MeasurementGraph], n: int,
                       context: str) -> tuple[WeightAssignment, ...]:
    if raw == "unit" or raw is None:
        return tuple(WeightAssignment.unit(g) for g in states)
    if not isinstance(raw, list) or len(raw) != len(states):
        raise ConfigError(f"{context}: weights must be 'unit' or one row-major {n}x{n} matrix per state")
    out = []
    for idx, entry in enumerate(raw):
        arr = np.asarray(entry, dtype=float)
        if arr.size != n * n:
            raise ConfigError(f"{context}: weight matrix {idx} has {arr.size} entries, expected {n * n}")
        out.append(WeightAssignment(arr.reshape(n, n)))
    return tuple(out)


def _parse_chain(raw: dict, partition: NodePartition):
    states_raw = _require(raw, "states", "chain")
    states = []
    for idx, s in enumerate(states_raw):
        edges = s.get("edges", []) if isinstance(s, dict) else s
        try:
            states.append(MeasurementGraph.from_edges(partition, edges))
        except Exception as exc:
            raise ConfigError(f"chain state {idx}: {exc}") from exc
    transition = np.asarray(_require(raw, "transition", "chain"), dtype=float)
    weights = _parse_weight_sets(raw.get("weights"), states, partition.n, "chain")
    try:
        chain = TopologyChain(tuple(states), transition, weights)
    except Exception as exc:
        raise ConfigError(f"chain: {exc}") from exc
    initial = raw.get("initial", "stationary")
    if not (initial == "stationary" or isinstance(initial, int)):
        raise ConfigError("chain.initial must be 'stationary' or a 0-based state index")
    pre_k0 = None
    if "pre_k0" in raw:
        sub = raw["pre_k0"]
        k0 = int(_require(sub, "k0", "chain.pre_k0"))
        pre_w = _parse_weight_sets(_require(sub, "weights", "chain.pre_k0"),
                                   states, partition.n, "chain.pre_k0")
        pre_k0 = (k0, pre_w)
    return chain, initial, pre_k0


def _parse_mobility(raw: dict) -> MobilitySpec:
    model = raw.get("model", "rwp")
    rule = ConnectivityRule(comm_range=float(_require(raw, "range", "mobility")),
                            link_fail_prob=float(raw.get("link_fail_prob", 0.0)))
    if model == "rwp":
        region = _require(raw, "region", "mobility")
        params = RwpParams(width=float(region[0]), height=float(region[1]),
                           v_min=float(_require(raw, "v_min", "mobility")),
                           v_max=float(_require(raw, "v_max", "mobility")),
                           t_p=float(_require(raw, "t_p", "mobility")),
                           dt=float(raw.get("dt", 1.0)))
        return MobilitySpec(model="rwp", rule=rule, rwp=params)
    if model == "sphere_walk":
        return MobilitySpec(model="sphere_walk", rule=rule,
                            sphere_sigma=float(_require(raw, "sigma", "mobility")))
    raise ConfigError(f"unknown mobility model {model!r}")


def _clock_noise_model(partition: NodePartition, spec: ClockSpec) -> NoiseModel:
    if spec.channel == "skew":
        return NoiseModel(partition, spec.pair_noise)
    overrides = {}
    for u in range(1, partition.n + 1):
        for v in range(u + 1, partition.n + 1):
            bias = offset_bias(spec.clocks[u - 1], spec.clocks[v - 1])
            overrides[(u, v)] = EdgeNoise(mean=bias + spec.pair_noise.mean,
                                          std=spec.pair_noise.std)
    return NoiseModel(partition, spec.pair_noise, overrides)


def clock_node_variables(spec: ClockSpec) -> np.ndarray:
    if spec.channel == "skew":
        return np.array([math.log(c.alpha) for c in spec.clocks])
    return np.array([c.beta for c in spec.clocks])


def parse_config(raw: dict) -> ScenarioConfig:
    """Validate a parsed JSON document into a ScenarioConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    part_raw = _require(raw, "partition")
    try:
        partition = NodePartition(n_basic=int(_require(part_raw, "n_basic", "partition")),
                                  n_reference=int(_require(part_raw, "n_reference", "partition")))
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"partition: {exc}") from exc
    n = partition.n

    clocks = None
    if "clocks" in raw:
        craw = raw["clocks"]
        pairs = _require(craw, "alpha_beta", "clocks")
        if len(pairs) != n:
            raise ConfigError(f"clocks.alpha_beta has {len(pairs)} entries for {n} nodes")
        channel = craw.get("channel", "skew")
        if channel not in ("skew", "offset"):
            raise ConfigError("clocks.channel must be 'skew' or 'offset'")
        try:
            clock_objs = tuple(Clock(float(a), float(b)) for a, b in pairs)
        except Exception as exc:
            raise ConfigError(f"clocks: {exc}") from exc
        clocks = ClockSpec(clocks=clock_objs, channel=channel,
                           pair_noise=_noise_spec(craw.get("noise", {}), "clocks.noise"))
        if "x_true" in raw:
            raise ConfigError("give either x_true or clocks, not both")
        if "noise" in raw:
            raise ConfigError("clock scenarios take their noise from clocks.noise")
        x_true = clock_node_variables(clocks)
        noise = _clock_noise_model(partition, clocks)
    else:
        x_true = np.asarray(_require(raw, "x_true"), dtype=float)
        if x_true.shape != (n,):
            raise ConfigError(f"x_true must list {n} values")
        noise = NoiseModel(partition, _noise_spec(raw.get("noise", {}), "noise"))

    init_raw = raw.get("init", 0.0)
    if isinstance(init_raw, (int, float)):
        init = np.full(n, float(init_raw))
    else:
        init = np.asarray(init_raw, dtype=float)
        if init.shape != (n,):
            raise ConfigError(f"init must be a scalar or list {n} values")

    has_chain, has_mobility = "chain" in raw, "mobility" in raw
    if has_chain == has_mobility:
        raise ConfigError("config needs exactly one of 'chain' or 'mobility'")
    chain = chain_initial = pre_k0 = mobility = None
    if has_chain:
        chain, chain_initial, pre_k0 = _parse_chain(raw["chain"], partition)
    else:
        chain_initial = "stationary"
        mobility = _parse_mobility(raw["mobility"])

    steps = int(_require(raw, "steps"))
    trials = int(raw.get("trials", 1))
    if steps < 1 or trials < 1:
        raise ConfigError("steps and trials must be at least 1")
    if "seed" not in raw:
        raise ConfigError("seed is required for replayable runs")
    seed = int(raw["seed"])

    window = float(raw.get("comparison_window", DEFAULT_COMPARISON_WINDOW))
    if not 0.0 < window <= 1.0:
        raise ConfigError("comparison_window must be in (0, 1]")

    ot_raw = raw.get("order_test", {})
    order_test = OrderTestSpec(
        input_graphs=ot_raw.get("input_graphs"),
        threshold=float(ot_raw.get("threshold", 0.1)),
        band=float(ot_raw.get("band", 0.2)),
        steps=int(ot_raw["steps"]) if "steps" in ot_raw else None,
    )

    return ScenarioConfig(
        partition=partition, x_true=x_true, init=init, noise=noise,
        steps=steps, trials=trials, seed=seed,
        chain=chain, chain_initial=chain_initial, pre_k0=pre_k0,
        mobility=mobility, clocks=clocks,
        comparison_window=window,
        var_rel_tol=float(raw.get("var_rel_tol", DEFAULT_VAR_REL_TOL)),
        order_test=order_test,
        out_dir=raw.get("out_dir"),
        dump_matrices=bool(raw.get("dump_matrices", False)),
        workers=int(raw.get("workers", 1)),
    )


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(raw)
