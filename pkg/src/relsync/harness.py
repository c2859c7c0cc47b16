"""Monte Carlo aggregation, theory-vs-simulation comparison, and file output.

Trials are independent scenario runs seeded from the master seed by a counter
scheme (trial i uses SeedSequence([seed, i])).  Aggregation accumulates in
trial-index order regardless of which worker finishes first, so reports are
byte-identical for any worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analysis import JumpSystem, is_ms_convergent, steady_state
from .config import ScenarioConfig
from .errors import AnalysisError, LiftedSizeError
from .estimator import TraceRecord, run_dynamic_scenario, run_scenario
from .graphs import MeasurementGraph, NodePartition
from .chains import validate_chain


@dataclass(frozen=True)
class ComparisonReport:
    """Aggregate Monte Carlo statistics with analytic limits when available."""

    trials: int
    steps: int
    seed: int
    mean_trace: np.ndarray            # (steps+1, n_basic)
    var_trace: np.ndarray | None      # None when trials == 1
    max_abs_error: float
    window_start: int
    empirical_mean_final: np.ndarray
    empirical_se_final: np.ndarray | None
    empirical_var_final: np.ndarray | None
    rho: float | None = None
    union_connected: bool | None = None
    ms_convergent: bool | None = None
    mu: np.ndarray | None = None
    q_diag: np.ndarray | None = None
    var_limit: np.ndarray | None = None
    rel_dev: np.ndarray | None = None
    mean_within_3se: bool | None = None
    var_within_tol: bool | None = None
    var_rel_tol: float | None = None
    validation: dict | None = None
    analysis_note: str | None = None

    def summary_dict(self) -> dict:
        def arr(x):
            return None if x is None else [float(v) for v in np.asarray(x).ravel()]

        return {
            "trials": self.trials,
            "steps": self.steps,
            "seed": self.seed,
            "window_start": self.window_start,
            "max_abs_error": self.max_abs_error,
            "rho_Db": self.rho,
            "union_connected": self.union_connected,
            "ms_convergent": self.ms_convergent,
            "mu": arr(self.mu),
            "q_diag": arr(self.q_diag),
            "var_limit": arr(self.var_limit),
            "empirical_mean_final": arr(self.empirical_mean_final),
            "empirical_se_final": arr(self.empirical_se_final),
            "empirical_var_final": arr(self.empirical_var_final),
            "rel_dev": arr(self.rel_dev),
            "mean_within_3se": self.mean_within_3se,
            "var_within_tol": self.var_within_tol,
            "var_rel_tol": self.var_rel_tol,
            "validation": self.validation,
            "analysis_note": self.analysis_note,
        }


def run_single_trial(cfg: ScenarioConfig, trial: int) -> TraceRecord:
    """One scenario run with the trial's derived seed."""
    rng = cfg.trial_rng(trial)
    if cfg.chain is not None:
        kwargs = {}
        if cfg.pre_k0 is not None:
            kwargs = {"k0": cfg.pre_k0[0], "pre_k0_weight_sets": cfg.pre_k0[1]}
        return run_scenario(cfg.chain, cfg.noise, cfg.x_true, cfg.init, cfg.steps, rng,
                            initial_state=cfg.chain_initial, **kwargs)
    process = cfg.graph_process(rng)
    return run_dynamic_scenario(process.advance, cfg.noise, cfg.x_true, cfg.init,
                                cfg.steps, rng)


def _analytics(cfg: ScenarioConfig):
    """Analytic limits for the comparison, or a note saying why there are none."""
    if cfg.chain is None:
        return None, None, None, "simulation-only: graphs are mobility-driven"
    validation = validate_chain(cfg.chain).as_dict()
    try:
        sys = JumpSystem.from_chain(cfg.chain, cfg.noise)
    except AnalysisError as exc:
        return None, validation, None, f"analysis unavailable: {exc}"
    try:
        cert = is_ms_convergent(sys)
    except LiftedSizeError as exc:
        return None, validation, None, f"simulation-only: {exc}"
    if not cert.convergent:
        return cert, validation, None, "no steady state: not mean-square convergent"
    return cert, validation, steady_state(sys), None


def run_montecarlo(cfg: ScenarioConfig, workers: int | None = None) -> ComparisonReport:
    """Run cfg.trials independent scenarios and compare against the theory."""
    trials, steps = cfg.trials, cfg.steps
    nb = cfg.partition.n_basic
    sum_e = np.zeros((steps + 1, nb))
    sum_sq = np.zeros((steps + 1, nb))
    max_abs = 0.0

    n_workers = max(1, workers if workers is not None else cfg.workers)

    def reduce(trace: TraceRecord) -> None:
        nonlocal max_abs
        sum_e_local = trace.errors
        sum_e += sum_e_local
        sum_sq += sum_e_local ** 2
        max_abs = max(max_abs, float(np.max(np.abs(sum_e_local))))

    if n_workers == 1:
        for t in range(trials):
            reduce(run_single_trial(cfg, t))
    else:
        window = 2 * n_workers
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            pending = {}
            next_reduce = 0
            for t in range(trials):
                pending[t] = pool.submit(run_single_trial, cfg, t)
                while len(pending) >= window:
                    reduce(pending.pop(next_reduce).result())
                    next_reduce += 1
            while next_reduce in pending:
                reduce(pending.pop(next_reduce).result())
                next_reduce += 1

    mean_trace = sum_e / trials
    if trials > 1:
        var_trace = (sum_sq - trials * mean_trace ** 2) / (trials - 1)
        var_trace = np.clip(var_trace, 0.0, None)
    else:
        var_trace = None

    window_start = min(steps, max(0, int(np.ceil((steps + 1) * (1.0 - cfg.comparison_window)))))
    emp_mean = mean_trace[-1].copy()
    if var_trace is not None:
        emp_se = np.sqrt(var_trace[-1] / trials)
        emp_var = var_trace[window_start:].mean(axis=0)
    else:
        emp_se = emp_var = None

    cert, validation, limits, note = _analytics(cfg)
    rho = cert.rho if cert is not None else None
    union_connected = cert.union_connected if cert is not None else None
    convergent = cert.convergent if cert is not None else None
    mu = q_diag = var_limit = rel_dev = None
    mean_ok = var_ok = None
    if limits is not None:
        mu = limits.mean
        q_diag = np.diag(limits.corr)
        var_limit = limits.var_limit
        if emp_se is not None:
            mean_ok = bool(np.all(np.abs(emp_mean - mu) <= 3.0 * emp_se))
            denom = np.where(var_limit > 0, var_limit, 1.0)
            rel_dev = np.abs(emp_var - var_limit) / denom
            var_ok = bool(np.all(rel_dev <= cfg.var_rel_tol))

    return ComparisonReport(
        trials=trials, steps=steps, seed=cfg.seed,
        mean_trace=mean_trace, var_trace=var_trace, max_abs_error=max_abs,
        window_start=window_start,
        empirical_mean_final=emp_mean, empirical_se_final=emp_se,
        empirical_var_final=emp_var,
        rho=rho, union_connected=union_connected, ms_convergent=convergent,
        mu=mu, q_diag=q_diag, var_limit=var_limit, rel_dev=rel_dev,
        mean_within_3se=mean_ok, var_within_tol=var_ok,
        var_rel_tol=cfg.var_rel_tol if limits is not None else None,
        validation=validation, analysis_note=note,
    )


def write_trace_csv(path: str | Path, trace: TraceRecord) -> None:
    """Long-format trace: one row per (iteration, node)."""
    lines = ["k,node,estimate,error"]
    for k, node, est, err in trace.iter_rows():
        lines.append(f"{k},{node},{est!r},{err!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_wide_trace_csv(path: str | Path, trace: TraceRecord) -> None:
    """One row per iteration: k, all estimates, then all basic errors."""
    n = trace.estimates.shape[1]
    nb = trace.n_basic
    header = (["k"] + [f"xhat_{i}" for i in range(1, n + 1)]
              + [f"err_{i}" for i in range(1, nb + 1)])
    lines = [",".join(header)]
    for row in trace.wide_rows():
        k, rest = row[0], row[1:]
        lines.append(f"{k}," + ",".join(repr(v) for v in rest))
    Path(path).write_text("\n".join(lines) + "\n")


def write_stats_csv(path: str | Path, report: ComparisonReport) -> None:
    """Per-iteration cross-trial mean (and variance when trials > 1)."""
    nb = report.mean_trace.shape[1]
    with_var = report.var_trace is not None
    header = "k,node,mean_error,var_error" if with_var else "k,node,mean_error"
    lines = [header]
    for k in range(report.mean_trace.shape[0]):
        for u in range(nb):
            if with_var:
                lines.append(f"{k},{u + 1},{report.mean_trace[k, u]!r},{report.var_trace[k, u]!r}")
            else:
                lines.append(f"{k},{u + 1},{report.mean_trace[k, u]!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_summary_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_graph_sequence(path: str | Path, graphs: Iterable[MeasurementGraph]) -> None:
    """One line per step: space-separated u-v tokens, or '-' for an edgeless step."""
    lines = []
    for g in graphs:
        edges = g.sorted_edges()
        lines.append(" ".join(f"{u}-{v}" for u, v in edges) if edges else "-")
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph_sequence(path: str | Path, partition: NodePartition) -> list[MeasurementGraph]:
    """Inverse of :func:`write_graph_sequence`."""
    graphs = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line == "-":
            graphs.append(MeasurementGraph(partition, frozenset()))
            continue
        edges = []
        for token in line.split():
            u, _, v = token.partition("-")
            edges.append((int(u), int(v)))
        graphs.append(MeasurementGraph.from_edges(partition, edges))
    return graphs


def write_positions_csv(path: str | Path, history: Sequence[np.ndarray]) -> None:
    """Long-format position trace: k, node, then one column per coordinate."""
    if not history:
        Path(path).write_text("k,node\n")
        return
    dims = history[0].shape[1]
    coord_names = ["x", "y", "z"][:dims]
    lines = ["k,node," + ",".join(coord_names)]
    for k, pos in enumerate(history):
        for node in range(pos.shape[0]):
            coords = ",".join(repr(float(c)) for c in pos[node])
            lines.append(f"{k},{node + 1},{coords}")
    Path(path).write_text("\n".join(lines) + "\n")
