"""Mode-coupled operator construction, mean-square convergence test, and limits.

The error dynamics form a jump linear system: per chain state i the basic
errors propagate through ``update_basic`` (call it U_i) and the stacked noise
enters through ``noise_gain`` (G_i).  Convergence of mean and correlation is
governed by mode-coupled transfer operators whose (i, j) block is
``p_ji * X_j`` with X_j = U_j for the mean and X_j = U_j (x) U_j for the
correlation.  The spectral radius of the basic correlation operator below one
is equivalent to mean-square convergence, and equivalent in turn to
connectivity of the union graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chains import (
    TopologyChain,
    ValidationReport,
    _is_strongly_connected,
    stationary_distribution,
    validate_chain,
)
from .errors import AnalysisError, LiftedSizeError
from .estimator import NoiseModel
from .graphs import derive_matrices, is_connected

DEFAULT_SIZE_CAP = 10_000
RHO_MARGIN = 1e-8
_DENSE_EIG_CUTOFF = 2000


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product (thin wrapper so call sites stay grep-able)."""
    return np.kron(a, b)


def stack_columns(m: np.ndarray) -> np.ndarray:
    """Stack the columns of one matrix into a tall vector."""
    return np.asarray(m, dtype=float).flatten(order="F")


def stack_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Concatenate the column-stacked vectors of an N-sequence of matrices."""
    return np.concatenate([stack_columns(m) for m in mats])


def unstack_all(vec: np.ndarray, shape: tuple[int, int]) -> tuple[np.ndarray, ...]:
    """Exact inverse of :func:`stack_all` for matrices of a common shape."""
    rows, cols = shape
    block = rows * cols
    vec = np.asarray(vec, dtype=float)
    if block == 0 or len(vec) % block:
        raise AnalysisError(f"vector of length {len(vec)} does not split into {shape} blocks")
    count = len(vec) // block
    return tuple(vec[i * block:(i + 1) * block].reshape(shape, order="F") for i in range(count))


def _mode_coupled(p: np.ndarray, blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Assemble the operator whose (i, j) block is p_ji * blocks[j]."""
    m = blocks[0].shape[0]
    n_states = len(blocks)
    out = np.zeros((n_states * m, n_states * m))
    for i in range(n_states):
        for j in range(n_states):
            if p[j, i] != 0.0:
                out[i * m:(i + 1) * m, j * m:(j + 1) * m] = p[j, i] * blocks[j]
    return out


@dataclass(frozen=True)
class LiftedOperators:
    """Mode-coupled transfer operators for mean and correlation recursions.

    ``corr_transfer`` acts on stacked per-mode correlation matrices of the
    basic errors; its spectral radius below one is the convergence test.  The
    full-network variants are built only when they fit the size cap (they are
    needed by the structural property checks, not by the steady state).
    """

    update_sq_basic: tuple[np.ndarray, ...]
    corr_transfer: np.ndarray
    mean_transfer: np.ndarray
    update_sq_full: tuple[np.ndarray, ...] | None
    corr_transfer_full: np.ndarray | None


def build_lifted(chain: TopologyChain, size_cap: int = DEFAULT_SIZE_CAP) -> LiftedOperators:
    """Build the lifted operators, refusing sizes beyond ``size_cap``."""
    p = chain.transition
    part = chain.partition
    n, nb, n_states = part.n, part.n_basic, chain.n_states
    if n_states * nb * nb > size_cap:
        raise LiftedSizeError(
            f"lifted operator dimension {n_states}*{nb}^2 = {n_states * nb * nb} exceeds the cap "
            f"of {size_cap}; use the simulation-only workflow for this scenario")
    derived = [derive_matrices(g, w) for g, w in zip(chain.states, chain.weight_sets)]
    upd_basic = [d.update_basic for d in derived]
    sq_basic = tuple(kron(u, u) for u in upd_basic)
    corr = _mode_coupled(p, sq_basic)
    mean = _mode_coupled(p, upd_basic)
    if n_states * n * n <= size_cap:
        sq_full = tuple(kron(d.update_full, d.update_full) for d in derived)
        corr_full = _mode_coupled(p, sq_full)
    else:
        sq_full, corr_full = None, None
    return LiftedOperators(update_sq_basic=sq_basic, corr_transfer=corr, mean_transfer=mean,
                           update_sq_full=sq_full, corr_transfer_full=corr_full)


def spectral_radius(a: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Spectral radius of a nonnegative matrix.

    Dense eigenvalues up to :data:`_DENSE_EIG_CUTOFF`; power iteration beyond
    (a strictly positive start vector keeps reducible cases from stalling on a
    deficient block).
    """
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise AnalysisError("spectral_radius expects a nonnegative matrix")
    if a.shape[0] <= _DENSE_EIG_CUTOFF:
        return float(np.max(np.abs(np.linalg.eigvals(a))))
    x = np.ones(a.shape[0])
    x /= np.linalg.norm(x)
    estimate = 0.0
    for _ in range(max_iter):
        y = a @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        new_estimate = norm
        x = y / norm
        if abs(new_estimate - estimate) <= tol * max(1.0, new_estimate):
            return float(new_estimate)
        estimate = new_estimate
    raise AnalysisError(f"power iteration did not converge within {max_iter} iterations")


@dataclass(frozen=True)
class JumpSystem:
    """Per-mode error dynamics plus chain and noise moments."""

    chain: TopologyChain
    update_basic: tuple[np.ndarray, ...]
    noise_gain: tuple[np.ndarray, ...]
    pi: np.ndarray
    gamma: np.ndarray
    second_moment: np.ndarray
    validation: ValidationReport

    @classmethod
    def from_chain(cls, chain: TopologyChain, noise: NoiseModel) -> "JumpSystem":
        if noise.partition != chain.partition:
            raise AnalysisError("noise model bound to a different partition")
        report = validate_chain(chain)
        if not report.ergodic:
            raise AnalysisError("jump-system analysis requires an ergodic chain")
        pi = stationary_distribution(chain.transition)
        derived = [derive_matrices(g, w) for g, w in zip(chain.states, chain.weight_sets)]
        pairs = set(chain.union().edges) | set(noise.overrides)
        gamma, second = noise.moments(pairs)
        return cls(chain=chain,
                   update_basic=tuple(d.update_basic for d in derived),
                   noise_gain=tuple(d.noise_gain for d in derived),
                   pi=pi, gamma=gamma, second_moment=second, validation=report)

    @property
    def n_states(self) -> int:
        return self.chain.n_states

    def lifted(self, size_cap: int = DEFAULT_SIZE_CAP) -> LiftedOperators:
        return build_lifted(self.chain, size_cap)


@dataclass(frozen=True)
class ConvergenceCertificate:
    """Outcome of the mean-square convergence test."""

    convergent: bool
    rho: float
    union_connected: bool
    margin: float

    def as_dict(self) -> dict:
        return {"ms_convergent": self.convergent, "rho_Db": self.rho,
                "union_connected": self.union_connected, "rho_margin": self.margin}


def is_ms_convergent(sys: JumpSystem, margin: float = RHO_MARGIN,
                     size_cap: int = DEFAULT_SIZE_CAP) -> ConvergenceCertificate:
    """Spectral-radius test for mean-square convergence of the error dynamics.

    Under the theory's hypotheses the test must agree with union-graph
    connectivity; a disagreement indicates a broken build and raises.
    """
    rho = spectral_radius(sys.lifted(size_cap).corr_transfer)
    union_connected = is_connected(sys.chain.union())
    convergent = rho < 1.0 - margin
    if sys.validation.ergodic and sys.validation.positive_diagonal:
        if convergent != union_connected:
            raise AnalysisError(
                f"convergence criteria disagree: rho={rho!r} vs union_connected={union_connected}")
    return ConvergenceCertificate(convergent=convergent, rho=float(rho),
                                  union_connected=union_connected, margin=margin)


@dataclass(frozen=True)
class SteadyState:
    """Limiting mean and correlation of the basic-node errors."""

    mean: np.ndarray                      # length n_b
    corr: np.ndarray                      # n_b x n_b, symmetric PSD
    mode_means: tuple[np.ndarray, ...]
    mode_corrs: tuple[np.ndarray, ...]
    drive_mean: np.ndarray                # stacked per-mode mean forcing

    @property
    def var_limit(self) -> np.ndarray:
        """Per-node limiting variance: corr diagonal minus squared mean."""
        return np.diag(self.corr) - self.mean ** 2


def steady_state(sys: JumpSystem, size_cap: int = DEFAULT_SIZE_CAP) -> SteadyState:
    """Closed-form limits of the error mean and correlation.

    Valid only when the convergence test passes; the mode-wise recursions for
    the probability-weighted conditional mean and correlation are solved as
    linear fixed points through the mode-coupled transfer operators.
    """
    cert = is_ms_convergent(sys, size_cap=size_cap)
    if not cert.convergent:
        raise AnalysisError(f"no steady state: spectral radius {cert.rho} is not below one")
    lifted = sys.lifted(size_cap)
    p = sys.chain.transition
    pi, gamma, second = sys.pi, sys.gamma, sys.second_moment
    n_states = sys.n_states
    nb = sys.chain.partition.n_basic

    psi = np.concatenate([
        sum(p[i, j] * pi[i] * (sys.noise_gain[i] @ gamma) for i in range(n_states))
        for j in range(n_states)])
    eye_mean = np.eye(n_states * nb)
    try:
        q = np.linalg.solve(eye_mean - lifted.mean_transfer, psi)
    except np.linalg.LinAlgError as exc:
        raise AnalysisError(
            f"singular mean fixed point despite rho={cert.rho}; "
            f"cond={np.linalg.cond(eye_mean - lifted.mean_transfer):.3e}") from exc
    mode_means = tuple(q[j * nb:(j + 1) * nb] for j in range(n_states))

    def r_block(j: int) -> np.ndarray:
        total = np.zeros((nb, nb))
        for i in range(n_states):
            if p[i, j] == 0.0:
                continue
            gain = sys.noise_gain[i]
            cross = sys.update_basic[i] @ np.outer(mode_means[i], gamma) @ gain.T
            total += p[i, j] * (gain @ second @ gain.T * pi[i] + cross + cross.T)
        return total

    r_stacked = stack_all([r_block(j) for j in range(n_states)])
    eye_corr = np.eye(n_states * nb * nb)
    try:
        q_corr = np.linalg.solve(eye_corr - lifted.corr_transfer, r_stacked)
    except np.linalg.LinAlgError as exc:
        raise AnalysisError(
            f"singular correlation fixed point despite rho={cert.rho}; "
            f"cond={np.linalg.cond(eye_corr - lifted.corr_transfer):.3e}") from exc
    mode_corrs = unstack_all(q_corr, (nb, nb))

    mean = np.sum(mode_means, axis=0)
    corr = np.sum(mode_corrs, axis=0)
    corr = 0.5 * (corr + corr.T)
    min_eig = float(np.min(np.linalg.eigvalsh(corr))) if nb else 0.0
    if min_eig < -1e-9:
        raise AnalysisError(f"limiting correlation not PSD (min eigenvalue {min_eig:.3e})")
    return SteadyState(mean=mean, corr=corr, mode_means=mode_means,
                       mode_corrs=mode_corrs, drive_mean=psi)


@dataclass(frozen=True)
class PropertyReport:
    """Numeric checks of the structural facts behind the convergence proof."""

    update_row_sum_dev: float        # full averaging matrices vs row sum one
    update_sq_row_sum_dev: float
    rho_full: float
    rho_basic: float
    union_connected: bool
    basic_strictly_smaller: bool | None   # rho_basic < rho_full, when union connected
    support_strongly_connected: bool
    validation: ValidationReport

    @property
    def irreducibility_matches_union(self) -> bool:
        return self.support_strongly_connected == self.union_connected

    def as_dict(self) -> dict:
        return {
            "update_row_sum_dev": self.update_row_sum_dev,
            "update_sq_row_sum_dev": self.update_sq_row_sum_dev,
            "rho_full": self.rho_full,
            "rho_basic": self.rho_basic,
            "union_connected": self.union_connected,
            "basic_strictly_smaller": self.basic_strictly_smaller,
            "support_strongly_connected": self.support_strongly_connected,
            "irreducibility_matches_union": self.irreducibility_matches_union,
            "validation": self.validation.as_dict(),
        }


def verify_structural_properties(chain: TopologyChain,
                                 size_cap: int = DEFAULT_SIZE_CAP) -> PropertyReport:
    """Check row-stochasticity, spectral bounds, and the irreducibility link."""
    lifted = build_lifted(chain, size_cap)
    if lifted.corr_transfer_full is None:
        raise LiftedSizeError("full-network operators exceed the size cap")
    derived = [derive_matrices(g, w) for g, w in zip(chain.states, chain.weight_sets)]
    upd_dev = max(float(np.max(np.abs(d.update_full.sum(axis=1) - 1.0))) for d in derived)
    sq_dev = max(float(np.max(np.abs(f.sum(axis=1) - 1.0))) for f in lifted.update_sq_full)
    rho_full = spectral_radius(lifted.corr_transfer_full)
    rho_basic = spectral_radius(lifted.corr_transfer)
    union_connected = is_connected(chain.union())
    strict = bool(rho_basic < rho_full) if union_connected else None
    support_sc = _is_strongly_connected(lifted.corr_transfer_full)
    return PropertyReport(update_row_sum_dev=upd_dev, update_sq_row_sum_dev=sq_dev,
                          rho_full=rho_full, rho_basic=rho_basic,
                          union_connected=union_connected, basic_strictly_smaller=strict,
                          support_strongly_connected=support_sc,
                          validation=validate_chain(chain))
