"""Affine clock model and its reduction to scalar relative-measurement problems.

A clock reads ``tau = alpha * t + beta`` against global time t.  Estimating
all skews and offsets reduces to two independent scalar problems: node
variables ``log(alpha)`` with log-skew measurements, and node variables
``beta`` with offset measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DimensionError


@dataclass(frozen=True)
class Clock:
    """Skew/offset pair; skew must be positive so its log is defined."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise DimensionError(f"clock skew must be positive, got {self.alpha}")


def local_time(c: Clock, t: float) -> float:
    return c.alpha * t + c.beta


def global_time_estimate(c_hat: Clock, tau: float) -> float:
    """Invert the clock map using estimated parameters."""
    return (tau - c_hat.beta) / c_hat.alpha


def relative_params(u: Clock, v: Clock) -> tuple[float, float]:
    """(alpha_uv, beta_uv) with tau_u = alpha_uv * tau_v + beta_uv for all t."""
    ratio = u.alpha / v.alpha
    return ratio, u.beta - v.beta * ratio


def skew_measurement(u: Clock, v: Clock, eps_s: float) -> float:
    """Noisy relative log-skew: log(alpha_u) - log(alpha_v) + eps_s."""
    return math.log(u.alpha) - math.log(v.alpha) + eps_s


def offset_bias(u: Clock, v: Clock) -> float:
    """Structural bias of the offset channel: beta_v * (1 - alpha_u / alpha_v).

    Present even when the pairwise estimate of the relative offset is
    unbiased, because relative offset differs from the offset difference
    whenever the skews differ.
    """
    return v.beta * (1.0 - u.alpha / v.alpha)


def offset_measurement(u: Clock, v: Clock, e_o: float) -> float:
    """Noisy relative offset: beta_u - beta_v + (structural bias + e_o)."""
    return u.beta - v.beta + offset_bias(u, v) + e_o


def recover_clock(x_s_hat: float, x_o_hat: float) -> Clock:
    """Map node-variable estimates (log-skew, offset) back to a clock."""
    return Clock(alpha=math.exp(x_s_hat), beta=x_o_hat)
