"""Empirical conditional-entropy test for the order of a switching process.

The profile H0 = log(alphabet), H1 = H(X_k), H2 = H(X_k, X_k+1) - H(X_k),
H3 = H(triple) - H(double) measures how much each additional conditioning
symbol reduces uncertainty.  A flat profile means independent draws, a single
sharp drop after H1 means first-order dependence, two drops second-order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError
from .graphs import MeasurementGraph
from .mobility import graph_symbol

DEFAULT_DROP_THRESHOLD = 0.1
DEFAULT_INDETERMINATE_BAND = 0.2


def entropy(pmf: Sequence[float], base: float | None = None) -> float:
    """Shannon entropy with the 0 * log 0 = 0 convention; natural log by default."""
    p = np.asarray(pmf, dtype=float)
    if np.any(p < -1e-12):
        raise DimensionError("probabilities must be nonnegative")
    if abs(p.sum() - 1.0) > 1e-9:
        raise DimensionError(f"probabilities sum to {p.sum()}, not 1")
    p = p[p > 0]
    h = float(-(p * np.log(p)).sum())
    if base is not None:
        h /= math.log(base)
    return h


@dataclass(frozen=True)
class EntropyProfile:
    """The H0..H3 sequence plus the observed alphabet size."""

    h0: float
    h1: float
    h2: float
    h3: float
    n_states: int

    def values(self) -> tuple[float, float, float, float]:
        return (self.h0, self.h1, self.h2, self.h3)

    def drops(self) -> tuple[float, float]:
        """Relative uncertainty reductions ((H1-H2)/H0, (H2-H3)/H0)."""
        if self.h0 == 0.0:
            return (0.0, 0.0)
        return ((self.h1 - self.h2) / self.h0, (self.h2 - self.h3) / self.h0)


_DENSE_COUNT_CAP = 50_000_000


def _window_entropy(codes: np.ndarray, n_symbols: int, window: int) -> float:
    """Entropy of the empirical joint pmf over sliding windows of given length."""
    if n_symbols ** window <= _DENSE_COUNT_CAP:
        flat = codes[: len(codes) - window + 1].copy()
        for offset in range(1, window):
            flat = flat * n_symbols + codes[offset: len(codes) - window + 1 + offset]
        counts = np.bincount(flat)
        counts = counts[counts > 0]
    else:
        # alphabet too large for dense counting; hash the windows instead
        from collections import Counter
        tallies = Counter(zip(*(codes[o: len(codes) - window + 1 + o] for o in range(window))))
        counts = np.fromiter(tallies.values(), dtype=np.int64)
    return entropy(counts / counts.sum())


def encode_symbols(seq: Sequence) -> np.ndarray:
    """Integer codes in order of first appearance; symbols just need to hash."""
    table: dict = {}
    codes = np.empty(len(seq), dtype=np.int64)
    for i, sym in enumerate(seq):
        codes[i] = table.setdefault(sym, len(table))
    return codes


def empirical_profile(seq: Sequence) -> EntropyProfile:
    """Estimate the profile from one observed symbol sequence.

    Joint events never observed contribute probability zero.  H0 uses the
    number of distinct symbols actually observed.
    """
    if len(seq) < 3:
        raise DimensionError("need at least three observations")
    codes = encode_symbols(seq)
    n_sym = int(codes.max()) + 1
    h1 = _window_entropy(codes, n_sym, 1)
    h_double = _window_entropy(codes, n_sym, 2)
    h_triple = _window_entropy(codes, n_sym, 3)
    return EntropyProfile(h0=math.log(n_sym), h1=h1, h2=h_double - h1,
                          h3=h_triple - h_double, n_states=n_sym)


@dataclass(frozen=True)
class OrderVerdict:
    """Classified order; ``order`` is None when too close to the threshold to call."""

    order: int | None
    drops: tuple[float, float]
    threshold: float

    @property
    def label(self) -> str:
        return "inconclusive" if self.order is None else str(self.order)


def classify_order(profile: EntropyProfile,
                   rel_threshold: float = DEFAULT_DROP_THRESHOLD,
                   indeterminate_band: float = DEFAULT_INDETERMINATE_BAND) -> OrderVerdict:
    """Turn the profile shape into an order verdict.

    A drop counts when it exceeds ``rel_threshold`` of H0; drops within
    ``indeterminate_band`` (relative) of the threshold make the verdict
    inconclusive rather than forcing a side.
    """
    d1, d2 = profile.drops()
    lo = rel_threshold * (1.0 - indeterminate_band)
    hi = rel_threshold * (1.0 + indeterminate_band)
    if any(lo < d < hi for d in (d1, d2)):
        return OrderVerdict(order=None, drops=(d1, d2), threshold=rel_threshold)
    if d2 >= hi:
        order = 2
    elif d1 >= hi:
        order = 1
    else:
        order = 0
    return OrderVerdict(order=order, drops=(d1, d2), threshold=rel_threshold)


def classify_graph_sequence(graphs: Sequence[MeasurementGraph],
                            rel_threshold: float = DEFAULT_DROP_THRESHOLD,
                            indeterminate_band: float = DEFAULT_INDETERMINATE_BAND
                            ) -> OrderVerdict:
    """Canonicalize graphs to symbols and classify the switching order."""
    profile = empirical_profile(graph_sequence_symbols(graphs))
    return classify_order(profile, rel_threshold, indeterminate_band)


def graph_sequence_symbols(graphs: Sequence[MeasurementGraph]) -> list[tuple]:
    """Map each graph to its canonical symbol (sorted edge tuple)."""
    return [graph_symbol(g) for g in graphs]
