"""Exception hierarchy shared across the package."""


class RelsyncError(Exception):
    """Base class for all package errors."""


class GraphError(RelsyncError):
    """Invalid graph, partition, or weight assignment."""


class ChainError(RelsyncError):
    """Invalid topology chain (non-stochastic rows, bad state index, ...)."""


class DimensionError(RelsyncError):
    """Inconsistent dimensions between scenario pieces."""


class MeasurementError(RelsyncError):
    """Measurement set inconsistent with the current graph."""


class ConfigError(RelsyncError):
    """Malformed scenario configuration."""


class AnalysisError(RelsyncError):
    """Analytic pipeline failure (non-ergodic chain, singular solve, ...)."""


class LiftedSizeError(AnalysisError):
    """Lifted operators would exceed the configured size cap.

    Raised instead of silently building huge matrices; the scenario can
    still be studied through the simulation-only workflow.
    """
