"""Distributed estimation from relative measurements on switching networks.

Simulates and analyzes a weighted-averaging estimator for scalar node
variables (clock log-skews and offsets in the time-sync instantiation)
measured pairwise over a graph that switches according to a Markov chain.
Provides the mean-square convergence test, the limiting mean/correlation,
mobility-driven graph generation, and an entropy-based Markov-order test.
"""

from ._backends import available_backends, backend_name
from .analysis import (
    ConvergenceCertificate,
    JumpSystem,
    LiftedOperators,
    PropertyReport,
    SteadyState,
    build_lifted,
    is_ms_convergent,
    spectral_radius,
    steady_state,
    verify_structural_properties,
)
from .chains import (
    TopologyChain,
    ValidationReport,
    sample_path,
    stationary_distribution,
    validate_chain,
)
from .clocks import (
    Clock,
    global_time_estimate,
    local_time,
    offset_measurement,
    recover_clock,
    relative_params,
    skew_measurement,
)
from .errors import (
    AnalysisError,
    ChainError,
    ConfigError,
    DimensionError,
    GraphError,
    LiftedSizeError,
    MeasurementError,
    RelsyncError,
)
from .estimator import (
    EdgeNoise,
    EstimatorState,
    MeasurementSet,
    NoiseModel,
    TraceRecord,
    apply_async_mask,
    generate_measurements,
    run_dynamic_scenario,
    run_scenario,
    update_step,
)
from .graphs import (
    DerivedMatrices,
    MeasurementGraph,
    NodePartition,
    WeightAssignment,
    derive_matrices,
    full_update_matrix,
    is_connected,
    noise_column,
    union_graph,
)
from .mobility import (
    ConnectivityRule,
    GraphProcess,
    RwpParams,
    RwpState,
    SphereWalkState,
    graph_from_positions,
    graph_symbol,
    record_graph_sequence,
    rwp_step,
    sphere_step,
)
from .ordertest import (
    EntropyProfile,
    OrderVerdict,
    classify_graph_sequence,
    classify_order,
    empirical_profile,
    entropy,
)

__version__ = "0.1.0"
