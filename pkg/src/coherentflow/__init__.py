"""Coherent set detection from trajectory snapshots, with an online
time-averaged operator estimator, clustering validation tools, and a
coherence-aware waypoint planner for flow-borne vehicles.
"""

__version__ = "0.1.0"

from .advection import (
    Ensemble,
    IntegratorConfig,
    advance,
    integrate_ensemble,
    read_ensemble_bin,
    read_ensemble_csv,
    write_ensemble_bin,
    write_ensemble_csv,
)
from .cluster import Labeling, align_labels, consensus, kmeans
from .detection import (
    CoherentSetDetector,
    OnlineCoherentSetDetector,
    detect_per_step,
)
from .exceptions import (
    CoherentFlowError,
    ComplexSpectrumError,
    ConfigError,
    IngestError,
    IntegrationError,
    OperatorError,
)
from .flows import (
    BickleyParams,
    Domain,
    DoubleGyreParams,
    SingleGyreParams,
    bickley_velocity,
    double_gyre_velocity,
    make_flow,
    seed_grid,
    single_gyre_velocity,
)
from .kernels import KernelSpec, eval_kernel, gram, median_heuristic
from .metrics import (
    ScoreReport,
    adjusted_rand,
    evaluate_run,
    format_score_table,
    ground_truth,
    homogeneity_completeness_v,
    report_to_json,
)
from .operators import (
    OperatorConfig,
    OperatorState,
    SpectralResult,
    assemble_online_operator,
    detect_coherent_sets,
    dominant_eigens,
    online_update,
    surrogate_matrix,
)
from .planning import (
    MissionResult,
    Plan,
    RegionMask,
    VehicleParams,
    extract_region,
    naive_controller,
    plan_waypoints,
    simulate_mission,
)
from .tracks import TrackSet, read_tracks, synth_crowd, window_ensemble, write_tracks

__all__ = [
    "__version__",
    "Ensemble",
    "IntegratorConfig",
    "advance",
    "integrate_ensemble",
    "read_ensemble_bin",
    "read_ensemble_csv",
    "write_ensemble_bin",
    "write_ensemble_csv",
    "Labeling",
    "align_labels",
    "consensus",
    "kmeans",
    "CoherentSetDetector",
    "OnlineCoherentSetDetector",
    "detect_per_step",
    "CoherentFlowError",
    "ComplexSpectrumError",
    "ConfigError",
    "IngestError",
    "IntegrationError",
    "OperatorError",
    "BickleyParams",
    "Domain",
    "DoubleGyreParams",
    "SingleGyreParams",
    "bickley_velocity",
    "double_gyre_velocity",
    "make_flow",
    "seed_grid",
    "single_gyre_velocity",
    "KernelSpec",
    "eval_kernel",
    "gram",
    "median_heuristic",
    "ScoreReport",
    "adjusted_rand",
    "evaluate_run",
    "format_score_table",
    "ground_truth",
    "homogeneity_completeness_v",
    "report_to_json",
    "OperatorConfig",
    "OperatorState",
    "SpectralResult",
    "assemble_online_operator",
    "detect_coherent_sets",
    "dominant_eigens",
    "online_update",
    "surrogate_matrix",
    "MissionResult",
    "Plan",
    "RegionMask",
    "VehicleParams",
    "extract_region",
    "naive_controller",
    "plan_waypoints",
    "simulate_mission",
    "TrackSet",
    "read_tracks",
    "synth_crowd",
    "window_ensemble",
    "write_tracks",
]
