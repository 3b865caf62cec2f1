"""Cell-free massive MIMO ISAC simulator.

Multi-static detection of a low-altitude target by a network of transmit and
receive APs that simultaneously serves ground UEs, with joint optimization of
the sensing blocklength and per-stream powers under per-UE SINR floors and
per-AP power budgets.
"""

__version__ = "0.1.0"

from .config import ConfigError, ScenarioConfig, config_hash, load_config
from .scene import (
    ChannelSet,
    GeometryError,
    NetworkGeometry,
    RcsRealization,
    Scene,
    SteeringAngles,
    array_response,
    build_scene,
    draw_rcs,
)
from .precoding import (
    PowerAllocation,
    PrecoderSet,
    build_precoders,
    mrt_sensing_precoder,
    per_ap_power,
    rzf_precoders,
    ue_sinr,
)
from .detector import (
    DetectionResult,
    DetectorMatrix,
    SensingModel,
    assemble_sensing_model,
    calibrate_threshold,
    detection_probability,
    detector_matrix,
    evaluate_detection,
    expected_statistic,
    sample_statistics,
    statistic_gap,
    statistic_weights,
    test_statistic,
)
from .optimizer import (
    OptimizationProblem,
    PointSolution,
    SolverError,
    SubproblemState,
    build_problem,
    ccp_iteration,
    initial_state,
    solve_point,
    verify_solution,
)
from .scheduler import (
    PointRecord,
    SweepResult,
    WeightSchedule,
    adaptive_search,
    fixed_weight_sweep,
    sweep_area,
)
from .harness import EXPERIMENTS, ExperimentRecord, emit_results, run_experiment

__all__ = [
    "__version__",
    "ConfigError",
    "ScenarioConfig",
    "config_hash",
    "load_config",
    "ChannelSet",
    "GeometryError",
    "NetworkGeometry",
    "RcsRealization",
    "Scene",
    "SteeringAngles",
    "array_response",
    "build_scene",
    "draw_rcs",
    "PowerAllocation",
    "PrecoderSet",
    "build_precoders",
    "mrt_sensing_precoder",
    "per_ap_power",
    "rzf_precoders",
    "ue_sinr",
    "DetectionResult",
    "DetectorMatrix",
    "SensingModel",
    "assemble_sensing_model",
    "calibrate_threshold",
    "detection_probability",
    "detector_matrix",
    "evaluate_detection",
    "expected_statistic",
    "sample_statistics",
    "statistic_gap",
    "statistic_weights",
    "test_statistic",
    "OptimizationProblem",
    "PointSolution",
    "SolverError",
    "SubproblemState",
    "build_problem",
    "ccp_iteration",
    "initial_state",
    "solve_point",
    "verify_solution",
    "PointRecord",
    "SweepResult",
    "WeightSchedule",
    "adaptive_search",
    "fixed_weight_sweep",
    "sweep_area",
    "EXPERIMENTS",
    "ExperimentRecord",
    "emit_results",
    "run_experiment",
]
