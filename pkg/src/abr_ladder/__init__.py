"""Encoding-ladder optimization for adaptive video streaming.

Chooses per-chunk encoding bitrates that minimize the expected streaming
bitrate while keeping the expected delivered quality above a floor, using
viewport and bandwidth statistics from real playback.
"""

__version__ = "0.1.0"

from .baselines import (
    BaselineSpec,
    build_baseline,
    fixed_label_ladder,
    hull_maximizing_ladder,
    parse_baseline_spec,
)
from .errors import (
    CurveRangeError,
    EmptyInputError,
    InfeasibleProblemError,
    LadderOptimizerError,
    MismatchedInputError,
    MissingAnchorError,
    MissingLabelError,
    PreconditionError,
    TraceFormatError,
)
from .optimizer import (
    OptimizationProblem,
    OptimizationResult,
    SolverConfig,
    build_problem,
    default_starts,
    fit_ladder,
    project_ordered,
    solve,
)
from .output import CorpusReport, format_as_json, save_json
from .player_model import (
    Ladder,
    LadderEntry,
    ModelEvaluation,
    closed_form_viewing_probabilities,
    evaluate,
    fallback_probability,
    load_ladder,
    select_representation,
    viewing_probabilities,
)
from .region import AchievableRegion, RqPoint, achievable_region, contains, operating_points, upper_hull
from .rq_model import (
    ChunkRqModel,
    CurveParams,
    RateQualityCurve,
    RqSample,
    bitrate_range,
    curve_from_samples,
    eval_quality,
    eval_quality_slope,
    load_chunk_model,
    synth_curve,
)
from .simulator import ComparisonReport, SimConfig, SimReport, compare, simulate
from .stats_ingest import (
    BandwidthDistribution,
    TraceRecord,
    ViewportDistribution,
    ingest_traces,
    load_distributions,
    read_trace_file,
    save_distributions,
)

__all__ = [
    "__version__",
    # Rate-quality models
    "RqSample",
    "RateQualityCurve",
    "ChunkRqModel",
    "CurveParams",
    "eval_quality",
    "eval_quality_slope",
    "bitrate_range",
    "curve_from_samples",
    "synth_curve",
    "load_chunk_model",
    # Statistics
    "TraceRecord",
    "ViewportDistribution",
    "BandwidthDistribution",
    "ingest_traces",
    "read_trace_file",
    "save_distributions",
    "load_distributions",
    # Player model
    "Ladder",
    "LadderEntry",
    "ModelEvaluation",
    "select_representation",
    "viewing_probabilities",
    "closed_form_viewing_probabilities",
    "fallback_probability",
    "evaluate",
    "load_ladder",
    # Regions
    "RqPoint",
    "AchievableRegion",
    "achievable_region",
    "contains",
    "operating_points",
    "upper_hull",
    # Optimization
    "SolverConfig",
    "OptimizationProblem",
    "OptimizationResult",
    "build_problem",
    "project_ordered",
    "fit_ladder",
    "default_starts",
    "solve",
    # Baselines
    "BaselineSpec",
    "parse_baseline_spec",
    "fixed_label_ladder",
    "hull_maximizing_ladder",
    "build_baseline",
    # Simulation
    "SimConfig",
    "SimReport",
    "ComparisonReport",
    "simulate",
    "compare",
    # Output
    "CorpusReport",
    "format_as_json",
    "save_json",
    # Errors
    "LadderOptimizerError",
    "EmptyInputError",
    "PreconditionError",
    "CurveRangeError",
    "MissingLabelError",
    "MissingAnchorError",
    "InfeasibleProblemError",
    "MismatchedInputError",
    "TraceFormatError",
]
