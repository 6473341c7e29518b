"""Dual-sensor tracking with transfer-learning particle filters.

A source filter on the low-noise sensor ships one-step-ahead predicted
observation packets to a primary filter on the high-noise sensor, which
folds them in as an extra likelihood.  The package bundles the particle
filter pair, unscented/cubature baselines, a deterministic Monte-Carlo
benchmark harness and a small CLI.
"""

from .errors import (
    AllWeightsDegenerate,
    ConfigError,
    DegenerateWeightsWarning,
    DimensionMismatch,
    DualTrackError,
    EmptyInput,
    InvalidWeights,
    LengthMismatch,
    NonPositiveDefinite,
    OriginSingularity,
    StaleTransferPacket,
)
from .gaussian import (
    CubatureRule,
    GaussianFilterState,
    JulierSigmaRule,
    gf_predict,
    gf_tl_update,
    gf_update,
    source_gf_packet,
)
from .harness import (
    ExperimentResult,
    FilterSpec,
    RunMetrics,
    ScenarioConfig,
    delta_intensity,
    delta_rmse,
    generate_measurements,
    generate_truth,
    overall_rmse,
    parse_filter_list,
    rmse_per_step,
    run_experiment,
)
from .models import (
    CoordinatedTurn,
    LinearCV,
    SensorModel,
    make_sensor_pair,
    measure,
    wrap_angle,
)
from .numerics import (
    effective_sample_size,
    gaussian_logpdf,
    normalize_logweights,
    sample_gaussian,
    systematic_resample,
    weighted_moments,
)
from .particle import (
    ParticleSet,
    StateGaussian,
    effective_particles,
    init_particles,
    predict,
    resample,
    sir_step,
    summarize,
    update_measurement,
)
from .rng import stream
from .transfer import (
    DualRunResult,
    PredictedObservationCloud,
    TransferPacket,
    predicted_observation_packet,
    primary_step,
    read_packets,
    run_dual,
    source_step,
    transfer_loglik,
    write_packets,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "DualTrackError", "NonPositiveDefinite", "AllWeightsDegenerate",
    "InvalidWeights", "EmptyInput", "DimensionMismatch", "OriginSingularity",
    "StaleTransferPacket", "LengthMismatch", "ConfigError",
    "DegenerateWeightsWarning",
    # numerics
    "gaussian_logpdf", "sample_gaussian", "normalize_logweights",
    "systematic_resample", "weighted_moments", "effective_sample_size",
    # models
    "LinearCV", "CoordinatedTurn", "SensorModel", "make_sensor_pair",
    "measure", "wrap_angle",
    # particle filter
    "ParticleSet", "StateGaussian", "init_particles", "predict",
    "update_measurement", "resample", "summarize", "sir_step",
    "effective_particles",
    # transfer
    "TransferPacket", "PredictedObservationCloud", "DualRunResult",
    "predicted_observation_packet", "source_step", "primary_step",
    "transfer_loglik", "run_dual", "write_packets", "read_packets",
    # gaussian baselines
    "JulierSigmaRule", "CubatureRule", "GaussianFilterState",
    "gf_predict", "gf_update", "gf_tl_update", "source_gf_packet",
    # harness
    "ScenarioConfig", "FilterSpec", "RunMetrics", "ExperimentResult",
    "generate_truth", "generate_measurements", "rmse_per_step",
    "overall_rmse", "delta_rmse", "delta_intensity", "run_experiment",
    "parse_filter_list",
    # rng
    "stream",
]
