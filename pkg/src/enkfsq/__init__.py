"""Ensemble Kalman filtering with detection-limited observations.

The package provides the ensemble/gain primitives, two toy dynamical models
(a 40-variable chaotic circuit and a 1-d subsurface transport model), an
observation model with censoring and a two-piece Gaussian out-of-range
likelihood, four analysis schemes, evaluation metrics, and a twin-experiment
harness with sensitivity sweeps.
"""

from .config import ConfigError, ExperimentConfig, make_config, parse_config_file
from .ensemble import (
    EnsembleStats,
    GainContext,
    ObservationOperator,
    compute_stats,
    kalman_gain,
)
from .filters import (
    AnalysisResult,
    FilterKind,
    enkf_analysis,
    enkfsq_analysis,
    pdenkf_analysis,
)
from .harness import (
    PosteriorDemo,
    RunRecord,
    SweepResult,
    build_climatology,
    posterior_demo,
    run_twin_experiment,
    sweep_alpha,
    sweep_detection_limit,
    sweep_ensemble_size,
    write_run_csv,
    write_sweep_csv,
)
from .metrics import (
    RunMetrics,
    aes,
    moving_average,
    multi_run_avg,
    rmse,
    skew_analysis,
    skew_obs,
    time_avg_rmse,
)
from .models import (
    L40_FORECAST,
    L40_TRUTH,
    LSST_FORECAST,
    LSST_TRUTH,
    L40Params,
    LSSTParams,
    ModelRole,
    generate_truth,
    l40_initial_condition,
    l40_tendency,
    lsst_initial_condition,
    lsst_step,
    rk4_step,
)
from .observations import (
    ClimatologyEstimate,
    DetectionLimit,
    LimitSide,
    Observation,
    ObservationBatch,
    TwoPieceGaussian,
    detection_limit_for_or_fraction,
    observe_truth,
    sigma_or_from_climatology,
)
from .rng import substream

__version__ = "0.1.0"
