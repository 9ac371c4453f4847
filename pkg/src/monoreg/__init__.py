"""Bayesian monotone curve fitting with posterior inference on the derivative.

Fits a smooth nondecreasing curve to noisy observations, with a prior that
can zero out, share, or free the curve's increments; the posterior gives the
curve, its first derivative, and the mass-scaled derivative used to read
time-resolved concentration off filter pressure-drop sensors.
"""

__version__ = "0.1.0"

from .basis import (
    BasisSet,
    IncrementTransform,
    bernstein_row,
    build_basis_set,
    evaluate_derivative,
    evaluate_f,
    increment_transform,
)
from .data import (
    Dataset,
    RawSeries,
    ScalingInfo,
    destandardize,
    load_timeseries,
    read_metadata,
    standardize,
    trim_series,
)
from .gibbs import SamplerError, run_chain
from .inference import (
    CurveSummary,
    DiagnosticsTable,
    PosteriorSample,
    ScaledCurveSummary,
    chain_diagnostics,
    effective_sample_size,
    lag1_autocorrelation,
    model_probabilities,
    posterior_curve,
    posterior_derivative,
    scaled_derivative,
    write_curve_csv,
)
from .model import ChainState, ModelConfig, initial_state
from .samplers import (
    TruncatedNormalSpec,
    sample_gamma,
    sample_truncated_mvn,
    sample_truncated_normal,
    truncated_normal_moments,
)
from .simulate import (
    MetricsReport,
    OlsFit,
    Scenario,
    evaluate_fit,
    generate_dataset,
    kfold_cv,
    ols_fit,
    run_replicates,
    scenario_derivative,
    scenario_truth,
    summarize_reports,
)

__all__ = [name for name in dir() if not name.startswith("_")]
