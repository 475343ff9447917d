"""Bayesian survival analysis for clustered time-to-event data.

Piecewise-exponential and Bernstein-polynomial baseline hazards with
proportional-hazards covariates and a closed-form marginalized gamma
frailty; adaptive random-walk Metropolis inference; WAIC model selection;
and a Monte Carlo simulation-study engine.
"""

from ._version import __version__
from .data import ObservationRecord, as_clustered_arrays, validate_dataset
from .hazards import (
    TimeGrid,
    bp_cum_hazard,
    bp_hazard,
    build_time_grid,
    pe_cum_hazard,
    pe_hazard,
)
from .likelihood import (
    ModelSpec,
    ParameterVector,
    cluster_log_likelihood,
    pointwise_log_likelihood,
    resolve_model_spec,
    total_log_likelihood,
)
from .inference import (
    ChainConfig,
    FitResult,
    InitializationError,
    ParamSummary,
    PosteriorDraws,
    PriorSpec,
    fit_model,
    log_posterior,
    log_prior,
    run_chain,
    sample_posterior,
    summarize_posterior,
)
from .diagnostics import (
    ChainDiagnostics,
    compute_diagnostics,
    effective_sample_size,
    split_rhat,
)
from .waic import WaicResult, compare, lppd, p_waic, waic
from .simulate import (
    Censoring,
    Scenario,
    invert_cum_hazard,
    simulate_dataset,
    tune_censoring_rate,
)
from .mcstudy import (
    McMetricsRow,
    McStudyResult,
    ReplicaFit,
    StudyFitSettings,
    mc_metrics,
    run_monte_carlo,
)
from .dataio import FitReport, ParseError, load_scenario_config, read_dataset, write_dataset
from .cli import cli_dispatch

__all__ = [
    "__version__",
    "ObservationRecord", "as_clustered_arrays", "validate_dataset",
    "TimeGrid", "build_time_grid",
    "pe_hazard", "pe_cum_hazard", "bp_hazard", "bp_cum_hazard",
    "ModelSpec", "ParameterVector", "resolve_model_spec",
    "cluster_log_likelihood", "total_log_likelihood", "pointwise_log_likelihood",
    "PriorSpec", "ChainConfig", "PosteriorDraws", "ParamSummary",
    "log_prior", "log_posterior", "run_chain", "sample_posterior",
    "summarize_posterior", "fit_model", "FitResult", "InitializationError",
    "ChainDiagnostics", "compute_diagnostics", "split_rhat", "effective_sample_size",
    "WaicResult", "lppd", "p_waic", "waic", "compare",
    "Censoring", "Scenario", "invert_cum_hazard", "simulate_dataset", "tune_censoring_rate",
    "McMetricsRow", "McStudyResult", "ReplicaFit", "StudyFitSettings",
    "mc_metrics", "run_monte_carlo",
    "FitReport", "ParseError", "read_dataset", "write_dataset", "load_scenario_config",
    "cli_dispatch",
]
