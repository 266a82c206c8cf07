"""Regression under covariate shift with repeated measurements."""

from ._repshift import (
    ConfigError,
    DivergedTraining,
    Network,
    Ratio,
    Regression,
    __version__,
    approx_bench,
    binned_mse,
    exact_ratio,
    fit,
    fit_ratio,
    run_experiment,
    simulate,
)

__all__ = [
    "ConfigError",
    "DivergedTraining",
    "Network",
    "Ratio",
    "Regression",
    "__version__",
    "approx_bench",
    "binned_mse",
    "exact_ratio",
    "fit",
    "fit_ratio",
    "run_experiment",
    "simulate",
]
