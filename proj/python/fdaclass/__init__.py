"""Functional-data features and classifiers for labeled address ledgers."""

from ._core import (
    Basis,
    Classifier,
    ConfigError,
    FpcaModel,
    InputError,
    NumericalError,
    RateFit,
    SmoothCurve,
    config_text,
    fit_fpca,
    fit_rate,
    gcv_score,
    ingest,
    penalized_fit,
    run,
    train_forest,
    train_logit,
    write_synthetic,
)

__all__ = [
    "Basis",
    "Classifier",
    "ConfigError",
    "FpcaModel",
    "InputError",
    "NumericalError",
    "RateFit",
    "SmoothCurve",
    "config_text",
    "fit_fpca",
    "fit_rate",
    "gcv_score",
    "ingest",
    "penalized_fit",
    "run",
    "train_forest",
    "train_logit",
    "write_synthetic",
]
