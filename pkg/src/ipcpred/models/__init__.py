"""Regression model families behind one predictor contract."""

from .base import KINDS, PredictorModel, predict
from .forest import ForestParams, ForestPayload, Tree, fit_forest
from .io import dumps_model, load_model, loads_model, model_fingerprint, save_model
from .linear import LinearPayload, fit_linear, raw_coefficients
from .svr import SvrPayload, fit_svr

__all__ = [
    "KINDS",
    "ForestParams",
    "ForestPayload",
    "LinearPayload",
    "PredictorModel",
    "SvrPayload",
    "Tree",
    "dumps_model",
    "fit",
    "fit_forest",
    "fit_linear",
    "fit_svr",
    "load_model",
    "loads_model",
    "model_fingerprint",
    "predict",
    "raw_coefficients",
    "save_model",
]


def fit(kind, train, *, seed=0, threads=1, **hyper):
    """Train a model of ``kind`` on a Dataset."""
    if kind == "linear":
        return fit_linear(train)
    if kind == "svr":
        return fit_svr(train, seed=seed, **hyper)
    if kind == "forest":
        return fit_forest(train, params=ForestParams(seed=seed, **hyper), threads=threads)
    raise ValueError(f"unknown model kind {kind!r}")
