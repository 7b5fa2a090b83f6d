"""Ordinary least squares via Householder QR on standardized features."""

from dataclasses import dataclass

import numpy as np

from ..dataset import fingerprint_arrays, fit_scaler
from ..errors import DatasetError, NumericFailure
from .base import PredictorModel, as_xy

RANK_TOL = 1e-10
RIDGE = 1e-8


@dataclass(frozen=True)
class LinearPayload:
    intercept: float
    coefficients: tuple  # standardized-feature space


def _back_substitute(R, b):
    x = np.zeros_like(b)
    for i in range(len(b) - 1, -1, -1):
        x[i] = (b[i] - R[i, i + 1:] @ x[i + 1:]) / R[i, i]
    return x


def fit_linear(train, y=None, *, feature_names=None):
    X, y, names, normalized = as_xy(train, y, feature_names)
    n, p = X.shape
    if n == 0:
        raise DatasetError("cannot fit on an empty dataset")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DatasetError("training data contains non-finite values")
    if n < p + 1:
        raise DatasetError(f"need at least {p + 1} samples for {p} features, got {n}")

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        scaler, beta, fallback = _solve(X, y)
    if not np.all(np.isfinite(beta)):
        raise NumericFailure("least-squares solution is not finite")

    payload = LinearPayload(float(beta[0]), tuple(float(b) for b in beta[1:]))
    meta = {
        "seed": None,
        "hyperparameters": {},
        "dataset_fingerprint": fingerprint_arrays(X, y),
        "normalized": normalized,
        "n_train": int(n),
        "ridge_fallback": fallback,
    }
    return PredictorModel("linear", names, scaler, payload, meta)


def _solve(X, y):
    n, p = X.shape
    scaler = fit_scaler(X)
    A = np.hstack([np.ones((n, 1)), scaler.transform(X)])
    Q, R = np.linalg.qr(A, mode="reduced")
    rdiag = np.abs(np.diag(R))
    fallback = bool(np.any(rdiag < RANK_TOL * rdiag.max()))
    if fallback:
        # rank deficient: tiny ridge on the slopes only, solved as an augmented least-squares problem
        penalty = np.hstack([np.zeros((p, 1)), np.sqrt(RIDGE) * np.eye(p)])
        Q, R = np.linalg.qr(np.vstack([A, penalty]), mode="reduced")
        y = np.concatenate([y, np.zeros(p)])
    return scaler, _back_substitute(R, Q.T @ y), fallback


def predict_payload(payload, scaler, X):
    Z = scaler.transform(X) if scaler is not None else X
    return payload.intercept + Z @ np.asarray(payload.coefficients)


def raw_coefficients(model):
    """Map standardized coefficients back to ``(intercept, coefs)`` in input units."""
    coef = np.asarray(model.payload.coefficients)
    stds = np.asarray(model.scaler.stds)
    means = np.asarray(model.scaler.means)
    raw = coef / stds
    return float(model.payload.intercept - np.sum(raw * means)), raw
