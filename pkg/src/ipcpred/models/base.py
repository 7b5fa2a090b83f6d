"""The uniform predictor contract shared by all model families."""

from dataclasses import dataclass, field

import numpy as np

from ..dataset import Dataset, FEATURE_NAMES
from ..errors import RegimeMismatchError, WidthMismatchError

KINDS = ("linear", "svr", "forest")


@dataclass(frozen=True)
class PredictorModel:
    kind: str
    feature_names: tuple
    scaler: object  # Scaler or None
    payload: object
    train_meta: dict = field(default_factory=dict)

    @property
    def n_features(self):
        return len(self.feature_names)

    @property
    def normalized(self):
        return bool(self.train_meta.get("normalized", False))


def as_xy(data, y=None, feature_names=None):
    """Accept a Dataset or an ``(X, y)`` pair and return arrays plus names."""
    if isinstance(data, Dataset):
        return data.X, data.y, tuple(data.feature_names), data.normalized
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D array")
    if y is None:
        raise ValueError("y is required when X is an array")
    y = np.asarray(y, dtype=np.float64)
    if feature_names is None:
        feature_names = FEATURE_NAMES if X.shape[1] == len(FEATURE_NAMES) else tuple(f"x{i}" for i in range(X.shape[1]))
    return X, y, tuple(feature_names), False


def _as_matrix(model, features, normalized):
    if isinstance(features, Dataset):
        if normalized is None:
            normalized = features.normalized
        features = features.X
    X = np.asarray(features, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_features:
        got = X.shape[-1] if X.ndim else 0
        raise WidthMismatchError(f"model expects {model.n_features} features, got {got}")
    if normalized is not None and bool(normalized) != model.normalized:
        have = "normalized" if normalized else "raw"
        want = "normalized" if model.normalized else "raw"
        raise RegimeMismatchError(f"model was trained on {want} features but input is {have}")
    return X, single


def predict(model, features, normalized=None):
    """Predict IPC for one feature vector (returns float) or a matrix/Dataset.

    When ``normalized`` is given (or ``features`` is a Dataset) it is checked
    against the regime recorded at training time.
    """
    from . import forest, linear, svr

    X, single = _as_matrix(model, features, normalized)
    if model.kind == "linear":
        out = linear.predict_payload(model.payload, model.scaler, X)
    elif model.kind == "svr":
        out = svr.predict_payload(model.payload, model.scaler, X)
    elif model.kind == "forest":
        out = forest.predict_payload(model.payload, X)
    else:
        raise ValueError(f"unknown model kind {model.kind!r}")
    return float(out[0]) if single else out
