"""Linear epsilon-insensitive SVR trained in the primal.

Objective on standardized features and centered targets::

    (lam / 2) * ||w||^2 + (1 / n) * sum_i max(0, |y_i - (w . x_i + b)| - epsilon)

minimized by seeded-shuffle stochastic subgradient descent with step
``eta0 / (1 + lam * eta0 * t)``. The returned ``(w, b)`` is the average of
the iterates visited during the second half of training.
"""

from dataclasses import dataclass

import numpy as np

from ..dataset import fingerprint_arrays, fit_scaler
from ..errors import DatasetError, NumericFailure
from ..rng import stream
from .base import PredictorModel, as_xy

_SHUFFLE_KEY = 0x5F7


@dataclass(frozen=True)
class SvrPayload:
    weights: tuple
    bias: float
    epsilon: float
    lam: float
    target_mean: float


def svr_objective(w, b, Z, yc, epsilon, lam):
    r = np.abs(yc - (Z @ w + b)) - epsilon
    return 0.5 * lam * float(w @ w) + float(np.mean(np.maximum(r, 0.0)))


def fit_svr(train, y=None, *, epsilon=0.01, lam=1e-4, epochs=200, eta0=0.1, seed=0, feature_names=None):
    X, y, names, normalized = as_xy(train, y, feature_names)
    n, p = X.shape
    if n == 0:
        raise DatasetError("cannot fit on an empty dataset")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if not lam > 0:
        raise ValueError("lam must be > 0")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")

    scaler = fit_scaler(X)
    Z = scaler.transform(X)
    with np.errstate(over="ignore"):
        y_mean = float(np.mean(y))
    if not np.isfinite(y_mean):
        raise NumericFailure("target mean overflowed; rescale the target")
    yc = y - y_mean

    w = np.zeros(p)
    b = 0.0
    w_sum = np.zeros(p)
    b_sum = 0.0
    n_avg = 0
    total = epochs * n
    avg_start = total // 2
    t = 0
    history = []
    rows = [Z[i] for i in range(n)]
    for epoch in range(epochs):
        order = stream(seed, _SHUFFLE_KEY, epoch).permutation(n)
        for i in order:
            eta = eta0 / (1.0 + lam * eta0 * t)
            x = rows[i]
            r = yc[i] - (float(x @ w) + b)
            w *= 1.0 - eta * lam
            if r > epsilon:
                w += eta * x
                b += eta
            elif r < -epsilon:
                w -= eta * x
                b -= eta
            t += 1
            if t > avg_start:
                w_sum += w
                b_sum += b
                n_avg += 1
        obj = svr_objective(w, b, Z, yc, epsilon, lam)
        if not np.isfinite(obj):
            raise NumericFailure(f"SVR objective became non-finite in epoch {epoch}")
        history.append(obj)

    w_avg = w_sum / n_avg
    b_avg = b_sum / n_avg
    if not (np.all(np.isfinite(w_avg)) and np.isfinite(b_avg)):
        raise NumericFailure("SVR weights are non-finite")

    payload = SvrPayload(tuple(float(v) for v in w_avg), float(b_avg), float(epsilon), float(lam), y_mean)
    meta = {
        "seed": int(seed),
        "hyperparameters": {"epsilon": float(epsilon), "lam": float(lam), "epochs": int(epochs), "eta0": float(eta0)},
        "dataset_fingerprint": fingerprint_arrays(X, y),
        "normalized": normalized,
        "n_train": int(n),
        "objective_history": history,
        "final_objective": svr_objective(w_avg, b_avg, Z, yc, epsilon, lam),
    }
    return PredictorModel("svr", names, scaler, payload, meta)


def predict_payload(payload, scaler, X):
    Z = scaler.transform(X) if scaler is not None else X
    return payload.target_mean + payload.bias + Z @ np.asarray(payload.weights)
