"""Error metrics, residuals and feature importance."""

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _docfmt
from .dataset import Dataset
from .errors import DatasetError, ReportError, WrongModelKindError
from .models import model_fingerprint, predict
from .rng import stream

_PERM_STREAM = 0x9E7


def _pair_arrays(actual, predicted):
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.size} actual vs {p.size} predicted")
    if a.size == 0:
        raise ValueError("rmse of an empty series is undefined")
    return a, p


def rmse(actual, predicted):
    a, p = _pair_arrays(actual, predicted)
    d = np.abs(p - a)
    scale = float(d.max())
    if scale == 0 or not math.isfinite(scale):
        return scale
    # factor out the largest error so tiny or huge residuals do not under/overflow
    return scale * math.sqrt(float(np.mean((d / scale) ** 2)))


def mae(actual, predicted):
    a, p = _pair_arrays(actual, predicted)
    return float(np.mean(np.abs(p - a)))


def r2(actual, predicted):
    """Coefficient of determination, or None when the actuals are constant."""
    a, p = _pair_arrays(actual, predicted)
    sst = float(np.sum((a - a.mean()) ** 2))
    if sst == 0:
        return None
    return 1.0 - float(np.sum((p - a) ** 2)) / sst


@dataclass(frozen=True)
class EvalReport:
    rmse: float
    mae: float
    r2: object  # float, or None when not applicable
    n: int
    pairs: tuple  # (actual, predicted)
    residuals: tuple  # predicted - actual
    split_spec: str = None
    model_fingerprint: str = None

    def to_doc(self):
        return {
            "schema_version": 1,
            "rmse": self.rmse,
            "mae": self.mae,
            "r2": self.r2,
            "n": self.n,
            "split_spec": self.split_spec,
            "model_fingerprint": self.model_fingerprint,
            "actual": [a for a, _ in self.pairs],
            "predicted": [p for _, p in self.pairs],
            "residuals": list(self.residuals),
        }

    @classmethod
    def from_doc(cls, doc):
        try:
            pairs = tuple(zip((float(v) for v in doc["actual"]), (float(v) for v in doc["predicted"])))
            return cls(
                float(doc["rmse"]),
                float(doc["mae"]),
                None if doc["r2"] is None else float(doc["r2"]),
                int(doc["n"]),
                pairs,
                tuple(float(v) for v in doc["residuals"]),
                doc.get("split_spec"),
                doc.get("model_fingerprint"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ReportError(f"malformed evaluation report: {exc!r}") from None


def evaluate(model, test, split_spec=None):
    if len(test) == 0:
        raise DatasetError("cannot evaluate on an empty dataset")
    actual = test.y
    predicted = np.asarray(predict(model, test))
    residuals = predicted - actual
    return EvalReport(
        rmse=rmse(actual, predicted),
        mae=mae(actual, predicted),
        r2=r2(actual, predicted),
        n=len(actual),
        pairs=tuple(zip(actual.tolist(), predicted.tolist())),
        residuals=tuple(residuals.tolist()),
        split_spec=None if split_spec is None else str(split_spec),
        model_fingerprint=model_fingerprint(model),
    )


@dataclass(frozen=True)
class ImportanceReport:
    method: str  # "permutation" | "impurity"
    scores: tuple  # (feature name, score)
    repeats: int = None
    seed: int = None
    no_splits: bool = False
    baseline_rmse: float = None
    details: dict = field(default_factory=dict)

    def score(self, name):
        return dict(self.scores)[name]

    def ranked(self):
        """Scores sorted by decreasing value; ties keep feature order."""
        return sorted(self.scores, key=lambda kv: -kv[1])

    def positive_share(self, names):
        total = sum(max(s, 0.0) for _, s in self.scores)
        if total == 0:
            return 0.0
        return sum(max(s, 0.0) for n, s in self.scores if n in names) / total

    def to_doc(self):
        return {
            "schema_version": 1,
            "method": self.method,
            "repeats": self.repeats,
            "seed": self.seed,
            "no_splits": self.no_splits,
            "baseline_rmse": self.baseline_rmse,
            "scores": [{"feature": n, "score": s} for n, s in self.scores],
        }

    @classmethod
    def from_doc(cls, doc):
        try:
            return cls(
                doc["method"],
                tuple((d["feature"], float(d["score"])) for d in doc["scores"]),
                doc.get("repeats"),
                doc.get("seed"),
                bool(doc.get("no_splits", False)),
                doc.get("baseline_rmse"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ReportError(f"malformed importance report: {exc!r}") from None

    def to_csv_text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature", "score"])
        for name, s in self.scores:
            w.writerow([name, format(float(s), ".17g")])
        return buf.getvalue()


def permutation_importance(model, test, repeats=10, seed=0, threads=1, *, y=None):
    """Mean increase in test RMSE when one feature column is shuffled.

    ``test`` is a Dataset, or a feature matrix with targets passed as ``y``.
    Column ``j`` in repeat ``r`` is shuffled with ``stream(seed, PERM, j, r)``,
    so results do not depend on ``threads``.
    """
    if isinstance(test, Dataset):
        X, y, regime = test.X, test.y, test.normalized
    else:
        X, y, regime = np.asarray(test, dtype=np.float64), np.asarray(y, dtype=np.float64), None
    if len(y) == 0:
        raise DatasetError("cannot compute importance on an empty dataset")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    baseline = rmse(y, predict(model, X, normalized=regime))
    n, p = X.shape

    def score(j):
        deltas = []
        for r in range(repeats):
            perm = stream(seed, _PERM_STREAM, j, r).permutation(n)
            Xs = X.copy()
            Xs[:, j] = X[perm, j]
            deltas.append(rmse(y, predict(model, Xs, normalized=regime)) - baseline)
        return math.fsum(deltas) / repeats

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(score, range(p)))
    else:
        scores = [score(j) for j in range(p)]
    return ImportanceReport(
        "permutation",
        tuple(zip(model.feature_names, scores)),
        repeats=repeats,
        seed=seed,
        baseline_rmse=baseline,
    )


def impurity_importance(model):
    """Per-tree normalized impurity decrease, averaged over trees that split."""
    if model.kind != "forest":
        raise WrongModelKindError(f"impurity importance needs a forest, got a {model.kind} model")
    p = model.n_features
    per_tree = []
    for tree in model.payload.trees:
        internal = tree.feature >= 0
        if not internal.any():
            continue
        sums = np.bincount(tree.feature[internal], weights=tree.impurity_decrease[internal], minlength=p)
        total = sums.sum()
        if total > 0:
            per_tree.append(sums / total)
    if not per_tree:
        return ImportanceReport("impurity", tuple((n, 0.0) for n in model.feature_names), no_splits=True)
    mean = np.mean(per_tree, axis=0)
    mean = mean / mean.sum()
    return ImportanceReport("impurity", tuple(zip(model.feature_names, (float(v) for v in mean))))


def write_report(report, path):
    from pathlib import Path

    Path(path).write_text(_docfmt.dumps(report.to_doc()), encoding="utf-8")
