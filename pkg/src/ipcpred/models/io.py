"""Versioned JSON model documents.

Layout (``schema_version`` 1)::

    {
      "schema_version": 1,
      "kind": "linear" | "svr" | "forest",
      "feature_names": [...],
      "scaler": null | {"means": [...], "stds": [...]},
      "train_meta": {...},
      "payload": {...}
    }

Payloads:

* linear: ``{"intercept", "coefficients"}`` (standardized-feature space)
* svr: ``{"weights", "bias", "epsilon", "lambda", "target_mean"}``
* forest: ``{"params": {...}, "trees": [{"feature", "threshold", "left",
  "right", "value", "n_samples", "impurity_decrease"}, ...]}`` where each
  tree is a set of parallel flat node arrays and ``feature == -1`` marks
  a leaf.

Floats are written at 17 significant digits, so ``load`` then ``save``
reproduces the file byte for byte.
"""

import hashlib
import json
from pathlib import Path

import numpy as np

from .. import _docfmt
from ..dataset import Scaler
from ..errors import ModelFormatError, UnsupportedVersionError
from .base import KINDS, PredictorModel
from .forest import ForestParams, ForestPayload, Tree
from .linear import LinearPayload
from .svr import SvrPayload

SCHEMA_VERSION = 1

_PAYLOAD_KEYS = {
    "linear": {"intercept", "coefficients"},
    "svr": {"weights", "bias", "epsilon", "lambda", "target_mean"},
    "forest": {"params", "trees"},
}
_TREE_FIELDS = ("feature", "threshold", "left", "right", "value", "n_samples", "impurity_decrease")
_INT_FIELDS = {"feature", "left", "right", "n_samples"}


def _payload_doc(model):
    pl = model.payload
    if model.kind == "linear":
        return {"intercept": pl.intercept, "coefficients": list(pl.coefficients)}
    if model.kind == "svr":
        return {
            "weights": list(pl.weights),
            "bias": pl.bias,
            "epsilon": pl.epsilon,
            "lambda": pl.lam,
            "target_mean": pl.target_mean,
        }
    params = pl.params
    return {
        "params": {
            "n_trees": params.n_trees,
            "max_depth": params.max_depth,
            "min_samples_split": params.min_samples_split,
            "min_samples_leaf": params.min_samples_leaf,
            "max_features": params.max_features,
            "bootstrap": params.bootstrap,
            "seed": params.seed,
        },
        "trees": [{name: getattr(tree, name).tolist() for name in _TREE_FIELDS} for tree in pl.trees],
    }


def model_to_doc(model):
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": model.kind,
        "feature_names": list(model.feature_names),
        "scaler": None if model.scaler is None else {"means": list(model.scaler.means), "stds": list(model.scaler.stds)},
        "train_meta": model.train_meta,
        "payload": _payload_doc(model),
    }


def dumps_model(model):
    return _docfmt.dumps(model_to_doc(model))


def model_fingerprint(model):
    return hashlib.sha256(dumps_model(model).encode("utf-8")).hexdigest()


def save_model(model, path):
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def _floats(seq, what):
    try:
        arr = [float(v) for v in seq]
    except (TypeError, ValueError):
        raise ModelFormatError(f"{what} must be a list of numbers") from None
    return tuple(arr)


def _tree_from_doc(doc, p):
    try:
        arrays = {}
        for name in _TREE_FIELDS:
            dtype = np.int64 if name in _INT_FIELDS else np.float64
            arrays[name] = np.asarray(doc[name], dtype=dtype)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed tree: {exc!r}") from None
    m = len(arrays["feature"])
    if m == 0 or any(a.ndim != 1 or len(a) != m for a in arrays.values()):
        raise ModelFormatError("tree node arrays must be non-empty and of equal length")
    internal = arrays["feature"] != -1
    nodes = np.arange(m)
    for side in ("left", "right"):
        child = arrays[side][internal]
        if np.any(child <= nodes[internal]) or np.any(child >= m):
            raise ModelFormatError("tree child indices must point forward inside the node array")
    if np.any(arrays["feature"][internal] >= p) or np.any(arrays["feature"] < -1):
        raise ModelFormatError("tree feature index out of range")
    return Tree(**arrays)


def model_from_doc(doc):
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be an object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise UnsupportedVersionError(f"unsupported model schema_version {version!r}")
    try:
        kind = doc["kind"]
        names = tuple(doc["feature_names"])
        scaler_doc = doc["scaler"]
        meta = doc["train_meta"]
        pl = doc["payload"]
    except KeyError as exc:
        raise ModelFormatError(f"model document lacks {exc.args[0]!r}") from None
    if kind not in KINDS:
        raise ModelFormatError(f"unknown model kind {kind!r}")
    if not isinstance(pl, dict) or set(pl) != _PAYLOAD_KEYS[kind]:
        raise ModelFormatError(f"payload does not match kind {kind!r}")
    p = len(names)

    scaler = None
    if scaler_doc is not None:
        scaler = Scaler(_floats(scaler_doc.get("means"), "scaler means"), _floats(scaler_doc.get("stds"), "scaler stds"))
        if len(scaler.means) != p or len(scaler.stds) != p:
            raise ModelFormatError("scaler width does not match feature_names")

    if kind == "linear":
        payload = LinearPayload(float(pl["intercept"]), _floats(pl["coefficients"], "coefficients"))
        width = len(payload.coefficients)
    elif kind == "svr":
        payload = SvrPayload(
            _floats(pl["weights"], "weights"),
            float(pl["bias"]),
            float(pl["epsilon"]),
            float(pl["lambda"]),
            float(pl["target_mean"]),
        )
        width = len(payload.weights)
    else:
        try:
            params = ForestParams(**pl["params"])
        except TypeError as exc:
            raise ModelFormatError(f"bad forest params: {exc}") from None
        trees = tuple(_tree_from_doc(t, p) for t in pl["trees"])
        if len(trees) != params.n_trees:
            raise ModelFormatError(f"forest declares {params.n_trees} trees but holds {len(trees)}")
        payload = ForestPayload(trees, params)
        width = p
    if width != p:
        raise ModelFormatError(f"payload width {width} does not match {p} feature names")
    return PredictorModel(kind, names, scaler, payload, meta)


def loads_model(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    return model_from_doc(doc)


def load_model(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise ModelFormatError(f"{path} is not UTF-8 text") from None
    return loads_model(text)
