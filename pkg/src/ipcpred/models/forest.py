"""Random forest of CART regression trees, grown from scratch.

Each tree ``t`` draws from its own stream ``rng.stream(seed, t)``: first the
bootstrap sample, then, node by node in depth-first order, a permutation of
feature indices from which split candidates are taken. Trees are therefore
independent of how they are scheduled across threads.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from ..dataset import fingerprint_arrays
from ..errors import DatasetError, NumericFailure
from ..rng import stream
from .base import PredictorModel, as_xy

LEAF = -1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: int = None  # None -> max(1, p // 3)
    bootstrap: bool = True
    seed: int = 0

    def resolved(self, p):
        mf = self.max_features if self.max_features is not None else max(1, p // 3)
        params = ForestParams(
            self.n_trees, self.max_depth, self.min_samples_split, self.min_samples_leaf, mf, self.bootstrap, self.seed
        )
        params.validate(p)
        return params

    def validate(self, p):
        for name in ("n_trees", "min_samples_split", "min_samples_leaf"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.max_features is not None and not 1 <= self.max_features <= p:
            raise ValueError(f"max_features must lie in [1, {p}]")


@dataclass(frozen=True)
class Tree:
    """Flat node arrays; node 0 is the root and children follow parents."""

    feature: np.ndarray  # LEAF for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity_decrease: np.ndarray

    @property
    def n_nodes(self):
        return len(self.feature)

    def is_leaf(self, k):
        return self.feature[k] == LEAF

    def apply(self, X):
        """Index of the leaf each row of ``X`` lands in."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            active = f != LEAF
            if not active.any():
                return node
            idx = rows[active]
            nd = node[idx]
            go_left = X[idx, f[active]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])

    def predict(self, X):
        return self.value[self.apply(X)]


@dataclass(frozen=True)
class ForestPayload:
    trees: tuple
    params: ForestParams


def _sse(y):
    return float(np.sum((y - y.mean()) ** 2))


def _midpoint(a, b):
    mid = a + (b - a) / 2.0
    # adjacent floats: the midpoint rounds onto b and would send b left
    return a if mid >= b else mid


def _best_split_on(x, y, min_leaf):
    """Best ``(score, threshold)`` for one feature, or None if no valid split.

    Score is n_left*var(left) + n_right*var(right). Among equal scores the
    first (lowest) threshold wins.
    """
    n = len(y)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order] - y.mean()
    cs = np.cumsum(ys)
    cs2 = np.cumsum(ys * ys)
    nl = np.arange(1, n, dtype=np.float64)
    sl, sl2 = cs[:-1], cs2[:-1]
    sr, sr2 = cs[-1] - sl, cs2[-1] - sl2
    score = (sl2 - sl * sl / nl) + (sr2 - sr * sr / (n - nl))
    valid = xs[:-1] < xs[1:]
    if min_leaf > 1:
        valid[: min_leaf - 1] = False
        valid[n - min_leaf:] = False
    if not valid.any():
        return None
    score = np.where(valid, score, np.inf)
    i = int(np.argmin(score))
    return float(score[i]), _midpoint(float(xs[i]), float(xs[i + 1]))


def _grow_tree(X, y, sample_idx, params, rng):
    p = X.shape[1]
    feature, threshold, left, right, value, n_samples, decrease = [], [], [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(np.mean(y[idx])))
        n_samples.append(len(idx))
        decrease.append(0.0)
        return len(feature) - 1

    root = new_node(sample_idx)
    stack = [(root, sample_idx, 0)]
    while stack:
        k, idx, depth = stack.pop()
        yn = y[idx]
        n = len(idx)
        if (
            (params.max_depth is not None and depth >= params.max_depth)
            or n < params.min_samples_split
            or n < 2 * params.min_samples_leaf
            or yn.max() == yn.min()
        ):
            continue
        Xn = X[idx]
        perm = rng.permutation(p)
        best = None  # (score, feature, threshold)
        for pos, f in enumerate(perm):
            # past the max_features budget, keep drawing only until some split is valid
            if pos >= params.max_features and best is not None:
                break
            found = _best_split_on(Xn[:, f], yn, params.min_samples_leaf)
            if found is None:
                continue
            score, thr = found
            cand = (score, int(f), thr)
            if best is None or cand[:2] < best[:2]:
                best = cand
        if best is None:
            continue
        _, f, thr = best
        mask = Xn[:, f] <= thr
        li, ri = idx[mask], idx[~mask]
        l_node = new_node(li)
        r_node = new_node(ri)
        feature[k] = f
        threshold[k] = thr
        left[k] = l_node
        right[k] = r_node
        decrease[k] = max(0.0, _sse(yn) - _sse(y[li]) - _sse(y[ri]))
        stack.append((r_node, ri, depth + 1))
        stack.append((l_node, li, depth + 1))

    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
        np.array(n_samples, dtype=np.int64),
        np.array(decrease, dtype=np.float64),
    )


def tree_sample(params, t, n):
    """Training row indices for tree ``t`` together with the tree's stream."""
    rng = stream(params.seed, t)
    if params.bootstrap:
        idx = rng.integers(0, n, size=n)
    else:
        idx = np.arange(n)
    return idx.astype(np.int64), rng


def _fit_one(X, y, params, t):
    idx, rng = tree_sample(params, t, len(y))
    with np.errstate(over="ignore", invalid="ignore"):
        return _grow_tree(X, y, idx, params, rng)


def fit_forest(train, y=None, params=None, *, threads=1, feature_names=None):
    X, y, names, normalized = as_xy(train, y, feature_names)
    n, p = X.shape
    if n == 0:
        raise DatasetError("cannot fit on an empty dataset")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DatasetError("training data contains non-finite values")
    params = (params or ForestParams()).resolved(p)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(lambda t: _fit_one(X, y, params, t), range(params.n_trees)))
    else:
        trees = [_fit_one(X, y, params, t) for t in range(params.n_trees)]
    for tree in trees:
        if not (np.all(np.isfinite(tree.value)) and np.all(np.isfinite(tree.impurity_decrease))):
            raise NumericFailure("tree statistics overflowed; rescale the target")

    meta = {
        "seed": int(params.seed),
        "hyperparameters": asdict(params),
        "dataset_fingerprint": fingerprint_arrays(X, y),
        "normalized": normalized,
        "n_train": int(n),
    }
    return PredictorModel("forest", names, None, ForestPayload(tuple(trees), params), meta)


def predict_payload(payload, X):
    preds = np.stack([tree.predict(X) for tree in payload.trees])
    mean = preds.mean(axis=0)
    # a mean of leaf values cannot leave their range; clip away rounding overshoot
    return np.clip(mean, preds.min(axis=0), preds.max(axis=0))
