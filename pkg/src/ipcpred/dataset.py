"""Labeled samples, per-instruction normalization, splitting and CSV I/O."""

import csv
import hashlib
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import CsvFormatError, DatasetError, NormalizationError, SplitError
from .rng import stream

COUNT_FEATURES = ("numLoadInsts", "numStoreInsts", "numInsts", "numBranches", "numOps")
CONFIG_FEATURES = ("l1i_kb", "l1d_kb", "l2_kb", "pipeline_width")
RATE_FEATURES = ("numLoadInsts", "numStoreInsts", "numBranches", "numOps")


class FeatureVector(NamedTuple):
    numLoadInsts: float
    numStoreInsts: float
    numInsts: float
    numBranches: float
    numOps: float
    l1i_kb: float
    l1d_kb: float
    l2_kb: float
    pipeline_width: float


FEATURE_NAMES = FeatureVector._fields
CSV_COLUMNS = ("workload", "config_id", "interval_id", *FEATURE_NAMES, "ipc", "normalized")


@dataclass(frozen=True)
class LabeledSample:
    features: FeatureVector
    ipc: float
    workload: str
    config_id: str
    interval_id: str
    normalized: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.ipc) and self.ipc > 0):
            raise DatasetError(f"ipc must be finite and positive, got {self.ipc!r}")
        if not all(math.isfinite(v) for v in self.features):
            raise DatasetError(f"non-finite feature in sample {self.workload}/{self.interval_id}")


@dataclass(frozen=True)
class Dataset:
    samples: tuple
    feature_names: tuple = FEATURE_NAMES

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        flags = {s.normalized for s in self.samples}
        if len(flags) > 1:
            raise DatasetError("dataset mixes normalized and raw samples")

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def normalized(self):
        return bool(self.samples) and self.samples[0].normalized

    @property
    def X(self):
        if not self.samples:
            return np.empty((0, len(self.feature_names)))
        return np.array([s.features for s in self.samples], dtype=np.float64)

    @property
    def y(self):
        return np.array([s.ipc for s in self.samples], dtype=np.float64)

    def subset(self, indices):
        return Dataset(tuple(self.samples[i] for i in indices), self.feature_names)

    def column(self, name):
        return self.X[:, self.feature_names.index(name)]


def fingerprint_arrays(X, y):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(y, dtype="<f8").tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# normalization


def normalize_per_instruction(sample):
    """Convert counts to per-instruction rates; numInsts becomes log10(numInsts)."""
    if sample.normalized:
        raise NormalizationError("sample is already normalized")
    f = sample.features
    n = f.numInsts
    if not n > 0:
        raise NormalizationError(f"numInsts must be positive to normalize, got {n!r}")
    fv = f._replace(
        numLoadInsts=f.numLoadInsts / n,
        numStoreInsts=f.numStoreInsts / n,
        numBranches=f.numBranches / n,
        numOps=f.numOps / n,
        numInsts=math.log10(n),
    )
    return replace(sample, features=fv, normalized=True)


def normalize_dataset(dataset):
    return Dataset(tuple(normalize_per_instruction(s) for s in dataset), dataset.feature_names)


# ---------------------------------------------------------------------------
# splitting


@dataclass(frozen=True)
class SplitSpec:
    """``kind`` is ``random``, ``workload`` or ``config``."""

    kind: str = "random"
    fraction: float = 0.2
    group: str = None
    seed: int = 0

    @classmethod
    def parse(cls, text, seed=0):
        kind, sep, arg = text.partition(":")
        if not sep or not arg:
            raise SplitError(f"split must look like random:F, workload:W or config:C, got {text!r}")
        if kind == "random":
            try:
                f = float(arg)
            except ValueError:
                raise SplitError(f"bad split fraction {arg!r}") from None
            return cls("random", fraction=f, seed=seed)
        if kind in ("workload", "config"):
            return cls(kind, fraction=None, group=arg, seed=seed)
        raise SplitError(f"unknown split kind {kind!r}")

    def __str__(self):
        if self.kind == "random":
            return f"random:{self.fraction!r}"
        return f"{self.kind}:{self.group}"


def split_indices(dataset, spec):
    """Return sorted ``(train_idx, test_idx)`` index lists."""
    n = len(dataset)
    if spec.kind == "random":
        f = spec.fraction
        if not 0 < f < 1:
            raise SplitError(f"split fraction must lie in (0, 1), got {f!r}")
        # round() guards against 0.1*30 == 3.0000000000000004 style overshoot
        n_test = math.ceil(round(f * n, 9))
        perm = stream(spec.seed, 0x5E1).permutation(n)
        test = sorted(int(i) for i in perm[:n_test])
    elif spec.kind in ("workload", "config"):
        attr = "workload" if spec.kind == "workload" else "config_id"
        test = [i for i, s in enumerate(dataset.samples) if getattr(s, attr) == spec.group]
        if not test:
            raise SplitError(f"{spec.kind} {spec.group!r} not present in dataset")
    else:
        raise SplitError(f"unknown split kind {spec.kind!r}")
    test_set = set(test)
    train = [i for i in range(n) if i not in test_set]
    if not train:
        raise SplitError(f"split {spec} leaves the training partition empty")
    if not test:
        raise SplitError(f"split {spec} leaves the test partition empty")
    return train, test


def split(dataset, spec):
    train, test = split_indices(dataset, spec)
    return dataset.subset(train), dataset.subset(test)


# ---------------------------------------------------------------------------
# standardization


@dataclass(frozen=True)
class Scaler:
    means: tuple
    stds: tuple

    def transform(self, X):
        return (np.asarray(X, dtype=np.float64) - np.asarray(self.means)) / np.asarray(self.stds)

    def inverse_transform(self, Z):
        return np.asarray(Z, dtype=np.float64) * np.asarray(self.stds) + np.asarray(self.means)

    @classmethod
    def identity(cls, p):
        return cls((0.0,) * p, (1.0,) * p)


def fit_scaler(train):
    """Per-column mean and population std; constant columns get std 1."""
    X = train.X if isinstance(train, Dataset) else np.asarray(train, dtype=np.float64)
    if X.shape[0] == 0:
        raise DatasetError("cannot fit a scaler on an empty dataset")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    const = np.all(X == X[0], axis=0)
    # constant columns pass through unchanged
    means = np.where(const, 0.0, means)
    stds = np.where(const | (stds == 0), 1.0, stds)
    return Scaler(tuple(float(m) for m in means), tuple(float(s) for s in stds))


def apply_scaler(scaler, dataset):
    Z = scaler.transform(dataset.X)
    samples = tuple(replace(s, features=FeatureVector(*(float(v) for v in row))) for s, row in zip(dataset.samples, Z))
    return Dataset(samples, dataset.feature_names)


# ---------------------------------------------------------------------------
# CSV


def _fmt(x):
    return format(float(x), ".17g")


def dataset_to_csv_text(dataset):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for s in dataset.samples:
        w.writerow(
            [s.workload, s.config_id, s.interval_id, *(_fmt(v) for v in s.features), _fmt(s.ipc),
             "true" if s.normalized else "false"]
        )
    return buf.getvalue()


def write_csv(dataset, path):
    Path(path).write_text(dataset_to_csv_text(dataset), encoding="utf-8")


def _parse_float(cell, row, col):
    try:
        v = float(cell)
    except ValueError:
        raise CsvFormatError(f"column {col}: non-numeric cell {cell!r}", row=row) from None
    if not math.isfinite(v):
        raise CsvFormatError(f"column {col}: non-finite cell {cell!r}", row=row)
    return v


def dataset_from_csv_text(text):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise CsvFormatError("empty file")
    header = rows[0]
    for i, expected in enumerate(CSV_COLUMNS):
        got = header[i] if i < len(header) else None
        if got != expected:
            raise CsvFormatError(f"header column {i + 1} is {got!r}, expected {expected!r}", row=1)
    if len(header) > len(CSV_COLUMNS):
        raise CsvFormatError(f"unexpected extra column {header[len(CSV_COLUMNS)]!r}", row=1)

    samples = []
    for rownum, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(CSV_COLUMNS):
            raise CsvFormatError(f"expected {len(CSV_COLUMNS)} cells, got {len(row)}", row=rownum)
        workload, config_id, interval_id = row[:3]
        feats = [_parse_float(c, rownum, name) for c, name in zip(row[3:12], FEATURE_NAMES)]
        if any(v < 0 for v in feats):
            raise CsvFormatError("negative feature value", row=rownum)
        ipc = _parse_float(row[12], rownum, "ipc")
        flag = row[13].strip().lower()
        if flag not in ("true", "false"):
            raise CsvFormatError(f"normalized must be true or false, got {row[13]!r}", row=rownum)
        try:
            samples.append(LabeledSample(FeatureVector(*feats), ipc, workload, config_id, interval_id, flag == "true"))
        except DatasetError as exc:
            raise CsvFormatError(str(exc), row=rownum) from None
    try:
        return Dataset(tuple(samples))
    except DatasetError as exc:
        raise CsvFormatError(str(exc)) from None


def read_csv(path):
    return dataset_from_csv_text(Path(path).read_text(encoding="utf-8"))
