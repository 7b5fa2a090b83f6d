"""Parse gem5 ``stats.txt`` dumps and turn them into labeled samples.

The stat-name to feature mapping is data: it lives in a JSON mapping file
(see ``data/default_mapping.json`` for modern O3CPU names) so that gem5
naming drift never needs a code change.
"""

import json
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .dataset import COUNT_FEATURES, FeatureVector, LabeledSample
from .errors import (
    IngestError,
    ManifestError,
    MappingError,
    StatsParseError,
    TargetExtractionError,
)

SCHEMA_VERSION = 1

BEGIN_MARK = "---------- Begin Simulation Statistics"
END_MARK = "---------- End Simulation Statistics"

_NUMBER = re.compile(r"[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_NONFINITE = re.compile(r"[+-]?(?:nan|inf|infinity)", re.IGNORECASE)


@dataclass(frozen=True)
class StatsDump:
    dump_index: int
    values: dict
    n_excluded: int = 0

    def __getitem__(self, name):
        return self.values[name]

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class SystemConfig:
    config_id: str
    pipeline_width: int
    rob_entries: int
    l1i_kb: int
    l1d_kb: int
    l2_kb: int
    dram_device: str = "DDR4_2400"
    n_cores: int = 8

    def __post_init__(self):
        for name in ("pipeline_width", "rob_entries", "l1i_kb", "l1d_kb", "l2_kb", "n_cores"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise ManifestError(f"config {self.config_id!r}: {name} must be a positive integer, got {value!r}")

    @classmethod
    def from_dict(cls, d, config_id=None):
        d = dict(d)
        if config_id is not None:
            d.setdefault("config_id", config_id)
        try:
            return cls(**d)
        except TypeError as exc:
            raise ManifestError(f"bad system config {d!r}: {exc}") from None


# Preset system configurations (8 cores, OoO). Sizes in KiB.
PRESETS = {
    "baseline": SystemConfig("baseline", pipeline_width=8, rob_entries=192, l1i_kb=32, l1d_kb=512, l2_kb=8192),
    "aggressive": SystemConfig("aggressive", pipeline_width=16, rob_entries=384, l1i_kb=64, l1d_kb=1024, l2_kb=16384),
    "lean": SystemConfig("lean", pipeline_width=4, rob_entries=96, l1i_kb=16, l1d_kb=256, l2_kb=4096),
}


# ---------------------------------------------------------------------------
# stats.txt grammar


def _parse_value(token, lineno):
    if _NUMBER.fullmatch(token):
        return float(token)
    if _NONFINITE.fullmatch(token):
        return None
    raise StatsParseError(f"malformed value token {token!r}", line=lineno)


def parse_stats_file(content):
    """Split ``content`` into dumps.

    Sections are delimited by ``Begin/End Simulation Statistics`` marker
    lines; a file without markers is a single dump. Each stat line is
    ``<name> <value> [...] [# comment]``; only the first token after the
    name is read. Entries whose value is nan/inf are dropped and counted in
    ``StatsDump.n_excluded``.
    """
    if isinstance(content, (bytes, bytearray)):
        return parse_stats_bytes(content)
    lines = content.splitlines()
    has_marks = False
    depth = 0
    for lineno, raw in enumerate(lines, start=1):
        if raw.startswith(BEGIN_MARK):
            has_marks = True
            depth += 1
            if depth > 1:
                raise StatsParseError(f"Begin marker at line {lineno} inside an open section")
        elif raw.startswith(END_MARK):
            has_marks = True
            depth -= 1
            if depth < 0:
                raise StatsParseError(f"End marker at line {lineno} without matching Begin")
    if depth:
        raise StatsParseError("last Begin marker is never closed")

    dumps = []
    current = None if has_marks else {}
    excluded = 0
    begin_line = None
    for lineno, raw in enumerate(lines, start=1):
        if raw.startswith(BEGIN_MARK):
            if current is not None:
                raise StatsParseError(f"Begin marker at line {lineno} inside open section from line {begin_line}")
            current, excluded, begin_line = {}, 0, lineno
            continue
        if raw.startswith(END_MARK):
            if current is None:
                raise StatsParseError(f"End marker at line {lineno} without matching Begin")
            dumps.append(StatsDump(len(dumps), current, excluded))
            current = None
            continue
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        if current is None:
            raise StatsParseError("stat line outside a Begin/End section", line=lineno)
        tokens = text.split()
        if len(tokens) < 2:
            raise StatsParseError(f"stat {tokens[0]!r} has no value", line=lineno)
        name = tokens[0]
        value = _parse_value(tokens[1], lineno)
        if name in current:
            raise StatsParseError(f"duplicate stat {name!r}", line=lineno)
        if value is None:
            excluded += 1
            continue
        current[name] = value

    if has_marks:
        if current is not None:
            raise StatsParseError(f"section opened at line {begin_line} is never closed")
    else:
        dumps.append(StatsDump(0, current, excluded))
    return dumps


def parse_stats_bytes(data):
    try:
        text = bytes(data).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise StatsParseError(f"stats file is not valid UTF-8 ({exc.reason} at byte {exc.start})") from None
    return parse_stats_file(text)


def format_stats(dumps):
    """Write dumps back out in the stats.txt line grammar."""
    out = []
    for dump in dumps:
        out.append(BEGIN_MARK + " ----------")
        out.append("")
        for name, value in dump.values.items():
            out.append(f"{name} {float(value)!r}")
        out.append("")
        out.append(END_MARK + " ----------")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# name patterns and mapping


@lru_cache(maxsize=None)
def compile_pattern(pattern):
    """Translate a stat glob into a regex.

    ``*`` matches a run of non-dot characters, ``**`` any run including
    dots. Every other character is literal.
    """
    if "***" in pattern:
        raise MappingError(f"pattern {pattern!r}: only '*' and '**' wildcards are allowed")
    parts = re.split(r"(\*\*|\*)", pattern)
    rx = []
    for part in parts:
        if part == "**":
            rx.append(".*")
        elif part == "*":
            rx.append("[^.]*")
        else:
            rx.append(re.escape(part))
    return re.compile("".join(rx))


def match_stats(values, patterns):
    """Return the values of every stat matched by any of ``patterns``."""
    regexes = [compile_pattern(p) for p in patterns]
    return [v for name, v in values.items() if any(r.fullmatch(name) for r in regexes)]


@dataclass(frozen=True)
class FeatureRule:
    name: str
    patterns: tuple
    aggregation: str = "sum"


@dataclass(frozen=True)
class TargetRule:
    numerator: tuple
    denominator: tuple
    denominator_aggregation: str = "max"


@dataclass(frozen=True)
class StatMapping:
    feature_rules: tuple
    target_rule: TargetRule

    def __post_init__(self):
        names = [r.name for r in self.feature_rules]
        missing = [f for f in COUNT_FEATURES if f not in names]
        if missing:
            raise MappingError(f"mapping has no rule for {', '.join(missing)}")
        for rule in self.feature_rules:
            if not rule.patterns:
                raise MappingError(f"feature {rule.name!r} has no patterns")
            if rule.aggregation != "sum":
                raise MappingError(f"feature {rule.name!r}: unsupported aggregation {rule.aggregation!r}")
            for p in rule.patterns:
                compile_pattern(p)
        t = self.target_rule
        if not t.numerator or not t.denominator:
            raise MappingError("target rule needs numerator and denominator patterns")
        if t.denominator_aggregation not in ("max", "mean"):
            raise MappingError(f"denominator_aggregation must be 'max' or 'mean', got {t.denominator_aggregation!r}")

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise MappingError("mapping document must be an object")
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise MappingError(f"unsupported mapping schema_version {doc.get('schema_version')!r}")
        try:
            rules = tuple(
                FeatureRule(r["name"], tuple(r["patterns"]), r.get("aggregation", "sum")) for r in doc["features"]
            )
            t = doc["target"]
            target = TargetRule(tuple(t["numerator"]), tuple(t["denominator"]), t.get("denominator_aggregation", "max"))
        except (KeyError, TypeError) as exc:
            raise MappingError(f"malformed mapping document: {exc!r}") from None
        return cls(rules, target)

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "features": [
                {"name": r.name, "patterns": list(r.patterns), "aggregation": r.aggregation} for r in self.feature_rules
            ],
            "target": {
                "numerator": list(self.target_rule.numerator),
                "denominator": list(self.target_rule.denominator),
                "denominator_aggregation": self.target_rule.denominator_aggregation,
            },
        }


def load_mapping(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MappingError(f"{path}: {exc}") from None
    return StatMapping.from_dict(doc)


def default_mapping():
    text = resources.files("ipcpred.data").joinpath("default_mapping.json").read_text(encoding="utf-8")
    return StatMapping.from_dict(json.loads(text))


MISSING = None


def apply_mapping(dump, mapping):
    """Sum matched stats per feature; features with no match map to ``MISSING``."""
    values = dump.values if isinstance(dump, StatsDump) else dump
    result = {}
    for rule in mapping.feature_rules:
        matched = match_stats(values, rule.patterns)
        result[rule.name] = math.fsum(matched) if matched else MISSING
    return result


def extract_target(dump, mapping, entry=None):
    """System IPC: summed committed instructions over the slowest core's cycles."""
    values = dump.values if isinstance(dump, StatsDump) else dump
    where = f" for {entry}" if entry else ""
    rule = mapping.target_rule
    num = match_stats(values, rule.numerator)
    den = match_stats(values, rule.denominator)
    if not num:
        raise TargetExtractionError(f"no instruction-count stats matched{where}")
    if not den:
        raise TargetExtractionError(f"no cycle-count stats matched{where}")
    cycles = max(den) if rule.denominator_aggregation == "max" else math.fsum(den) / len(den)
    if cycles <= 0:
        raise TargetExtractionError(f"cycle count is zero{where}")
    return math.fsum(num) / cycles


# ---------------------------------------------------------------------------
# manifests and record building


@dataclass(frozen=True)
class RunEntry:
    workload: str
    interval_id: str
    stats_path: Path
    dump_index: int
    config: SystemConfig

    def label(self):
        return f"{self.workload}/{self.interval_id}/{self.config.config_id}"


@dataclass(frozen=True)
class RunManifest:
    entries: tuple

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            key = (e.workload, e.interval_id, e.config.config_id)
            if key in seen:
                raise ManifestError(f"duplicate manifest entry {key}")
            seen.add(key)

    @classmethod
    def from_dict(cls, doc, base_dir="."):
        if not isinstance(doc, dict):
            raise ManifestError("manifest document must be an object")
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ManifestError(f"unsupported manifest schema_version {doc.get('schema_version')!r}")
        configs = dict(PRESETS)
        for cid, cdoc in (doc.get("configs") or {}).items():
            configs[cid] = SystemConfig.from_dict(cdoc, config_id=cid)
        entries = []
        try:
            for e in doc["entries"]:
                cfg = e["config"]
                if isinstance(cfg, str):
                    if cfg not in configs:
                        raise ManifestError(f"unknown config {cfg!r}")
                    cfg = configs[cfg]
                else:
                    cfg = SystemConfig.from_dict(cfg)
                entries.append(
                    RunEntry(
                        workload=str(e["workload"]),
                        interval_id=str(e["interval_id"]),
                        stats_path=Path(base_dir) / e["stats_path"],
                        dump_index=int(e.get("dump_index", 0)),
                        config=cfg,
                    )
                )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ManifestError):
                raise
            raise ManifestError(f"malformed manifest entry: {exc!r}") from None
        return cls(tuple(entries))


def load_manifest(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: {exc}") from None
    return RunManifest.from_dict(doc, base_dir=path.parent)


@dataclass
class IngestReport:
    """Entries that did not become samples.

    ``dropped`` holds data problems (missing features, unusable target);
    ``errors`` holds I/O and parse failures.
    """

    dropped: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def summary(self):
        lines = [f"dropped {entry}: {reason}" for entry, reason in self.dropped]
        lines += [f"error {entry}: {reason}" for entry, reason in self.errors]
        return lines


def build_records(manifest, mapping):
    """Build one LabeledSample per usable manifest entry.

    Returns ``(samples, report)``. Raises ``IngestError`` when nothing
    usable remains.
    """
    report = IngestReport()
    samples = []
    parsed = {}
    for entry in manifest.entries:
        label = entry.label()
        path = entry.stats_path
        if path not in parsed:
            try:
                parsed[path] = parse_stats_bytes(path.read_bytes())
            except OSError as exc:
                parsed[path] = exc
            except StatsParseError as exc:
                parsed[path] = exc
        dumps = parsed[path]
        if isinstance(dumps, Exception):
            report.errors.append((label, f"{path}: {dumps}"))
            continue
        if not 0 <= entry.dump_index < len(dumps):
            report.errors.append((label, f"{path}: dump_index {entry.dump_index} out of range ({len(dumps)} dumps)"))
            continue
        dump = dumps[entry.dump_index]

        counts = apply_mapping(dump, mapping)
        missing = [name for name in COUNT_FEATURES if counts.get(name) is MISSING]
        if missing:
            report.dropped.append((label, ", ".join(f"{m} missing" for m in missing)))
            continue
        if counts["numInsts"] <= 0:
            report.dropped.append((label, "numInsts is zero"))
            continue
        try:
            ipc = extract_target(dump, mapping, entry=label)
        except TargetExtractionError as exc:
            report.dropped.append((label, str(exc)))
            continue
        if ipc <= 0:
            report.dropped.append((label, "ipc is not positive"))
            continue

        cfg = entry.config
        fv = FeatureVector(
            numLoadInsts=counts["numLoadInsts"],
            numStoreInsts=counts["numStoreInsts"],
            numInsts=counts["numInsts"],
            numBranches=counts["numBranches"],
            numOps=counts["numOps"],
            l1i_kb=float(cfg.l1i_kb),
            l1d_kb=float(cfg.l1d_kb),
            l2_kb=float(cfg.l2_kb),
            pipeline_width=float(cfg.pipeline_width),
        )
        samples.append(LabeledSample(fv, ipc, entry.workload, cfg.config_id, entry.interval_id, False))

    if not samples:
        detail = "; ".join(report.summary()) or "manifest is empty"
        raise IngestError(f"no valid samples ({detail})")
    return samples, report
