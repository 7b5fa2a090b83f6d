"""Command-line entry point: ingest | synth -> train -> evaluate -> importance -> report.

Exit codes: 0 success, 1 usage error, 2 input/parse error, 3 numeric or
training failure. Diagnostics go to stderr as ``ipcpred: error: ...`` lines.
"""

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import _docfmt
from .dataset import Dataset, SplitSpec, dataset_to_csv_text, normalize_dataset, read_csv, split_indices
from .errors import IpcPredError, NumericFailure, WrongModelKindError
from .evaluation import (
    EvalReport,
    ImportanceReport,
    evaluate,
    impurity_importance,
    permutation_importance,
    write_report,
)
from .models import fit, load_model, save_model
from .report import FigureSpec, render
from .stats_ingest import build_records, default_mapping, load_manifest, load_mapping
from .synth import GeneratorConfig, OracleParams, generate

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

SPLIT_SCHEMA_VERSION = 1
EVAL_FILE = "eval.json"
IMPORTANCE_FILE = "importance.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"ipcpred: error: {message}\n")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def default_split_record(model_path):
    return Path(model_path).with_suffix(".split.json")


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(args):
    mapping = load_mapping(args.mapping) if args.mapping else default_mapping()
    manifest = load_manifest(args.manifest)
    samples, report = build_records(manifest, mapping)
    for line in report.summary():
        print(f"ipcpred: {line}", file=sys.stderr)
    if report.errors:
        raise IpcPredError(f"{len(report.errors)} manifest entries could not be read")
    Path(args.out).write_text(dataset_to_csv_text(Dataset(tuple(samples))), encoding="utf-8")
    print(f"wrote {len(samples)} samples to {args.out} ({len(report.dropped)} dropped)")


def cmd_synth(args):
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    if args.sigma < 0:
        raise UsageError("--sigma must be >= 0")
    gen = GeneratorConfig(n_samples=args.n, grid=args.grid, seed=args.seed)
    ds = generate(gen, OracleParams(sigma=args.sigma, seed=args.seed))
    Path(args.out).write_text(dataset_to_csv_text(ds), encoding="utf-8")
    print(f"wrote {len(ds)} samples to {args.out}")


def _hyperparameters(args):
    if args.model == "forest":
        hp = {
            "n_trees": args.n_trees,
            "max_depth": args.max_depth,
            "min_samples_split": args.min_samples_split,
            "min_samples_leaf": args.min_samples_leaf,
            "max_features": args.max_features,
            "bootstrap": not args.no_bootstrap,
        }
    elif args.model == "svr":
        hp = {"epsilon": args.epsilon, "lam": args.lam, "epochs": args.epochs, "eta0": args.eta0}
    else:
        hp = {}
    return hp


def cmd_train(args):
    try:
        spec = SplitSpec.parse(args.split, seed=args.seed)
    except IpcPredError as exc:
        raise UsageError(str(exc)) from None
    ds = read_csv(args.dataset)
    if len(ds) == 0:
        raise IpcPredError(f"{args.dataset} holds no samples")
    if args.normalize_per_inst:
        ds = normalize_dataset(ds)
    train_idx, test_idx = split_indices(ds, spec)
    try:
        model = fit(args.model, ds.subset(train_idx), seed=args.seed, threads=args.threads, **_hyperparameters(args))
    except ValueError as exc:
        if isinstance(exc, IpcPredError):
            raise
        raise UsageError(str(exc)) from None
    save_model(model, args.out)
    record = {
        "schema_version": SPLIT_SCHEMA_VERSION,
        "split_spec": str(spec),
        "seed": args.seed,
        "normalize_per_inst": bool(args.normalize_per_inst),
        "dataset_sha256": _sha256(args.dataset),
        "n_samples": len(ds),
        "train_indices": train_idx,
        "test_indices": test_idx,
    }
    record_path = Path(args.split_out) if args.split_out else default_split_record(args.out)
    record_path.write_text(_docfmt.dumps(record), encoding="utf-8")
    print(f"trained {args.model} on {len(train_idx)} samples; model -> {args.out}, split -> {record_path}")


def _load_partition(args, model):
    """Dataset partition referenced by the split record (or the whole file)."""
    ds = read_csv(args.dataset)
    record_path = Path(args.split_record) if args.split_record else default_split_record(args.model)
    if args.split_record or record_path.exists():
        try:
            record = json.loads(record_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise IpcPredError(f"{record_path}: {exc}") from None
        if record.get("schema_version") != SPLIT_SCHEMA_VERSION:
            raise IpcPredError(f"{record_path}: unsupported split record version")
        if record["dataset_sha256"] != _sha256(args.dataset):
            raise IpcPredError(f"{args.dataset} is not the dataset the split record was made from")
        if record["normalize_per_inst"]:
            ds = normalize_dataset(ds)
        indices = record["train_indices" if args.partition == "train" else "test_indices"]
        return ds.subset(indices), record["split_spec"]
    return ds, None


def cmd_evaluate(args):
    model = load_model(args.model)
    part, spec = _load_partition(args, model)
    rep = evaluate(model, part, split_spec=spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(rep, out / EVAL_FILE)
    r2 = "n/a" if rep.r2 is None else f"{rep.r2:.6f}"
    print(f"n={rep.n} rmse={rep.rmse:.6f} mae={rep.mae:.6f} r2={r2}")


def cmd_importance(args):
    model = load_model(args.model)
    if args.method == "impurity":
        try:
            rep = impurity_importance(model)
        except WrongModelKindError as exc:
            raise UsageError(str(exc)) from None
    else:
        part, _ = _load_partition(args, model)
        rep = permutation_importance(model, part, repeats=args.repeats, seed=args.seed, threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(rep, out / IMPORTANCE_FILE)
    (out / "importance.csv").write_text(rep.to_csv_text(), encoding="utf-8")
    for name, s in rep.ranked():
        print(f"{name:16s} {s:.6g}")


def cmd_report(args):
    src = Path(args.eval_dir)
    out = Path(args.out) if args.out else src
    out.mkdir(parents=True, exist_ok=True)
    written = []
    eval_path = src / EVAL_FILE
    imp_path = src / IMPORTANCE_FILE
    if not eval_path.exists() and not imp_path.exists():
        raise IpcPredError(f"{src} holds neither {EVAL_FILE} nor {IMPORTANCE_FILE}")
    if eval_path.exists():
        rep = EvalReport.from_doc(_load_doc(eval_path))
        written += render(FigureSpec("scatter_pred_actual", "Predicted vs. Actual IPC", rep, out))
        written += render(FigureSpec("residuals", "Residual analysis for IPC prediction", rep, out, args.residual_x))
    if imp_path.exists():
        imp = ImportanceReport.from_doc(_load_doc(imp_path))
        written += render(FigureSpec("importance_bars", "Feature importance for IPC prediction", imp, out))
    for p in written:
        print(p)


def _load_doc(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IpcPredError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = _Parser(prog="ipcpred", description="Predict IPC from short-interval simulation statistics.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="worker threads (never changes output bytes)")

    p = sub.add_parser("ingest", parents=[common], help="gem5 stats + manifest -> dataset CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mapping", help="stat mapping JSON (default: shipped O3CPU mapping)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", parents=[common], help="generate a dataset from the synthetic oracle")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", choices=("table1", "extended"), default="extended")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="fit a model and save it with its split record")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", choices=("linear", "svr", "forest"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split-out", help="split record path (default: <out stem>.split.json)")
    p.add_argument("--normalize-per-inst", action="store_true")
    p.add_argument("--split", default="random:0.2", help="random:F | workload:W | config:C")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--min-samples-split", type=int, default=2)
    p.add_argument("--min-samples-leaf", type=int, default=1)
    p.add_argument("--max-features", type=int, default=None)
    p.add_argument("--no-bootstrap", action="store_true")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--lam", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--eta0", type=float, default=0.1)
    p.set_defaults(func=cmd_train)

    def partition_args(p):
        p.add_argument("--model", required=True)
        p.add_argument("--dataset", required=True)
        p.add_argument("--split-record", help="default: <model stem>.split.json when present")
        p.add_argument("--partition", choices=("test", "train"), default="test")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("evaluate", parents=[common], help="RMSE / MAE / R2 and residuals on a partition")
    partition_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("importance", parents=[common], help="permutation or impurity feature importance")
    partition_args(p)
    p.add_argument("--method", choices=("permutation", "impurity"), default="permutation")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("report", parents=[common], help="render SVG figures and CSV companions")
    p.add_argument("--eval-dir", required=True, help="directory holding eval.json and/or importance.json")
    p.add_argument("--out", help="figure directory (default: --eval-dir)")
    p.add_argument("--residual-x", choices=("predicted", "index"), default="predicted")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"ipcpred: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(f"ipcpred: error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except IpcPredError as exc:
        print(f"ipcpred: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"ipcpred: error: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
