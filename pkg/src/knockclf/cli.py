"""Command-line entry point: ``knockclf <subcommand> ...``.

Stages hand off through files (manifest CSV, KNF1 features, checkpoint,
report JSON). Every run writes its resolved configuration to
``<out-dir>/config.json``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .audio import Manifest, synth_dataset
from .augment import ProceduralConfig, plan_and_augment
from .errors import KnockError
from .features import MfccConfig, StftConfig, featurize_manifest, read_features, write_features
from .neural import CELLS, ModelConfig, load_checkpoint, save_checkpoint
from .pipeline import (
    PUBLISHED_MODELS,
    SplitConfig,
    TrainLog,
    baseline_linear,
    compare_models,
    comparison_vector,
    confusion,
    fit,
    kfold_indices,
    metrics,
    outlier_filter,
    predict_features,
    split_indices,
    verdict,
)
from .pipeline.metrics import MetricsReport

log = logging.getLogger("knockclf")

REPORT_VERSION = 1


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Configuration


def _int_triple(text: str) -> tuple:
    try:
        parts = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated integers, got {text!r}")
    if len(parts) != 3 or min(parts) < 0:
        raise argparse.ArgumentTypeError(f"expected three non-negative integers, got {text!r}")
    return parts


def load_overrides(path) -> dict:
    """JSON object with optional sections ``model``, ``features``, ``split``, ``augment``."""
    if path is None:
        return {}
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    data = json.loads(path.read_text())
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be an object")
    unknown = set(data) - {"model", "features", "split", "augment"}
    if unknown:
        raise ValueError(f"{path}: unknown sections {sorted(unknown)}")
    return data


def feature_config(overrides: dict, n_frames=None) -> MfccConfig:
    section = dict(overrides.get("features", {}))
    stft = StftConfig(**{k: section.pop(k) for k in ("frame_len", "hop") if k in section})
    cfg = MfccConfig(stft=stft, **section)
    if n_frames is not None:
        cfg = replace(cfg, n_frames=n_frames)
    return cfg


def feature_config_dict(cfg: MfccConfig) -> dict:
    d = asdict(cfg)
    stft = d.pop("stft")
    return {**stft, **d}


def model_config(overrides: dict, args) -> ModelConfig:
    cfg = ModelConfig.from_dict({**ModelConfig().to_dict(), **overrides.get("model", {})})
    changes = {}
    if getattr(args, "cell", None):
        changes["cell"] = args.cell
    if getattr(args, "epochs", None) is not None:
        changes["epochs"] = args.epochs
    return replace(cfg, **changes)


def split_config(overrides: dict, args) -> SplitConfig:
    d = {"seed": args.seed, **overrides.get("split", {})}
    if getattr(args, "k", None) is not None:
        d["k_folds"] = args.k
    return SplitConfig(**d)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def record_config(out_dir: Path, command: str, **sections) -> None:
    write_json(out_dir / "config.json", {"version": REPORT_VERSION, "command": command, **sections})


def out_dir_of(args) -> Path:
    if args.out_dir is None:
        raise UsageError("--out-dir is required")
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def read_manifest(args) -> Manifest:
    if args.manifest is None:
        raise UsageError("--manifest is required")
    return Manifest.read(args.manifest)


def load_features(manifest: Manifest, fcfg: MfccConfig, path=None):
    """Featurize the manifest, or read a KNF1 file aligned with it."""
    if path is None:
        log.info("featurizing %d clips", len(manifest))
        return featurize_manifest(manifest, fcfg)
    X, y = read_features(path)
    if len(X) != len(manifest) or not np.array_equal(y, manifest.labels):
        raise ValueError(f"{path}: feature records do not line up with the manifest")
    if X.shape[1:] != (fcfg.n_coeffs, fcfg.n_frames):
        raise ValueError(f"{path}: feature shape {X.shape[1:]} does not match the configured {(fcfg.n_coeffs, fcfg.n_frames)}")
    return X, y


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth(args) -> int:
    out = out_dir_of(args)
    m = synth_dataset(args.counts, out, args.seed)
    m.write(out / "manifest.csv")
    record_config(out, "synth", seed=args.seed, counts=list(args.counts))
    print(f"wrote {len(m)} clips to {out / 'manifest.csv'}")
    return 0


def cmd_augment(args) -> int:
    overrides = load_overrides(args.config)
    section = overrides.get("augment", {})
    manifest = read_manifest(args)
    out = out_dir_of(args)
    targets = args.targets or tuple(section.get("targets", manifest.counts()))
    ratio = args.ratio if args.ratio is not None else section.get("audiomentation_ratio", 0.5)
    proc = ProceduralConfig(**{k: tuple(v) if k == "cutoff_range" else v for k, v in section.get("procedural", {}).items()})
    merged = plan_and_augment(manifest, targets, args.seed, out, ratio, proc)
    merged.rebased(out).write(out / "manifest.csv")
    record_config(out, "augment", seed=args.seed, manifest=str(args.manifest), targets=list(targets),
                  audiomentation_ratio=ratio, procedural=asdict(proc))
    print(f"wrote manifest with counts {merged.counts()} to {out / 'manifest.csv'}")
    return 0


def cmd_features(args) -> int:
    overrides = load_overrides(args.config)
    fcfg = feature_config(overrides, args.n_frames)
    manifest = read_manifest(args)
    out = out_dir_of(args)
    X, y = featurize_manifest(manifest, fcfg)
    write_features(out / "features.knf", X, y)
    record_config(out, "features", manifest=str(args.manifest), features=feature_config_dict(fcfg))
    print(f"wrote {len(X)} feature tensors of shape {X.shape[1:]} to {out / 'features.knf'}")
    return 0


def _partition(manifest: Manifest, scfg: SplitConfig, val_fraction: float):
    """Hold-out test split, then a validation split carved from the training portion."""
    labels = manifest.labels
    train_all, test = split_indices(labels, scfg.test_fraction, scfg.seed, scfg.stratified)
    tr, va = split_indices(labels[train_all], val_fraction, scfg.seed + 1, scfg.stratified)
    return train_all[tr], train_all[va], test


def cmd_train(args) -> int:
    overrides = load_overrides(args.config)
    mcfg = model_config(overrides, args)
    fcfg = feature_config(overrides, args.n_frames)
    scfg = split_config(overrides, args)
    if mcfg.in_channels != fcfg.n_coeffs:
        raise ValueError(f"model expects {mcfg.in_channels} channels but features have {fcfg.n_coeffs} coefficients")
    manifest = read_manifest(args)
    out = out_dir_of(args)
    X, y = load_features(manifest, fcfg, args.features)

    train, val, test = _partition(manifest, scfg, args.val_fraction)
    dropped = []
    if args.outlier_filter:
        keep = outlier_filter(X[train], y[train])
        dropped = train[~keep].tolist()
        train = train[keep]
    for name, idx in (("train", train), ("val", val), ("test", test)):
        manifest.subset(idx).rebased(out).write(out / f"{name}_manifest.csv")

    record_config(out, "train", seed=args.seed, manifest=str(args.manifest), model=mcfg.to_dict(),
                  features=feature_config_dict(fcfg), split=asdict(scfg), val_fraction=args.val_fraction,
                  outlier_filter=args.outlier_filter, baseline=args.baseline)

    def progress(epoch, history):
        log.info("epoch %d: train %.4f val %.4f", epoch, history.train_loss[-1], history.val_loss[-1])

    ckpt, history = fit(X[train], y[train], X[val], y[val], mcfg, args.seed, progress)
    ckpt.metadata["features"] = feature_config_dict(fcfg)
    ckpt.metadata["outliers_dropped"] = len(dropped)
    save_checkpoint(ckpt, out / "model.ckpt")
    history.write_csv(out / "trainlog.csv")
    summary = f"{mcfg.cell}: best epoch {history.best_epoch}, best val loss {history.best_validation_loss:.4f}"

    if args.baseline:
        tr_acc, te_acc = baseline_linear(X[train], y[train], X[test], y[test], seed=args.seed)
        write_json(out / "baseline.json", {
            "version": REPORT_VERSION,
            "train_accuracy": tr_acc,
            "test_accuracy": te_acc,
            "reference_train_accuracy": 96.12,
            "reference_test_accuracy": 93.98,
        })
        summary += f"; linear baseline train {tr_acc:.2f}% test {te_acc:.2f}%"
    print(summary)
    return 0


def _features_for_checkpoint(ckpt) -> MfccConfig:
    saved = dict(ckpt.metadata.get("features", {}))
    stft = StftConfig(**{k: saved.pop(k) for k in ("frame_len", "hop") if k in saved})
    return MfccConfig(stft=stft, **saved)


def report_for(ckpt, X, y, which: str = "best") -> MetricsReport:
    pred = predict_features(ckpt, X, which)
    return metrics(confusion(zip(y.tolist(), pred.tolist())))


def write_report(out: Path, report: MetricsReport, stem: str = "metrics") -> None:
    write_json(out / f"{stem}.json", report.to_dict())
    with open(out / f"{stem.replace('metrics', 'confusion')}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true\\pred", "0", "1", "2"])
        for label, row in enumerate(report.confusion.counts.tolist()):
            w.writerow([label] + row)


def _print_table(report: MetricsReport) -> None:
    print(f"{'accuracy':>16} {report.accuracy:7.2f}")
    print(f"{'precision_macro':>16} {report.precision_macro:7.2f}")
    print(f"{'recall_macro':>16} {report.recall_macro:7.2f}")
    print(f"{'f1_macro':>16} {report.f1_macro:7.2f}")


def cmd_eval(args) -> int:
    if args.checkpoint is None:
        raise UsageError("--checkpoint is required")
    ckpt = load_checkpoint(args.checkpoint)
    manifest = read_manifest(args)
    out = out_dir_of(args)
    fcfg = _features_for_checkpoint(ckpt)
    X, y = load_features(manifest, fcfg, args.features)
    report = report_for(ckpt, X, y, args.weights)
    report.extra = {"model": ckpt.cell, "weights": args.weights, "n_clips": len(y)}
    write_report(out, report)
    record_config(out, "eval", checkpoint=str(args.checkpoint), manifest=str(args.manifest), weights=args.weights)
    _print_table(report)
    return 0


def _load_report(path) -> MetricsReport:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"report not found: {path}")
    return MetricsReport.from_dict(json.loads(path.read_text()))


def comparison(report_a, report_b, name_a: str, name_b: str, include_class_recall: bool = False) -> dict:
    p = compare_models(report_a, report_b, include_class_recall)
    return {
        "version": REPORT_VERSION,
        "model_a": name_a,
        "model_b": name_b,
        "indicators_a": list(comparison_vector(report_a, include_class_recall)),
        "indicators_b": list(comparison_vector(report_b, include_class_recall)),
        "include_class_recall": include_class_recall,
        "p_value": p,
        "verdict": verdict(p),
    }


def cmd_compare(args) -> int:
    a, b = _load_report(args.report_a), _load_report(args.report_b)
    name_a = args.name_a or a.extra.get("model", Path(args.report_a).stem)
    name_b = args.name_b or b.extra.get("model", Path(args.report_b).stem)
    result = comparison(a, b, name_a, name_b, args.with_class_recall)
    if args.reference:
        deep = [a.accuracy, a.f1_macro, b.accuracy, b.f1_macro]
        classical = [v for k in ("ann", "rf", "svm") for v in PUBLISHED_MODELS[k]]
        p = compare_models(deep, classical)
        result["reference"] = {"deep": deep, "classical": classical, "p_value": p, "verdict": verdict(p)}
    out = out_dir_of(args)
    write_json(out / "comparison.json", result)
    record_config(out, "compare", report_a=str(args.report_a), report_b=str(args.report_b),
                  with_class_recall=args.with_class_recall, reference=args.reference)
    print(f"p = {result['p_value']:.4f}: {result['verdict']}")
    return 0


def cmd_kfold(args) -> int:
    overrides = load_overrides(args.config)
    mcfg = model_config(overrides, args)
    fcfg = feature_config(overrides, args.n_frames)
    scfg = split_config(overrides, args)
    manifest = read_manifest(args)
    out = out_dir_of(args)
    X, y = load_features(manifest, fcfg, args.features)
    record_config(out, "kfold", seed=args.seed, manifest=str(args.manifest), model=mcfg.to_dict(),
                  features=feature_config_dict(fcfg), split=asdict(scfg))

    folds = []
    for j, (tr, va) in enumerate(kfold_indices(y, scfg.k_folds, scfg.seed)):
        ckpt, history = fit(X[tr], y[tr], X[va], y[va], mcfg, args.seed + j)
        report = report_for(ckpt, X[va], y[va])
        write_report(out, report, f"metrics_fold{j}")
        history.write_csv(out / f"trainlog_fold{j}.csv")
        folds.append({"fold": j, "accuracy": report.accuracy, "f1_macro": report.f1_macro,
                      "best_epoch": history.best_epoch, "best_val_loss": history.best_validation_loss})
        print(f"fold {j}: accuracy {report.accuracy:.2f}")
    accs = [f["accuracy"] for f in folds]
    summary = {
        "version": REPORT_VERSION,
        "model": mcfg.cell,
        "k": scfg.k_folds,
        "folds": folds,
        "mean_accuracy": float(np.mean(accs)),
        "std_accuracy": float(np.std(accs)),
        "best_fold": int(np.argmax(accs)),
        "best_accuracy": float(np.max(accs)),
    }
    write_json(out / "kfold.json", summary)
    print(f"mean accuracy {summary['mean_accuracy']:.2f}, best fold {summary['best_fold']} ({summary['best_accuracy']:.2f})")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--out-dir", help="directory for outputs")
    common.add_argument("--manifest", help="input manifest CSV")
    common.add_argument("--config", help="JSON file with model/features/split/augment overrides")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="knockclf", description="Knock-sound maturity classification pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic knocks")
    p.add_argument("--counts", type=_int_triple, required=True, help="clips per class, e.g. 24,108,255")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("augment", parents=[common], help="grow a manifest to per-class targets")
    p.add_argument("--targets", type=_int_triple, help="target counts, e.g. 4050,4050,5850")
    p.add_argument("--ratio", type=float, help="fraction of clips from audiomentation (rest procedural); default 0.5")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("features", parents=[common], help="write MFCC tensors as a KNF1 file")
    p.add_argument("--n-frames", type=int, help="frames per tensor (default 64)")
    p.set_defaults(func=cmd_features)

    for name, func, text in (("train", cmd_train, "train one model on a 90/10 split"),
                             ("kfold", cmd_kfold, "stratified k-fold cross-validation")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--cell", choices=CELLS, default="rnn")
        p.add_argument("--epochs", type=int, help="override the epoch count (default 60)")
        p.add_argument("--n-frames", type=int, help="frames per tensor (default 64)")
        p.add_argument("--features", help="precomputed KNF1 file aligned with the manifest")
        p.set_defaults(func=func)
    train_p = sub.choices["train"]
    train_p.add_argument("--val-fraction", type=float, default=0.1, help="share of the training portion held for validation")
    train_p.add_argument("--baseline", action="store_true", help="also fit the flattened linear baseline")
    train_p.add_argument("--outlier-filter", action="store_true", help="drop per-class norm outliers from training")
    sub.choices["kfold"].add_argument("--k", type=int, help="number of folds (default 5)")

    p = sub.add_parser("eval", parents=[common], help="score a checkpoint on a manifest")
    p.add_argument("--checkpoint", help="model checkpoint")
    p.add_argument("--weights", choices=("best", "final"), default="best")
    p.add_argument("--features", help="precomputed KNF1 file aligned with the manifest")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", parents=[common], help="Welch t-test between two metrics reports")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument("--name-a")
    p.add_argument("--name-b")
    p.add_argument("--with-class-recall", action="store_true", help="append per-class recalls to each sample")
    p.add_argument("--reference", action="store_true", help="also test both models against the published classical-model scores")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (KnockError, OSError, ValueError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"knockclf {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
