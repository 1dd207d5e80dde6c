"""Command-line entry point: ``shakesense <subcommand> [flags]``.

Settings resolve in three layers: built-in defaults, then the JSON file given
by ``--config``, then command-line flags.  ``--desk-scale`` swaps in the
reduced protocol before the file and flags are applied.  The resolved
configuration is written to ``<out>/config.json``; feeding that file back via
``--config`` reproduces the run.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from shakesense import __version__
from shakesense.errors import BadConfig, ShakeSenseError
from shakesense.experiments import (
    ConfusionMatrix,
    NoiseBank,
    RegressionReport,
    extract_features,
    gain_grid,
    make_search_evaluator,
    make_splits,
    mean_baseline,
    material_mean_weights,
    moving_average,
    random_search,
    read_sweep_csv,
    run_classification,
    run_noise_sweep,
    run_regression,
    write_confusion_csv,
    write_gnuplot,
    write_regression_csv,
    write_split_csv,
    write_summary_json,
    write_sweep_csv,
)
from shakesense.mfcc import MfccConfig, save_feature_cache
from shakesense.nn.estimators import RecurrentClassifier, RecurrentRegressor
from shakesense.synth import MATERIALS, DatasetManifest, generate_dataset

logger = logging.getLogger("shakesense")

COMMANDS = ("generate", "features", "train", "eval", "sweep", "search", "report")
TASKS = ("classify", "weigh")

DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "task": "classify",
    "channels": "mix",
    "desk_scale": False,
    "dataset": {"takes_per_capsule": 36},
    "mfcc": {
        "window_ms": 30.0,
        "step_ms": 15.0,
        "n_mel_filters": 40,
        "fft_size": None,
        "window_function": "hamming",
        "log_floor": 1e-10,
        "fmin": 0.0,
        "fmax": None,
    },
    "classify": {"n_coeffs": 21, "cell": "gru", "units": [491, 99]},
    "weigh": {"n_coeffs": 27, "cell": "lstm", "units": [376, 69]},
    "train": {
        "batch_size": 16,
        "patience": 2,
        "max_epochs": 200,
        "learning_rate": 1e-3,
        "gradient_clip": 5.0,
    },
    "experiment": {
        "n_splits": 15,
        "n_test": 80,
        "n_val": 0,
        "confusion_mode": "mean",
        "noise_max": 0.5,
        "noise_step": 0.05,
        "noise_extra_gains": [],
        "noise_test_only": False,
    },
    "search": {"budget": 20, "units_scale": 1.0, "train_fraction": 1.0},
}

DESK_OVERRIDES = {
    "dataset": {"takes_per_capsule": 9},
    "classify": {"units": [64, 16]},
    "weigh": {"units": [64, 16]},
    "train": {"learning_rate": 3e-3},
    "experiment": {"n_splits": 3},
    "search": {"budget": 5, "units_scale": 0.1},
}


def _merge(base: dict, update: dict, where: str = "") -> dict:
    """Recursive merge that rejects keys missing from ``base``."""
    out = copy.deepcopy(base)
    for key, value in update.items():
        if key not in out:
            raise BadConfig(f"unknown configuration key {where}{key!r}")
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise BadConfig(f"configuration key {where}{key!r} must be an object")
            out[key] = _merge(out[key], value, f"{where}{key}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _check_config(cfg: dict) -> dict:
    if cfg["task"] not in TASKS:
        raise BadConfig(f"task must be one of {TASKS}")
    if cfg["channels"] not in ("mix", "left", "right", "stack"):
        raise BadConfig("channels must be mix, left, right or stack")
    exp = cfg["experiment"]
    if exp["confusion_mode"] not in ("mean", "pooled"):
        raise BadConfig("experiment.confusion_mode must be 'mean' or 'pooled'")
    if not 0 < exp["noise_step"] <= 1 or not 0 <= exp["noise_max"] <= 1:
        raise BadConfig("noise_step must be in (0, 1] and noise_max in [0, 1]")
    if any(not 0 <= g <= 1 for g in exp["noise_extra_gains"]):
        raise BadConfig("noise_extra_gains must lie in [0, 1]")
    for task in TASKS:
        if len(cfg[task]["units"]) < 1 or any(int(u) < 1 for u in cfg[task]["units"]):
            raise BadConfig(f"{task}.units must be a non-empty list of positive counts")
    try:
        for task in TASKS:
            MfccConfig(n_coeffs=cfg[task]["n_coeffs"], **cfg["mfcc"])
    except (TypeError, ValueError) as exc:
        raise BadConfig(f"invalid mfcc settings: {exc}") from exc
    return cfg


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then ``--desk-scale`` preset, then config file, then flags."""
    file_cfg = {}
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise BadConfig(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise BadConfig("config file must contain a JSON object")
        file_cfg.pop("command", None)
        file_cfg.pop("version", None)
        file_cfg.pop("paths", None)
    desk = bool(args.desk_scale) or bool(file_cfg.get("desk_scale", False))
    cfg = copy.deepcopy(DEFAULTS)
    if desk:
        cfg = _merge(cfg, DESK_OVERRIDES)
    cfg = _merge(cfg, file_cfg)

    flags = {}
    for name in ("seed", "jobs", "task", "channels"):
        if getattr(args, name, None) is not None:
            flags[name] = getattr(args, name)
    if desk:
        flags["desk_scale"] = True
    exp = {}
    if getattr(args, "noise_max", None) is not None:
        exp["noise_max"] = args.noise_max
    if getattr(args, "noise_step", None) is not None:
        exp["noise_step"] = args.noise_step
    if getattr(args, "splits", None) is not None:
        exp["n_splits"] = args.splits
    if exp:
        flags["experiment"] = exp
    if getattr(args, "takes", None) is not None:
        flags["dataset"] = {"takes_per_capsule": args.takes}
    if getattr(args, "budget", None) is not None:
        flags["search"] = {"budget": args.budget}
    return _check_config(_merge(cfg, flags))


def _echo_config(cfg: dict, out: Path, command: str, paths: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    doc = {"command": command, "version": __version__, "paths": paths, **cfg}
    (out / "config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise BadConfig(f"--{name.replace('_', '-')} is required for '{args.command}'")


def _mfcc_params(cfg: dict) -> dict:
    return dict(cfg["mfcc"])


def _estimator(cfg: dict, task: str, seed: int):
    kw = dict(cfg["train"])
    model = cfg[task]
    cls = RecurrentClassifier if task == "classify" else RecurrentRegressor
    return cls(cell=model["cell"], units=tuple(int(u) for u in model["units"]), random_state=seed, **kw)


def _splits(cfg: dict, manifest, n_splits=None):
    exp = cfg["experiment"]
    return make_splits(manifest, n_splits or exp["n_splits"], exp["n_test"], cfg["seed"], exp["n_val"])


def _digest(cfg: dict, task: str, rate: int) -> str:
    return MfccConfig(n_coeffs=cfg[task]["n_coeffs"], **cfg["mfcc"]).digest(rate)


def _features(cfg, manifest, task):
    return extract_features(manifest, cfg[task]["n_coeffs"], _mfcc_params(cfg), cfg["channels"])


# -- subcommands --------------------------------------------------------------


def cmd_generate(args, cfg, out):
    manifest = generate_dataset(out, seed=cfg["seed"], takes_per_capsule=cfg["dataset"]["takes_per_capsule"],
                                jobs=cfg["jobs"])
    print(f"wrote {len(manifest)} clips and manifest.json to {out}")


def cmd_features(args, cfg, out):
    manifest = DatasetManifest.load(args.data)
    rate = manifest.load_clip(0).sample_rate
    X = _features(cfg, manifest, cfg["task"])
    path = out / f"features_{cfg['task']}.npz"
    save_feature_cache(path, X, [e.path for e in manifest.entries], _digest(cfg, cfg["task"], rate))
    print(f"wrote {path} with shape {X.shape}")


def cmd_train(args, cfg, out):
    manifest = DatasetManifest.load(args.data)
    task = cfg["task"]
    split = _splits(cfg, manifest, n_splits=1)
    X = _features(cfg, manifest, task)
    y = manifest.labels if task == "classify" else manifest.weights
    tr, va = split.train[0], split.validation(0)
    est = _estimator(cfg, task, cfg["seed"])
    est.fit(X[tr], y[tr], eval_set=(X[va], y[va]))
    rate = manifest.load_clip(0).sample_rate
    est.save(out / "model.ckpt", config_digest=_digest(cfg, task, rate))
    est.history_.write_csv(out / "train_log.csv")
    print(f"best epoch {est.history_.best_epoch} of {est.history_.n_epochs}; "
          f"validation loss {est.history_.val_loss[est.history_.best_index]:.6f}")


def _eval_checkpoint(args, cfg, out, manifest):
    task = cfg["task"]
    cls = RecurrentClassifier if task == "classify" else RecurrentRegressor
    est, meta = cls.load(args.model)
    rate = manifest.load_clip(0).sample_rate
    if meta.get("config_digest") and meta["config_digest"] != _digest(cfg, task, rate):
        logger.warning("checkpoint feature digest differs from the current MFCC settings")
    split = _splits(cfg, manifest, n_splits=1)
    te = split.test[0]
    X = _features(cfg, manifest, task)[te]
    if task == "classify":
        pred = est.predict(X)
        truth = manifest.labels[te]
        cm = ConfusionMatrix.from_splits([ConfusionMatrix.counts_for(truth, pred, MATERIALS)], MATERIALS)
        write_confusion_csv(cm, out / "confusion.csv")
        acc = float(np.mean(pred == truth))
        write_summary_json(out / "summary.json", task=task, accuracy=acc, n_test=len(te))
        print(f"accuracy {acc:.4f} on {len(te)} test clips")
    else:
        pred = est.predict(X)
        truth, labels = manifest.weights[te], manifest.labels[te]
        err = np.abs(pred - truth)
        mae = {m: float(err[labels == m].mean()) for m in MATERIALS if np.any(labels == m)}
        report = RegressionReport.from_mae(mae, material_mean_weights(manifest.labels, manifest.weights),
                                           overall_mae=float(err.mean()),
                                           baseline_mae=mean_baseline(manifest.weights, split))
        write_regression_csv(report, out / "regression.csv")
        write_summary_json(out / "summary.json", task=task, mae=report.overall_mae,
                           baseline_mae=report.baseline_mae, n_test=len(te))
        print(f"MAE {report.overall_mae:.3f} g (baseline {report.baseline_mae:.3f} g)")


def cmd_eval(args, cfg, out):
    manifest = DatasetManifest.load(args.data)
    if args.model:
        return _eval_checkpoint(args, cfg, out, manifest)
    task = cfg["task"]
    splits = _splits(cfg, manifest)
    est = _estimator(cfg, task, cfg["seed"])
    X = _features(cfg, manifest, task)
    if task == "classify":
        res = run_classification(manifest, splits, est, seed=cfg["seed"], features=X, jobs=cfg["jobs"],
                                 mode=cfg["experiment"]["confusion_mode"])
        write_confusion_csv(res.confusion, out / "confusion.csv")
        write_split_csv(out / "splits.csv", accuracies=res.per_split_accuracy)
        pair, mass = res.confusion.largest_confusion_pair()
        write_summary_json(out / "summary.json", task=task, accuracy=res.accuracy,
                           per_split_accuracy=res.per_split_accuracy, largest_confusion=list(pair),
                           largest_confusion_mass=mass)
        print(f"accuracy {res.accuracy:.4f} over {splits.n_splits} splits; most confused {pair[0]}/{pair[1]}")
    else:
        rep = run_regression(manifest, splits, est, seed=cfg["seed"], features=X, jobs=cfg["jobs"])
        write_regression_csv(rep, out / "regression.csv")
        write_split_csv(out / "splits.csv", maes=rep.per_split_mae)
        write_summary_json(out / "summary.json", task=task, mae=rep.overall_mae, baseline_mae=rep.baseline_mae,
                           per_split_mae=rep.per_split_mae, per_material_mae=rep.mae)
        print(f"MAE {rep.overall_mae:.3f} g over {splits.n_splits} splits (baseline {rep.baseline_mae:.3f} g)")


def cmd_sweep(args, cfg, out):
    manifest = DatasetManifest.load(args.data)
    exp = cfg["experiment"]
    splits = _splits(cfg, manifest)
    gains = sorted(set(gain_grid(exp["noise_max"], exp["noise_step"]).tolist()) | set(exp["noise_extra_gains"]))
    noise = NoiseBank.synthetic(len(manifest), cfg["seed"])
    result = run_noise_sweep(
        manifest, splits, noise, gains=gains,
        classifier=_estimator(cfg, "classify", cfg["seed"]),
        regressor=_estimator(cfg, "weigh", cfg["seed"]),
        classify_coeffs=cfg["classify"]["n_coeffs"], weigh_coeffs=cfg["weigh"]["n_coeffs"],
        mfcc_params=_mfcc_params(cfg), channels=cfg["channels"], seed=cfg["seed"],
        test_only=exp["noise_test_only"], jobs=cfg["jobs"],
        progress=lambda g, a, m: print(f"gain {g:.2f}: accuracy {a:.4f}, MAE {m:.3f} g", flush=True),
    )
    write_sweep_csv(result, out / "sweep.csv")
    with open(out / "sweep_splits.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gain", "split", "accuracy", "mae"])
        for g, accs, maes in zip(result.gains, result.per_split_accuracy, result.per_split_mae):
            for i, (a, m) in enumerate(zip(accs, maes)):
                w.writerow([f"{g:.2f}", i, f"{a:.6f}", f"{m:.6f}"])
    write_summary_json(out / "summary.json", gains=result.gains, accuracy=result.accuracy, mae=result.mae,
                       baseline_mae=mean_baseline(manifest.weights, splits))


def cmd_search(args, cfg, out):
    manifest = DatasetManifest.load(args.data)
    task = cfg["task"]
    s = cfg["search"]
    evaluate = make_search_evaluator(manifest, task, splits=_splits(cfg, manifest, n_splits=1),
                                     units_scale=s["units_scale"], mfcc_params=_mfcc_params(cfg),
                                     channels=cfg["channels"], seed=cfg["seed"],
                                     max_epochs=cfg["train"]["max_epochs"], train_fraction=s["train_fraction"])
    result = random_search(budget=s["budget"], evaluate=evaluate, seed=cfg["seed"])
    keys = ["trial", "cell", "units1", "units2", "n_coeffs", "learning_rate", "val_loss"]
    with open(out / "leaderboard.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for row in result.leaderboard:
            w.writerow([f"{row[k]:.6g}" if isinstance(row[k], float) else row[k] for k in keys])
    write_summary_json(out / "best.json", task=task, best=result.best,
                       val_loss=result.leaderboard[0]["val_loss"])
    print(f"best {result.best} (validation loss {result.leaderboard[0]['val_loss']:.6f})")


def cmd_report(args, cfg, out):
    src = Path(args.run)
    sweep = read_sweep_csv(src / "sweep.csv" if src.is_dir() else src)
    write_gnuplot(sweep, out / "sweep.dat")
    if len(sweep.gains) >= 3:
        with open(out / "sweep_smoothed.dat", "w") as fh:
            fh.write("# gain accuracy_ma3 mae_ma3\n")
            for g, a, m in zip(sweep.gains[1:-1], moving_average(sweep.accuracy), moving_average(sweep.mae)):
                fh.write(f"{g:.2f} {a:.6f} {m:.6f}\n")
    (out / "sweep.gp").write_text(
        "set xlabel 'noise gain'\n"
        "set ylabel 'accuracy'\n"
        "set y2label 'MAE [g]'\n"
        "set y2tics\n"
        "set key bottom left\n"
        "plot 'sweep.dat' using 1:2 with linespoints title 'accuracy', \\\n"
        "     'sweep.dat' using 1:3 axes x1y2 with linespoints title 'MAE'\n"
    )
    print(f"wrote gnuplot data to {out}")


HANDLERS = {
    "generate": (cmd_generate, ()),
    "features": (cmd_features, ("data",)),
    "train": (cmd_train, ("data",)),
    "eval": (cmd_eval, ("data",)),
    "sweep": (cmd_sweep, ("data",)),
    "search": (cmd_search, ("data",)),
    "report": (cmd_report, ("run",)),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--jobs", type=int, help="parallel workers")
    common.add_argument("--task", choices=TASKS)
    common.add_argument("--channels", choices=("mix", "left", "right", "stack"))
    common.add_argument("--noise-max", type=float)
    common.add_argument("--noise-step", type=float)
    common.add_argument("--desk-scale", action="store_true", help="reduced corpus, models and split count")
    common.add_argument("--data", help="dataset directory (contains manifest.json)")
    common.add_argument("--model", help="checkpoint for eval")
    common.add_argument("--run", help="sweep run directory or sweep.csv for report")
    common.add_argument("--takes", type=int, help="takes per capsule for generate")
    common.add_argument("--splits", type=int, help="number of random splits")
    common.add_argument("--budget", type=int, help="random search trials")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="shakesense", description="Shake-audio material and weight estimation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(COMMANDS) + "}")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler, required = HANDLERS[args.command]
    try:
        _require(args, *required)
        cfg = resolve_config(args)
    except BadConfig as exc:
        print(f"shakesense: configuration error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    paths = {k: getattr(args, k) for k in ("data", "model", "run") if getattr(args, k, None)}
    try:
        _echo_config(cfg, out, args.command, paths)
        handler(args, cfg, out)
    except BadConfig as exc:
        print(f"shakesense: configuration error: {exc}", file=sys.stderr)
        return 2
    except (ShakeSenseError, OSError, ValueError, KeyError) as exc:
        print(f"shakesense: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
