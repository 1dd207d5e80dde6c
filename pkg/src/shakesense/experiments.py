"""Repeated random-split evaluation, noise-robustness sweeps and random search.

Every function here is deterministic for a fixed master seed: split
membership, network initialisation, mini-batch shuffling and noise pairing
are all derived from it with :class:`numpy.random.SeedSequence`.
"""

from __future__ import annotations

import csv
import inspect
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import clone

from shakesense.audio import AudioClip, downmix, mix_noise, normalize_peak
from shakesense.errors import EmptySpace, NoNoiseClips, TooFewSamples
from shakesense.mfcc import MfccTransformer
from shakesense.nn.estimators import RecurrentClassifier, RecurrentRegressor
from shakesense.synth import MATERIALS, NOISE_KINDS, synth_noise

logger = logging.getLogger(__name__)

# reduced protocol for CI and laptops
DESK_SCALE = {
    "n_splits": 3,
    "classify_units": (64, 16),
    "weigh_units": (64, 16),
    "learning_rate": 3e-3,
    "takes_per_capsule": 9,
}
FULL_SCALE = {
    "n_splits": 15,
    "classify_units": (491, 99),
    "weigh_units": (376, 69),
    "learning_rate": 1e-3,
    "takes_per_capsule": 36,
}


# -- splits -------------------------------------------------------------------


@dataclass
class SplitPlan:
    """Index sets into a manifest; ``val`` is ``None`` when the test set doubles as validation."""

    n_splits: int
    n_test: int
    seed: int
    train: list
    test: list
    val: list | None = None

    def __iter__(self):
        for i in range(self.n_splits):
            yield self.train[i], self.test[i]

    def validation(self, i):
        return self.test[i] if self.val is None else self.val[i]

    def equals(self, other: "SplitPlan") -> bool:
        same = lambda a, b: len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))  # noqa: E731
        vals = (self.val is None and other.val is None) or (
            self.val is not None and other.val is not None and same(self.val, other.val)
        )
        return same(self.train, other.train) and same(self.test, other.test) and vals


def make_splits(manifest, n_splits: int = 15, n_test: int = 80, seed: int = 0, n_val: int = 0) -> SplitPlan:
    """Uniformly random disjoint train/test partitions.

    ``manifest`` may be a manifest or a sample count.  With ``n_val > 0`` a
    separate validation set is carved out of the training part.
    """
    n = manifest if isinstance(manifest, (int, np.integer)) else len(manifest)
    if n_test < 1 or n - n_test - n_val < 1:
        raise TooFewSamples(f"{n} samples cannot supply {n_test} test + {n_val} validation + training")
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_splits)]
    train, test, val = [], [], []
    for rng in rngs:
        perm = rng.permutation(n)
        test.append(np.sort(perm[:n_test]))
        val.append(np.sort(perm[n_test : n_test + n_val]))
        train.append(np.sort(perm[n_test + n_val :]))
    return SplitPlan(n_splits, n_test, seed, train, test, val if n_val else None)


def split_seeds(seed: int, n_splits: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence([seed, 1]).generate_state(n_splits)]


# -- features -----------------------------------------------------------------


def prepare_clip(clip: AudioClip, channels: str = "mix") -> AudioClip:
    """Channel reduction then 0 dBFS peak normalization."""
    if channels != "stack":
        clip = downmix(clip, channels)
    return normalize_peak(clip)


@dataclass
class NoiseBank:
    """Noise clips plus a fixed per-clip pairing (noise index, start offset)."""

    clips: list
    assignment: np.ndarray  # (n_clips, 2) int

    @classmethod
    def synthetic(cls, n_clips: int, seed: int = 0, kinds=NOISE_KINDS, duration_ms=2000, rate=48000):
        ss = np.random.SeedSequence([seed, 2])
        noise_seeds = ss.spawn(len(kinds) + 1)
        clips = [synth_noise(k, duration_ms, rate, s) for k, s in zip(kinds, noise_seeds)]
        return cls.paired(clips, n_clips, noise_seeds[-1])

    @classmethod
    def paired(cls, clips, n_clips: int, seed=0):
        if not clips:
            raise NoNoiseClips("at least one noise clip is required")
        rng = np.random.default_rng(seed)
        which = rng.integers(0, len(clips), n_clips)
        max_off = np.array([c.n_samples for c in clips])[which]
        offsets = (rng.random(n_clips) * np.maximum(max_off, 1)).astype(int)
        return cls([normalize_peak(c) for c in clips], np.stack([which, offsets], axis=1))

    def noise_for(self, index: int, like: AudioClip) -> AudioClip:
        which, offset = self.assignment[index]
        src = self.clips[which]
        data = np.roll(src.samples, -int(offset), axis=1)
        if data.shape[0] != like.channels:
            data = np.repeat(data[:1], like.channels, axis=0)
        return AudioClip(data, src.sample_rate)


def extract_features(
    manifest,
    n_coeffs: int,
    mfcc_params: dict | None = None,
    channels: str = "mix",
    noise: NoiseBank | None = None,
    gain: float = 0.0,
    indices=None,
    clips=None,
) -> np.ndarray:
    """MFCC array ``(n_clips, n_frames, width)`` for manifest entries.

    With a ``noise`` bank, each normalized clip is mixed with its paired noise
    at ``gain`` before analysis; the mixture is not re-normalized.
    """
    params = dict(mfcc_params or {})
    params.update(n_coeffs=n_coeffs, channels="mix" if channels != "stack" else "stack", normalize=False)
    indices = range(len(manifest)) if indices is None else indices
    transformer = None
    out = []
    for i in indices:
        clip = clips[i] if clips is not None else manifest.load_clip(i)
        if transformer is None:
            transformer = MfccTransformer(sample_rate=clip.sample_rate, **params).fit()
        clip = prepare_clip(clip, channels)
        if noise is not None and gain > 0.0:
            clip = mix_noise(clip, noise.noise_for(i, clip), gain)
        out.append(transformer.transform_one(clip))
    return np.stack(out)


# -- results ------------------------------------------------------------------


@dataclass
class ConfusionMatrix:
    """Rows = true class, columns = predicted class."""

    classes: tuple
    matrix: np.ndarray  # row-normalized
    support: np.ndarray  # per-class test counts summed over splits
    counts: np.ndarray  # pooled raw counts

    @staticmethod
    def counts_for(y_true, y_pred, classes) -> np.ndarray:
        lookup = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for t, p in zip(y_true, y_pred):
            counts[lookup[t], lookup[p]] += 1
        return counts

    @staticmethod
    def normalize_rows(counts) -> np.ndarray:
        counts = np.asarray(counts, dtype=np.float64)
        sums = counts.sum(axis=1, keepdims=True)
        return np.divide(counts, sums, out=np.zeros_like(counts), where=sums > 0)

    @classmethod
    def from_splits(cls, per_split_counts, classes, mode: str = "mean"):
        """Average per-split row-normalized matrices (``mode="mean"``) or pool counts."""
        stack = np.stack(per_split_counts)
        pooled = stack.sum(axis=0)
        if mode == "pooled":
            matrix = cls.normalize_rows(pooled)
        elif mode == "mean":
            normed = np.stack([cls.normalize_rows(c) for c in stack])
            present = stack.sum(axis=2) > 0  # (splits, classes)
            n_present = present.sum(axis=0)
            total = (normed * present[:, :, None]).sum(axis=0)
            matrix = np.divide(total, n_present[:, None], out=np.zeros_like(total), where=n_present[:, None] > 0)
        else:
            raise ValueError("mode must be 'mean' or 'pooled'")
        return cls(tuple(classes), matrix, pooled.sum(axis=1), pooled)

    def largest_confusion_pair(self):
        """Unordered class pair with the largest combined off-diagonal mass."""
        m = self.matrix
        sym = m + m.T
        np.fill_diagonal(sym, -np.inf)
        i, j = np.unravel_index(np.argmax(sym), sym.shape)
        return tuple(sorted((self.classes[i], self.classes[j]))), float(sym[i, j])

    def pair_mass(self, a, b) -> float:
        i, j = self.classes.index(a), self.classes.index(b)
        return float(self.matrix[i, j] + self.matrix[j, i])


@dataclass
class ClassificationResult:
    confusion: ConfusionMatrix
    accuracy: float
    per_split_accuracy: list
    histories: list = field(default_factory=list, repr=False)


@dataclass
class RegressionReport:
    materials: tuple
    mean_weight: dict  # grams
    mae: dict  # grams, averaged over splits
    percent_error: dict  # mae / mean_weight * 100
    overall_mae: float
    baseline_mae: float | None = None
    per_split_mae: list = field(default_factory=list)
    histories: list = field(default_factory=list, repr=False)

    @classmethod
    def from_mae(cls, mae: dict, mean_weight: dict, overall_mae=None, baseline_mae=None, per_split_mae=()):
        materials = tuple(m for m in MATERIALS if m in mae) + tuple(sorted(set(mae) - set(MATERIALS)))
        percent = {m: mae[m] / mean_weight[m] * 100.0 for m in materials}
        if overall_mae is None:
            overall_mae = float(np.mean([mae[m] for m in materials]))
        return cls(materials, dict(mean_weight), dict(mae), percent, float(overall_mae), baseline_mae, list(per_split_mae))

    @property
    def mean_percent_error(self) -> float:
        return float(np.mean([self.percent_error[m] for m in self.materials]))


@dataclass
class NoiseSweepResult:
    gains: np.ndarray
    accuracy: np.ndarray
    mae: np.ndarray
    per_split_accuracy: list = field(default_factory=list)
    per_split_mae: list = field(default_factory=list)


# -- experiment runners -------------------------------------------------------


def _fit(estimator, X, y, Xv, yv):
    if "eval_set" in inspect.signature(estimator.fit).parameters:
        return estimator.fit(X, y, eval_set=(Xv, yv))
    return estimator.fit(X, y)


def _seeded(estimator, seed):
    est = clone(estimator)
    if "random_state" in est.get_params():
        est.set_params(random_state=seed)
    return est


def _parallel_map(fn, items, jobs):
    if jobs and jobs > 1:
        from joblib import Parallel, delayed

        return Parallel(n_jobs=jobs)(delayed(fn)(*it) for it in items)
    return [fn(*it) for it in items]


def _classify_split(estimator, seed, X, y, tr, te, va):
    est = _seeded(estimator, seed)
    _fit(est, X[tr], y[tr], X[va], y[va])
    return est.predict(X[te]), getattr(est, "history_", None)


def evaluate_classification(X, y, splits: SplitPlan, estimator=None, classes=MATERIALS, seed=0,
                            mode="mean", jobs=1) -> ClassificationResult:
    """Train and test ``estimator`` on every split of precomputed features."""
    estimator = estimator if estimator is not None else RecurrentClassifier()
    y = np.asarray(y)
    seeds = split_seeds(seed, splits.n_splits)
    work = [(estimator, seeds[i], X, y, splits.train[i], splits.test[i], splits.validation(i))
            for i in range(splits.n_splits)]
    outputs = _parallel_map(_classify_split, work, jobs)
    counts, accs, histories = [], [], []
    for (pred, hist), i in zip(outputs, range(splits.n_splits)):
        truth = y[splits.test[i]]
        counts.append(ConfusionMatrix.counts_for(truth, pred, classes))
        accs.append(float(np.mean(pred == truth)))
        histories.append(hist)
    cm = ConfusionMatrix.from_splits(counts, classes, mode)
    return ClassificationResult(cm, float(np.mean(accs)), accs, histories)


def _regress_split(estimator, seed, X, w, tr, te, va):
    est = _seeded(estimator, seed)
    _fit(est, X[tr], w[tr], X[va], w[va])
    return np.asarray(est.predict(X[te]), dtype=np.float64), getattr(est, "history_", None)


def material_mean_weights(labels, weights) -> dict:
    labels, weights = np.asarray(labels), np.asarray(weights, dtype=np.float64)
    return {m: float(weights[labels == m].mean()) for m in MATERIALS if np.any(labels == m)}


def mean_baseline(weights, splits: SplitPlan) -> float:
    """MAE of always predicting the training-split mean weight, averaged over splits."""
    weights = np.asarray(getattr(weights, "weights", weights), dtype=np.float64)
    if weights.size == 0:
        raise TooFewSamples("no weights")
    maes = [np.mean(np.abs(weights[te] - weights[tr].mean())) for tr, te in splits]
    return float(np.mean(maes))


def evaluate_regression(X, labels, weights, splits: SplitPlan, estimator=None, seed=0, jobs=1) -> RegressionReport:
    estimator = estimator if estimator is not None else RecurrentRegressor()
    labels = np.asarray(labels)
    weights = np.asarray(weights, dtype=np.float64)
    seeds = split_seeds(seed, splits.n_splits)
    work = [(estimator, seeds[i], X, weights, splits.train[i], splits.test[i], splits.validation(i))
            for i in range(splits.n_splits)]
    outputs = _parallel_map(_regress_split, work, jobs)
    per_material = {m: [] for m in MATERIALS}
    split_maes, histories = [], []
    for (pred, hist), te in zip(outputs, splits.test):
        err = np.abs(pred - weights[te])
        split_maes.append(float(err.mean()))
        histories.append(hist)
        for m in MATERIALS:
            sel = labels[te] == m
            if np.any(sel):
                per_material[m].append(float(err[sel].mean()))
    mae = {m: float(np.mean(v)) for m, v in per_material.items() if v}
    report = RegressionReport.from_mae(
        mae,
        material_mean_weights(labels, weights),
        overall_mae=float(np.mean(split_maes)),
        baseline_mae=mean_baseline(weights, splits),
        per_split_mae=split_maes,
    )
    report.histories = histories
    return report


def default_classifier(units=(491, 99), cell="gru", **kw) -> RecurrentClassifier:
    return RecurrentClassifier(cell=cell, units=tuple(units), **kw)


def default_regressor(units=(376, 69), cell="lstm", **kw) -> RecurrentRegressor:
    return RecurrentRegressor(cell=cell, units=tuple(units), **kw)


def run_classification(manifest, splits, estimator=None, n_coeffs=21, mfcc_params=None, channels="mix",
                       seed=0, features=None, jobs=1, mode="mean") -> ClassificationResult:
    """Material classification over all splits (21 coefficients, GRU 491/99 by default)."""
    X = features if features is not None else extract_features(manifest, n_coeffs, mfcc_params, channels)
    return evaluate_classification(X, manifest.labels, splits, estimator or default_classifier(), seed=seed,
                                   mode=mode, jobs=jobs)


def run_regression(manifest, splits, estimator=None, n_coeffs=27, mfcc_params=None, channels="mix",
                   seed=0, features=None, jobs=1) -> RegressionReport:
    """Weight regression over all splits (27 coefficients, LSTM 376/69 by default)."""
    X = features if features is not None else extract_features(manifest, n_coeffs, mfcc_params, channels)
    return evaluate_regression(X, manifest.labels, manifest.weights, splits, estimator or default_regressor(),
                               seed=seed, jobs=jobs)


def gain_grid(max_gain: float = 0.5, step: float = 0.05) -> np.ndarray:
    """``0, step, 2*step, ...`` up to ``max_gain``; rounded to avoid float drift."""
    n = int(round(max_gain / step))
    return np.round(np.arange(n + 1) * step, 10)


def run_noise_sweep(manifest, splits, noise: NoiseBank | None = None, max_gain=0.5, step=0.05, gains=None,
                    classifier=None, regressor=None, classify_coeffs=21, weigh_coeffs=27, mfcc_params=None,
                    channels="mix", seed=0, test_only=False, tasks=("classify", "weigh"), jobs=1,
                    progress=None) -> NoiseSweepResult:
    """Repeat both experiments with noise overlaid at each gain.

    By default training and test clips receive the same treatment; with
    ``test_only`` the networks are trained on clean features.
    """
    if noise is None:
        noise = NoiseBank.synthetic(len(manifest), seed)
    if not noise.clips:
        raise NoNoiseClips("noise bank is empty")
    gains = gain_grid(max_gain, step) if gains is None else np.asarray(gains, dtype=np.float64)
    clips = [manifest.load_clip(i) for i in range(len(manifest))]
    classifier = classifier or default_classifier()
    regressor = regressor or default_regressor()
    clean = {}
    if test_only:
        clean = {c: extract_features(manifest, c, mfcc_params, channels, clips=clips)
                 for c in (classify_coeffs, weigh_coeffs)}

    accs, maes, split_accs, split_maes = [], [], [], []
    for g in gains:
        def feats(n_coeffs):
            noisy = extract_features(manifest, n_coeffs, mfcc_params, channels, noise, g, clips=clips)
            if not test_only:
                return noisy
            mixed = clean[n_coeffs].copy()
            for te in splits.test:
                mixed[te] = noisy[te]
            return mixed

        if "classify" in tasks:
            res = evaluate_classification(feats(classify_coeffs), manifest.labels, splits, classifier, seed=seed, jobs=jobs)
            accs.append(res.accuracy)
            split_accs.append(res.per_split_accuracy)
        else:
            accs.append(np.nan)
            split_accs.append([])
        if "weigh" in tasks:
            rep = evaluate_regression(feats(weigh_coeffs), manifest.labels, manifest.weights, splits, regressor,
                                      seed=seed, jobs=jobs)
            maes.append(rep.overall_mae)
            split_maes.append(rep.per_split_mae)
        else:
            maes.append(np.nan)
            split_maes.append([])
        logger.info("gain %.2f accuracy %.4f mae %.3f", g, accs[-1], maes[-1])
        if progress is not None:
            progress(float(g), accs[-1], maes[-1])
    return NoiseSweepResult(gains, np.array(accs), np.array(maes), split_accs, split_maes)


def moving_average(values, width: int = 3) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return np.convolve(values, np.ones(width) / width, mode="valid")


# -- random search ------------------------------------------------------------

# ranges bracket the full-size defaults: GRU 491/99 @ 21 coeffs, LSTM 376/69 @ 27
DEFAULT_SEARCH_SPACE = {
    "cell": ("gru", "lstm", "srn"),
    "units1": (300, 700),
    "units2": (50, 100),
    "n_coeffs": (13, 40),
    "learning_rate": (1e-4, 1e-2),
}


@dataclass
class SearchResult:
    best: dict
    leaderboard: list  # dicts with the config plus "val_loss", sorted ascending


def sample_config(space: dict, rng) -> dict:
    if not space:
        raise EmptySpace("search space is empty")
    config = {}
    for key, choice in space.items():
        if isinstance(choice, (list, tuple)) and len(choice) and all(isinstance(c, str) for c in choice):
            config[key] = str(choice[rng.integers(len(choice))])
        elif isinstance(choice, (list, tuple)) and len(choice) == 2:
            lo, hi = choice
            if isinstance(lo, int) and isinstance(hi, int):
                config[key] = int(rng.integers(lo, hi + 1))
            elif lo > 0 and hi / lo >= 100:
                config[key] = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
            else:
                config[key] = float(rng.uniform(lo, hi))
        elif isinstance(choice, (list, tuple)) and len(choice) == 1:
            config[key] = choice[0]
        else:
            raise EmptySpace(f"cannot sample from {key}={choice!r}")
    return config


def random_search(space=None, budget: int = 20, evaluate=None, seed: int = 0) -> SearchResult:
    """Uniform random search minimising ``evaluate(config) -> validation loss``."""
    space = DEFAULT_SEARCH_SPACE if space is None else space
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not space:
        raise EmptySpace("search space is empty")
    if evaluate is None:
        raise ValueError("an evaluate(config) callable is required")
    rng = np.random.default_rng(seed)
    board = []
    for trial in range(budget):
        config = sample_config(space, rng)
        val_loss = float(evaluate(config))
        board.append({**config, "trial": trial, "val_loss": val_loss})
        logger.info("trial %d %s -> %.5f", trial, config, val_loss)
    board.sort(key=lambda r: (r["val_loss"], r["trial"]))
    best = {k: v for k, v in board[0].items() if k not in ("trial", "val_loss")}
    return SearchResult(best, board)


def make_search_evaluator(manifest, task="classify", split_index=0, splits=None, units_scale=1.0,
                          mfcc_params=None, channels="mix", seed=0, max_epochs=200, train_fraction=1.0):
    """Build ``evaluate(config)`` that trains on one (optionally subsampled) split.

    ``units_scale`` shrinks sampled layer sizes for quick searches.
    """
    splits = splits or make_splits(manifest, 1, 80, seed)
    tr, va = splits.train[split_index], splits.validation(split_index)
    if train_fraction < 1.0:
        keep = max(1, int(len(tr) * train_fraction))
        tr = np.sort(np.random.default_rng(seed).permutation(tr)[:keep])
    cache = {}

    def evaluate(config):
        n_coeffs = int(config.get("n_coeffs", 21 if task == "classify" else 27))
        if n_coeffs not in cache:
            cache[n_coeffs] = extract_features(manifest, n_coeffs, mfcc_params, channels)
        X = cache[n_coeffs]
        units = tuple(max(1, int(round(u * units_scale))) for u in (config.get("units1", 64), config.get("units2", 16)))
        kw = dict(cell=config.get("cell", "gru"), units=units, learning_rate=config.get("learning_rate", 1e-3),
                  max_epochs=max_epochs, random_state=seed)
        if task == "classify":
            est = RecurrentClassifier(**kw)
            est.fit(X[tr], manifest.labels[tr], eval_set=(X[va], manifest.labels[va]))
        else:
            est = RecurrentRegressor(**kw)
            est.fit(X[tr], manifest.weights[tr], eval_set=(X[va], manifest.weights[va]))
        return min(est.history_.val_loss)

    return evaluate


# -- report files -------------------------------------------------------------


def _fmt(x) -> str:
    return f"{float(x):.6f}"


def write_confusion_csv(cm: ConfusionMatrix, path) -> None:
    """``true,<class...>,support`` rows; entries are row-normalized rates."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true", *cm.classes, "support"])
        for c, row, s in zip(cm.classes, cm.matrix, cm.support):
            w.writerow([c, *(_fmt(v) for v in row), int(s)])


def write_regression_csv(report: RegressionReport, path) -> None:
    """``material,mean_weight_g,mae_g,percent_error`` plus a final ``avg`` row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["material", "mean_weight_g", "mae_g", "percent_error"])
        for m in report.materials:
            w.writerow([m, _fmt(report.mean_weight[m]), _fmt(report.mae[m]), _fmt(report.percent_error[m])])
        mean_w = np.mean([report.mean_weight[m] for m in report.materials])
        w.writerow(["avg", _fmt(mean_w), _fmt(report.overall_mae), _fmt(report.mean_percent_error)])


def write_sweep_csv(result: NoiseSweepResult, path) -> None:
    """``gain,accuracy,mae`` one row per grid point."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gain", "accuracy", "mae"])
        for g, a, m in zip(result.gains, result.accuracy, result.mae):
            w.writerow([f"{g:.2f}", _fmt(a), _fmt(m)])


def read_sweep_csv(path) -> NoiseSweepResult:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    col = lambda k: np.array([float(r[k]) for r in rows])  # noqa: E731
    return NoiseSweepResult(col("gain"), col("accuracy"), col("mae"))


def write_split_csv(path, accuracies=None, maes=None) -> None:
    """Per-split metrics: ``split,accuracy,mae`` (empty where not run)."""
    n = max(len(accuracies or []), len(maes or []))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["split", "accuracy", "mae"])
        for i in range(n):
            a = _fmt(accuracies[i]) if accuracies and i < len(accuracies) else ""
            m = _fmt(maes[i]) if maes and i < len(maes) else ""
            w.writerow([i, a, m])


def write_summary_json(path, **sections) -> None:
    def clean(v):
        if isinstance(v, dict):
            return {str(k): clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple, np.ndarray)):
            return [clean(x) for x in v]
        if isinstance(v, (np.floating, float)):
            return round(float(v), 6)
        if isinstance(v, np.integer):
            return int(v)
        return v

    Path(path).write_text(json.dumps(clean(sections), indent=2, sort_keys=True) + "\n")


def write_gnuplot(result: NoiseSweepResult, path) -> None:
    """Whitespace-separated columns ``gain accuracy mae`` with a ``#`` header."""
    with open(path, "w") as fh:
        fh.write("# gain accuracy mae_g\n")
        for g, a, m in zip(result.gains, result.accuracy, result.mae):
            fh.write(f"{g:.2f} {a:.6f} {m:.6f}\n")
