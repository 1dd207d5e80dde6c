"""Mini-batch training loop with patience-based early stopping."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from shakesense.errors import EmptyDataset
from shakesense.nn.model import NetworkModel, backward, batch_loss, forward_batch
from shakesense.nn.optim import Adam, clip_by_global_norm

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    patience: int = 2
    max_epochs: int = 200
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    gradient_clip: float = 5.0
    seed: int = 0
    monitor: str = "val"  # which loss drives early stopping: "val" or "train"

    def __post_init__(self):
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise ValueError("batch_size, patience and max_epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.monitor not in ("val", "train"):
            raise ValueError("monitor must be 'val' or 'train'")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    best_index: int = -1
    stopped_early: bool = False

    @property
    def best_epoch(self) -> int:
        """1-based epoch number of the best model."""
        return self.best_index + 1

    @property
    def n_epochs(self) -> int:
        return len(self.train_loss)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "val_loss", "seconds"])
            for i, (tr, va, s) in enumerate(zip(self.train_loss, self.val_loss, self.seconds)):
                writer.writerow([i + 1, f"{tr:.8g}", f"{va:.8g}", f"{s:.3f}"])


class EarlyStopping:
    """Stop once the monitored loss has not strictly improved for ``patience`` epochs."""

    def __init__(self, patience: int = 2):
        self.patience = patience
        self.best = np.inf
        self.best_index = -1
        self.bad_epochs = 0
        self._seen = 0

    def update(self, value: float) -> bool:
        """Record one epoch's loss; return True if it is a new best."""
        index = self._seen
        self._seen += 1
        if value < self.best:
            self.best, self.best_index, self.bad_epochs = value, index, 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


def mean_loss(model: NetworkModel, X, y, chunk: int = 256) -> float:
    """Average per-sample loss over a dataset (arrays or list of sequences)."""
    y = np.asarray(y)
    total = 0.0
    if isinstance(X, np.ndarray):
        for start in range(0, len(y), chunk):
            out = forward_batch(model, X[start : start + chunk])
            total += float(batch_loss(model, out, y[start : start + chunk]).sum())
    else:
        for seq, target in zip(X, y):
            out = forward_batch(model, seq[np.newaxis])
            total += float(batch_loss(model, out, np.asarray([target])).sum())
    return total / len(y)


def _take(X, idx):
    if isinstance(X, np.ndarray):
        return X[idx]
    return [X[i] for i in idx]


def train(model: NetworkModel, train_set, validation_set, config: TrainConfig = TrainConfig(),
          evaluate=None, on_epoch_end=None):
    """Fit ``model`` and return ``(best_model, history)``.

    ``train_set`` and ``validation_set`` are ``(features, targets)`` pairs.
    ``evaluate(model) -> float`` overrides the validation loss computation;
    ``on_epoch_end(epoch_index, model, history)`` is called after every epoch.
    The input model is not modified.
    """
    X, y = train_set
    Xv, yv = validation_set
    y, yv = np.asarray(y), np.asarray(yv)
    if len(y) == 0 or len(yv) == 0:
        raise EmptyDataset("training and validation sets must be non-empty")

    model = model.copy()
    rng = np.random.default_rng(config.seed)
    opt = Adam(model.params, config.learning_rate, config.beta1, config.beta2, config.eps)
    stopper = EarlyStopping(config.patience)
    history = TrainHistory()
    best = model.copy()
    n = len(y)

    for epoch in range(config.max_epochs):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        running = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            grads, batch_mean = backward(model, (_take(X, idx), y[idx]))
            clip_by_global_norm(grads, config.gradient_clip)
            opt.step(model.params, grads)
            running += batch_mean * len(idx)
        train_loss = running / n
        val_loss = evaluate(model) if evaluate is not None else mean_loss(model, Xv, yv)
        history.train_loss.append(float(train_loss))
        history.val_loss.append(float(val_loss))
        history.seconds.append(time.perf_counter() - t0)

        monitored = val_loss if config.monitor == "val" else train_loss
        if not np.isfinite(monitored):
            logger.warning("non-finite loss at epoch %d; stopping", epoch + 1)
            history.stopped_early = True
            break
        if stopper.update(monitored):
            best = model.copy()
            history.best_index = epoch
        logger.debug("epoch %d train %.5f val %.5f", epoch + 1, train_loss, val_loss)
        if on_epoch_end is not None:
            on_epoch_end(epoch, model, history)
        if stopper.should_stop:
            history.stopped_early = True
            break
    if history.best_index < 0:
        history.best_index = 0
    return best, history
