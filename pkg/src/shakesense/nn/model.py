"""Layer stacks, parameter initialisation, losses, BPTT gradients and checkpoints."""

from __future__ import annotations

import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from shakesense.errors import (
    CorruptCheckpoint,
    EmptySequence,
    InvalidSpec,
    LossKindMismatch,
    ShapeMismatch,
    VersionMismatch,
)
from shakesense.nn.cells import N_BLOCKS, RECURRENT_KINDS, sequence_backward, sequence_forward

HEAD_KINDS = ("dense_softmax", "dense_linear")
LOSS_FOR_HEAD = {"dense_softmax": "cross_entropy", "dense_linear": "mse"}
CHECKPOINT_FORMAT = "shakesense-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    units: int

    def to_dict(self):
        return {"kind": self.kind, "units": int(self.units)}


def make_spec(cell: str, units, head: str, n_outputs: int) -> tuple[LayerSpec, ...]:
    """Recurrent layers of one ``cell`` kind followed by a dense head."""
    return tuple(LayerSpec(cell, int(u)) for u in units) + (LayerSpec(head, int(n_outputs)),)


# default layouts: GRU 491/99 + softmax for material, LSTM 376/69 + linear for weight
CLASSIFICATION_SPEC = make_spec("gru", (491, 99), "dense_softmax", 10)
REGRESSION_SPEC = make_spec("lstm", (376, 69), "dense_linear", 1)


def validate_spec(spec) -> tuple[LayerSpec, ...]:
    spec = tuple(s if isinstance(s, LayerSpec) else LayerSpec(**s) for s in spec)
    if len(spec) < 2:
        raise InvalidSpec("need at least one recurrent layer and a head")
    for i, layer in enumerate(spec):
        if layer.kind not in RECURRENT_KINDS + HEAD_KINDS:
            raise InvalidSpec(f"layer {i}: unknown kind {layer.kind!r}")
        if int(layer.units) < 1:
            raise InvalidSpec(f"layer {i}: units must be positive")
    heads = [i for i, layer in enumerate(spec) if layer.kind in HEAD_KINDS]
    if heads != [len(spec) - 1]:
        raise InvalidSpec("exactly one dense head is allowed and it must be the last layer")
    if spec[-1].kind == "dense_softmax" and spec[-1].units < 2:
        raise InvalidSpec("softmax head needs at least two classes")
    return spec


@dataclass(eq=False)
class NetworkModel:
    spec: tuple
    input_width: int
    params: list = field(default_factory=list)

    @property
    def head(self) -> str:
        return self.spec[-1].kind

    @property
    def loss_kind(self) -> str:
        return LOSS_FOR_HEAD[self.head]

    @property
    def n_outputs(self) -> int:
        return self.spec[-1].units

    def n_parameters(self) -> int:
        return sum(a.size for p in self.params for a in p.values())

    def copy(self) -> "NetworkModel":
        return NetworkModel(self.spec, self.input_width, [{k: v.copy() for k, v in p.items()} for p in self.params])

    def equals(self, other: "NetworkModel") -> bool:
        """Exact (bitwise) equality of spec, width and every parameter."""
        return (
            self.spec == other.spec
            and self.input_width == other.input_width
            and len(self.params) == len(other.params)
            and all(
                p.keys() == q.keys() and all(np.array_equal(p[k], q[k]) for k in p)
                for p, q in zip(self.params, other.params)
            )
        )


def _glorot(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_model(spec, input_width: int, seed=0) -> NetworkModel:
    """Fan-scaled uniform weights, zero biases, LSTM forget-gate bias 1."""
    spec = validate_spec(spec)
    if int(input_width) < 1:
        raise InvalidSpec("input_width must be positive")
    rng = np.random.default_rng(seed)
    params = []
    width = int(input_width)
    for layer in spec:
        n = layer.units
        if layer.kind in RECURRENT_KINDS:
            k = N_BLOCKS[layer.kind]
            W = np.concatenate([_glorot(rng, width, n, (width, n)) for _ in range(k)], axis=1)
            U = np.concatenate([_glorot(rng, n, n, (n, n)) for _ in range(k)], axis=1)
            b = np.zeros(k * n)
            if layer.kind == "lstm":
                b[n : 2 * n] = 1.0
            params.append({"W": W, "U": U, "b": b})
        else:
            params.append({"W": _glorot(rng, width, n, (width, n)), "b": np.zeros(n)})
        width = n
    return NetworkModel(spec, int(input_width), params)


def softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _as_batch(model: NetworkModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[np.newaxis]
    if X.ndim != 3:
        raise ShapeMismatch(f"expected (time, width) or (batch, time, width), got shape {X.shape}")
    if X.shape[1] == 0:
        raise EmptySequence("feature sequence has no frames")
    if X.shape[2] != model.input_width:
        raise ShapeMismatch(f"feature width {X.shape[2]} != model input width {model.input_width}")
    return X


def _forward_cached(model: NetworkModel, X):
    caches = []
    out = X
    for layer, p in zip(model.spec[:-1], model.params[:-1]):
        out, cache = sequence_forward(layer.kind, p, out)
        caches.append(cache)
    last = out[:, -1]
    head = model.params[-1]
    raw = last @ head["W"] + head["b"]
    return raw, last, caches


def forward_batch(model: NetworkModel, X) -> np.ndarray:
    """Outputs for equal-length sequences ``X`` of shape ``(batch, time, width)``.

    Softmax heads return ``(batch, classes)`` probabilities; linear heads
    return ``(batch,)`` for a single output, else ``(batch, outputs)``.
    """
    X = _as_batch(model, X)
    raw, _, _ = _forward_cached(model, X)
    if model.head == "dense_softmax":
        return softmax(raw)
    return raw[:, 0] if model.n_outputs == 1 else raw


def forward(model: NetworkModel, features):
    """Output for a single sequence (``(time, width)`` array or ``MfccSequence``)."""
    frames = getattr(features, "frames", features)
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise ShapeMismatch(f"a single sequence must be 2-D, got shape {frames.shape}")
    return forward_batch(model, frames)[0]


def loss(output, target, kind: str) -> float:
    """Per-sample loss: ``-log p[target]`` or ``(output - target)**2``."""
    if kind == "cross_entropy":
        p = np.asarray(output, dtype=np.float64)
        if p.ndim != 1:
            raise LossKindMismatch("cross_entropy expects a probability vector")
        return float(-np.log(p[int(target)]))
    if kind == "mse":
        if np.ndim(output) != 0:
            raise LossKindMismatch("mse expects a scalar output")
        return float((float(output) - float(target)) ** 2)
    raise LossKindMismatch(f"unknown loss kind {kind!r}")


def mae(output, target) -> float:
    return float(abs(float(output) - float(target)))


def batch_loss(model: NetworkModel, outputs, targets) -> np.ndarray:
    """Vector of per-sample losses for outputs from :func:`forward_batch`."""
    targets = np.asarray(targets)
    if model.head == "dense_softmax":
        p = outputs[np.arange(len(targets)), targets.astype(int)]
        return -np.log(np.maximum(p, np.finfo(float).tiny))
    out = outputs if outputs.ndim == 1 else outputs[:, 0]
    return (out - targets.astype(np.float64)) ** 2


def _check_kind(model: NetworkModel, kind):
    if kind is None:
        return model.loss_kind
    if kind != model.loss_kind:
        raise LossKindMismatch(f"loss {kind!r} does not match head {model.head!r}")
    return kind


def _backward_equal_length(model: NetworkModel, X, y):
    """Summed (not averaged) gradients and summed loss for one equal-length group."""
    raw, last, caches = _forward_cached(model, X)
    B = X.shape[0]
    if model.head == "dense_softmax":
        p = softmax(raw)
        idx = y.astype(int)
        total = float(-np.log(np.maximum(p[np.arange(B), idx], np.finfo(float).tiny)).sum())
        draw = p.copy()
        draw[np.arange(B), idx] -= 1.0
    else:
        err = raw[:, 0] - y.astype(np.float64)
        total = float(np.sum(err**2))
        draw = np.zeros_like(raw)
        draw[:, 0] = 2.0 * err
    head = model.params[-1]
    grads = [None] * len(model.params)
    grads[-1] = {"W": last.T @ draw, "b": draw.sum(axis=0)}
    dtop = draw @ head["W"].T
    dH = np.zeros(caches[-1]["H"].shape[:1] + (X.shape[1], dtop.shape[1]))
    dH[:, -1] = dtop
    for i in range(len(caches) - 1, -1, -1):
        g, dX = sequence_backward(model.spec[i].kind, model.params[i], caches[i], dH)
        grads[i] = g
        dH = dX
    return grads, total


def backward(model: NetworkModel, batch, kind: str | None = None):
    """Gradients of the mean batch loss w.r.t. every parameter.

    ``batch`` is ``(features, targets)`` where ``features`` is either an array
    ``(batch, time, width)`` or a list of ``(time, width)`` arrays of possibly
    different lengths.  Returns ``(grads, mean_loss)`` with ``grads`` shaped
    like ``model.params``.
    """
    _check_kind(model, kind)
    X, y = batch
    y = np.asarray(y)
    if isinstance(X, np.ndarray) and X.ndim == 3:
        groups = [(_as_batch(model, X), y)]
    else:
        seqs = [_as_batch(model, s)[0] for s in X]
        if not seqs:
            raise EmptySequence("empty batch")
        by_len = {}
        for i, s in enumerate(seqs):
            by_len.setdefault(s.shape[0], []).append(i)
        groups = [(np.stack([seqs[i] for i in idx]), y[idx]) for _, idx in sorted(by_len.items())]
    n = sum(len(g[1]) for g in groups)
    if n == 0:
        raise EmptySequence("empty batch")
    if n != len(y):
        raise ShapeMismatch(f"{n} sequences but {len(y)} targets")

    total_grads, total_loss = None, 0.0
    for Xg, yg in groups:
        grads, lsum = _backward_equal_length(model, Xg, yg)
        total_loss += lsum
        if total_grads is None:
            total_grads = grads
        else:
            for acc, g in zip(total_grads, grads):
                for k in acc:
                    acc[k] += g[k]
    for g in total_grads:
        for k in g:
            g[k] /= n
    return total_grads, total_loss / n


# -- checkpoints -------------------------------------------------------------


def save_model(model: NetworkModel, path, config_digest: str = "", extras: dict | None = None) -> None:
    """Write a versioned ``.npz`` checkpoint.

    Entries: ``meta`` (JSON string: format, version, spec, input_width,
    config_digest, extra keys), ``p{i}.{W,U,b}`` parameter arrays and
    ``x.{name}`` for optional extra arrays (e.g. input scaling).
    """
    extras = extras or {}
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "spec": [s.to_dict() for s in model.spec],
        "input_width": model.input_width,
        "config_digest": config_digest,
        "extras": sorted(extras),
    }
    arrays = {"meta": np.str_(json.dumps(meta, sort_keys=True))}
    for i, p in enumerate(model.params):
        for k, v in p.items():
            arrays[f"p{i}.{k}"] = v
    for k, v in extras.items():
        arrays[f"x.{k}"] = np.asarray(v)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path, with_meta: bool = False):
    """Inverse of :func:`save_model`; optionally also return ``(meta, extras)``."""
    try:
        with np.load(Path(path), allow_pickle=False) as npz:
            meta = json.loads(str(npz["meta"]))
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise CorruptCheckpoint("not a shakesense checkpoint")
            if meta.get("version") != CHECKPOINT_VERSION:
                raise VersionMismatch(f"checkpoint version {meta.get('version')}, expected {CHECKPOINT_VERSION}")
            spec = validate_spec(meta["spec"])
            params = []
            for i, layer in enumerate(spec):
                keys = ("W", "U", "b") if layer.kind in RECURRENT_KINDS else ("W", "b")
                params.append({k: npz[f"p{i}.{k}"] for k in keys})
            extras = {k: npz[f"x.{k}"] for k in meta.get("extras", [])}
    except (CorruptCheckpoint, VersionMismatch):
        raise
    except (zipfile.BadZipFile, KeyError, ValueError, EOFError, OSError, InvalidSpec) as exc:
        raise CorruptCheckpoint(f"cannot read checkpoint {path}: {exc}") from exc
    model = NetworkModel(spec, int(meta["input_width"]), params)
    _check_shapes(model)
    if with_meta:
        return model, meta, extras
    return model


def _check_shapes(model: NetworkModel):
    width = model.input_width
    for i, (layer, p) in enumerate(zip(model.spec, model.params)):
        n = layer.units
        if layer.kind in RECURRENT_KINDS:
            k = N_BLOCKS[layer.kind]
            expected = {"W": (width, k * n), "U": (n, k * n), "b": (k * n,)}
        else:
            expected = {"W": (width, n), "b": (n,)}
        for key, shape in expected.items():
            if p[key].shape != shape:
                raise CorruptCheckpoint(f"layer {i} {key}: shape {p[key].shape}, expected {shape}")
        width = n
