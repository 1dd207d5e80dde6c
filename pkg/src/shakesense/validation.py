"""Input validation helpers for sequence estimators."""

from __future__ import annotations

import numbers

import numpy as np

from shakesense.errors import EmptySequence, ShapeMismatch


def check_sequences(X, width: int | None = None):
    """Validate a batch of feature sequences.

    Accepts a 3-D array ``(n, time, width)`` or an iterable of 2-D
    ``(time, width)`` arrays (``MfccSequence`` objects are unwrapped).
    Returns a float64 3-D array when all sequences share a length, otherwise
    a list of 2-D arrays.
    """
    if isinstance(X, np.ndarray) and X.ndim == 3:
        seqs = X.astype(np.float64, copy=False)
        if seqs.shape[0] == 0:
            raise ValueError("no sequences given")
        if seqs.shape[1] == 0:
            raise EmptySequence("sequences have no frames")
        lengths_equal = True
    else:
        seqs = [np.asarray(getattr(s, "frames", s), dtype=np.float64) for s in X]
        if not seqs:
            raise ValueError("no sequences given")
        for i, s in enumerate(seqs):
            if s.ndim != 2:
                raise ShapeMismatch(f"sequence {i} must be 2-D (time, width), got shape {s.shape}")
            if s.shape[0] == 0:
                raise EmptySequence(f"sequence {i} has no frames")
        lengths_equal = all(s.shape == seqs[0].shape for s in seqs)
        if lengths_equal:
            seqs = np.stack(seqs)

    widths = {seqs.shape[2]} if isinstance(seqs, np.ndarray) else {s.shape[1] for s in seqs}
    if len(widths) != 1:
        raise ShapeMismatch(f"sequences have differing feature widths {sorted(widths)}")
    if width is not None and widths != {width}:
        raise ShapeMismatch(f"feature width {widths.pop()} != expected {width}")
    finite = np.all(np.isfinite(seqs)) if isinstance(seqs, np.ndarray) else all(np.all(np.isfinite(s)) for s in seqs)
    if not finite:
        raise ValueError("features contain NaN or infinity")
    return seqs


def n_sequences(X) -> int:
    return X.shape[0] if isinstance(X, np.ndarray) else len(X)


def sequence_width(X) -> int:
    return X.shape[2] if isinstance(X, np.ndarray) else X[0].shape[1]


def check_targets(y, n: int, numeric: bool = False) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ShapeMismatch(f"targets must be 1-D, got shape {y.shape}")
    if len(y) != n:
        raise ShapeMismatch(f"{n} sequences but {len(y)} targets")
    if numeric:
        y = y.astype(np.float64)
        if not np.all(np.isfinite(y)):
            raise ValueError("targets contain NaN or infinity")
    return y


def check_random_state_seed(random_state) -> int:
    """Accept only integer seeds; full-protocol determinism depends on it."""
    if random_state is None:
        return 0
    if isinstance(random_state, numbers.Integral):
        return int(random_state)
    raise TypeError("random_state must be an int")
