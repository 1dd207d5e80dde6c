"""Recurrent cells: single steps and full-sequence forward/backward passes.

Conventions: row vectors, ``x @ W``.  Gated cells keep their gate blocks
side by side along the last axis of ``W`` (input weights), ``U`` (recurrent
weights) and ``b``:

* GRU:  ``[update z | reset r | candidate]``, each ``units`` wide
* LSTM: ``[input i | forget f | output o | candidate g]``
* SRN:  a single block

Sequence functions take ``X`` of shape ``(batch, time, width)`` and start
from a zero state.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from shakesense.errors import ShapeMismatch

RECURRENT_KINDS = ("srn", "lstm", "gru")
N_BLOCKS = {"srn": 1, "gru": 3, "lstm": 4}


sigmoid = expit


def _check_step(params, x, h):
    W, U = params["W"], params["U"]
    if x.shape[-1] != W.shape[0] or h.shape[-1] != U.shape[0]:
        raise ShapeMismatch(
            f"input width {x.shape[-1]} / state width {h.shape[-1]} do not fit "
            f"W {W.shape} / U {U.shape}"
        )


def srn_step(params, x, h):
    x, h = np.asarray(x, float), np.asarray(h, float)
    _check_step(params, x, h)
    return np.tanh(x @ params["W"] + h @ params["U"] + params["b"])


def gru_step(params, x, h):
    """One GRU update.

    ``z = s(Wz x + Uz h + bz)``, ``r = s(Wr x + Ur h + br)``,
    ``c = tanh(Wc x + Uc (r*h) + bc)``, ``h' = (1 - z)*h + z*c``.
    """
    x, h = np.asarray(x, float), np.asarray(h, float)
    _check_step(params, x, h)
    n = h.shape[-1]
    W, U, b = params["W"], params["U"], params["b"]
    a = x @ W + b
    z = sigmoid(a[..., :n] + h @ U[:, :n])
    r = sigmoid(a[..., n : 2 * n] + h @ U[:, n : 2 * n])
    cand = np.tanh(a[..., 2 * n :] + (r * h) @ U[:, 2 * n :])
    return (1.0 - z) * h + z * cand


def lstm_step(params, x, h, c):
    x, h, c = np.asarray(x, float), np.asarray(h, float), np.asarray(c, float)
    _check_step(params, x, h)
    n = h.shape[-1]
    a = x @ params["W"] + h @ params["U"] + params["b"]
    i = sigmoid(a[..., :n])
    f = sigmoid(a[..., n : 2 * n])
    o = sigmoid(a[..., 2 * n : 3 * n])
    g = np.tanh(a[..., 3 * n :])
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


# -- full sequences ---------------------------------------------------------


def _input_projection(params, X):
    B, T, D = X.shape
    if D != params["W"].shape[0]:
        raise ShapeMismatch(f"feature width {D} != layer input width {params['W'].shape[0]}")
    return (X.reshape(B * T, D) @ params["W"] + params["b"]).reshape(B, T, -1)


def sequence_forward(kind, params, X):
    """Run a recurrent layer over ``X``; return hidden states and a cache."""
    A = _input_projection(params, X)
    U = params["U"]
    n = U.shape[0]
    B, T, _ = X.shape
    H = np.zeros((B, T + 1, n))  # H[:, 0] is the initial zero state
    cache = {"X": X, "H": H}
    if kind == "srn":
        for t in range(T):
            H[:, t + 1] = np.tanh(A[:, t] + H[:, t] @ U)
    elif kind == "gru":
        Z = np.empty((B, T, n))
        R = np.empty((B, T, n))
        C = np.empty((B, T, n))
        Uzr, Uc = U[:, : 2 * n], U[:, 2 * n :]
        for t in range(T):
            h = H[:, t]
            zr = sigmoid(A[:, t, : 2 * n] + h @ Uzr)
            z, r = zr[:, :n], zr[:, n:]
            cand = np.tanh(A[:, t, 2 * n :] + (r * h) @ Uc)
            H[:, t + 1] = h + z * (cand - h)
            Z[:, t], R[:, t], C[:, t] = z, r, cand
        cache.update(Z=Z, R=R, C=C)
    elif kind == "lstm":
        Cs = np.zeros((B, T + 1, n))
        G = np.empty((B, T, 4 * n))
        TC = np.empty((B, T, n))
        for t in range(T):
            a = A[:, t] + H[:, t] @ U
            gates = np.empty_like(a)
            gates[:, : 3 * n] = sigmoid(a[:, : 3 * n])
            gates[:, 3 * n :] = np.tanh(a[:, 3 * n :])
            i, f, o, g = (gates[:, k * n : (k + 1) * n] for k in range(4))
            Cs[:, t + 1] = f * Cs[:, t] + i * g
            TC[:, t] = np.tanh(Cs[:, t + 1])
            H[:, t + 1] = o * TC[:, t]
            G[:, t] = gates
        cache.update(Cs=Cs, G=G, TC=TC)
    else:
        raise ValueError(f"unknown recurrent kind {kind!r}")
    return H[:, 1:], cache


def sequence_backward(kind, params, cache, dH):
    """Backpropagation through time.

    ``dH`` holds the loss gradient w.r.t. the layer output at every step,
    shape ``(batch, time, units)``.  Returns parameter gradients (summed over
    the batch) and the gradient w.r.t. the layer input.
    """
    X, H = cache["X"], cache["H"]
    U = params["U"]
    n = U.shape[0]
    B, T, D = X.shape
    dA = np.empty((B, T, N_BLOCKS[kind] * n))
    dh = np.zeros((B, n))
    prev = H[:, :T].reshape(B * T, n)  # state entering each step

    if kind == "srn":
        for t in range(T - 1, -1, -1):
            dh = dh + dH[:, t]
            da = dh * (1.0 - H[:, t + 1] ** 2)
            dh = da @ U.T
            dA[:, t] = da
        dU = prev.T @ dA.reshape(B * T, -1)
    elif kind == "gru":
        Z, R, C = cache["Z"], cache["R"], cache["C"]
        Uzr, Uc = U[:, : 2 * n], U[:, 2 * n :]
        for t in range(T - 1, -1, -1):
            dh = dh + dH[:, t]
            h, z, r, cand = H[:, t], Z[:, t], R[:, t], C[:, t]
            dcand = dh * z * (1.0 - cand**2)
            dz = dh * (cand - h) * z * (1.0 - z)
            drh = dcand @ Uc.T
            dr = drh * h * r * (1.0 - r)
            dA[:, t, :n] = dz
            dA[:, t, n : 2 * n] = dr
            dA[:, t, 2 * n :] = dcand
            dh = dh * (1.0 - z) + drh * r + dA[:, t, : 2 * n] @ Uzr.T
        dU = np.empty_like(U)
        dU[:, : 2 * n] = prev.T @ dA[:, :, : 2 * n].reshape(B * T, -1)
        dU[:, 2 * n :] = (R * H[:, :T]).reshape(B * T, n).T @ dA[:, :, 2 * n :].reshape(B * T, -1)
    elif kind == "lstm":
        Cs, G, TC = cache["Cs"], cache["G"], cache["TC"]
        dc = np.zeros((B, n))
        for t in range(T - 1, -1, -1):
            dh = dh + dH[:, t]
            gates = G[:, t]
            i, f, o, g = (gates[:, k * n : (k + 1) * n] for k in range(4))
            tc = TC[:, t]
            dc = dc + dh * o * (1.0 - tc**2)
            da = np.empty((B, 4 * n))
            da[:, :n] = dc * g * i * (1.0 - i)
            da[:, n : 2 * n] = dc * Cs[:, t] * f * (1.0 - f)
            da[:, 2 * n : 3 * n] = dh * tc * o * (1.0 - o)
            da[:, 3 * n :] = dc * i * (1.0 - g**2)
            dh = da @ U.T
            dc = dc * f
            dA[:, t] = da
        dU = prev.T @ dA.reshape(B * T, -1)
    else:
        raise ValueError(f"unknown recurrent kind {kind!r}")

    flat = dA.reshape(B * T, -1)
    grads = {
        "W": X.reshape(B * T, D).T @ flat,
        "U": dU,
        "b": flat.sum(axis=0),
    }
    dX = (flat @ params["W"].T).reshape(B, T, D)
    return grads, dX
