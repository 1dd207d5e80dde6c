"""Adam with global-norm gradient clipping."""

from __future__ import annotations

import numpy as np


def global_norm(grads) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for p in grads for g in p.values())))


def clip_by_global_norm(grads, max_norm: float | None):
    """Scale ``grads`` in place so their joint L2 norm is at most ``max_norm``."""
    if not max_norm:
        return grads
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        for p in grads:
            for g in p.values():
                g *= scale
    return grads


class Adam:
    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [{k: np.zeros_like(v) for k, v in p.items()} for p in params]
        self.v = [{k: np.zeros_like(v) for k, v in p.items()} for p in params]

    def step(self, params, grads):
        """Apply one update to ``params`` in place."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        lr_t = self.learning_rate * np.sqrt(1.0 - b2**self.t) / (1.0 - b1**self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            for k in p:
                m[k] *= b1
                m[k] += (1.0 - b1) * g[k]
                v[k] *= b2
                v[k] += (1.0 - b2) * g[k] * g[k]
                p[k] -= lr_t * m[k] / (np.sqrt(v[k]) + self.eps)
