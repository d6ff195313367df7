"""Plain SGD and Adam. Parameters are updated in place."""

from __future__ import annotations

import numpy as np


def _check_finite(path: str, grad: np.ndarray) -> None:
    if not np.all(np.isfinite(grad)):
        raise ValueError(f"non-finite gradient for parameter {path}")


class SGD:
    def __init__(self, lr: float = 0.01):
        self.lr = float(lr)

    def step(self, params: list[tuple[str, np.ndarray]],
             grads: dict[str, np.ndarray]) -> None:
        for path, p in params:
            g = grads[path]
            if g.shape != p.shape:
                raise ValueError(
                    f"gradient shape {g.shape} does not match parameter "
                    f"{path} shape {p.shape}"
                )
            _check_finite(path, g)
            p -= (self.lr * g).astype(p.dtype)


class Adam:
    """Adam with bias correction (beta1=0.9, beta2=0.999 by default)."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: list[tuple[str, np.ndarray]],
             grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for path, p in params:
            g = grads[path]
            if g.shape != p.shape:
                raise ValueError(
                    f"gradient shape {g.shape} does not match parameter "
                    f"{path} shape {p.shape}"
                )
            _check_finite(path, g)
            m = self._m.setdefault(path, np.zeros_like(p, dtype=np.float64))
            v = self._v.setdefault(path, np.zeros_like(p, dtype=np.float64))
            m[...] = b1 * m + (1.0 - b1) * g
            v[...] = b2 * v + (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1**self.t)
            v_hat = v / (1.0 - b2**self.t)
            p -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype)


def step_network(network, optimizer) -> None:
    """Apply one optimizer step using the gradients left by ``backward``."""
    grads = dict(network.gradients())
    optimizer.step(network.parameters(), grads)
