"""Adam optimizer over Parameter objects."""

from __future__ import annotations

import numpy as np

from .layers import Parameter


class Adam:
    """Adam with bias-corrected first and second moment estimates.

    One `step()` consumes the gradients currently stored on the tracked
    parameters and updates their values in place:

        m <- beta1 m + (1 - beta1) g
        v <- beta2 v + (1 - beta2) g^2
        p <- p - lr * (m / (1 - beta1^t)) / (sqrt(v / (1 - beta2^t)) + eps)
    """

    def __init__(self, params: list[Parameter], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8) -> None:
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise ValueError("Adam: betas must lie in [0, 1)")
        if lr <= 0.0:
            raise ValueError("Adam: lr must be positive")
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.value) for p in params]
        self._v = [np.zeros_like(p.value) for p in params]
        # One update touches each array a dozen times, so large parameters
        # are processed in cache-sized blocks to keep the traffic out of
        # main memory. Blocking does not change the per-element arithmetic.
        self._chunk = 32768
        self._scratch = np.empty(
            max((min(p.value.size, self._chunk) for p in params), default=1))

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        # sqrt(v / bc2) == sqrt(v) / sqrt(bc2): fold the correction into eps-free
        # scaling so the update needs only one temporary buffer per parameter.
        inv_sqrt_bc2 = 1.0 / np.sqrt(1.0 - self.beta2 ** self.t)
        scale = self.lr / bc1
        for p, m_all, v_all in zip(self.params, self._m, self._v):
            g_all = p.grad.reshape(-1)
            p_all = p.value.reshape(-1)
            for start in range(0, g_all.size, self._chunk):
                stop = min(start + self._chunk, g_all.size)
                g = g_all[start:stop]
                m = m_all.reshape(-1)[start:stop]
                v = v_all.reshape(-1)[start:stop]
                tmp = self._scratch[:stop - start]
                m *= self.beta1
                np.multiply(g, 1.0 - self.beta1, out=tmp)
                m += tmp
                v *= self.beta2
                np.multiply(g, g, out=tmp)
                tmp *= 1.0 - self.beta2
                v += tmp
                np.sqrt(v, out=tmp)
                tmp *= inv_sqrt_bc2
                tmp += self.eps
                np.divide(m, tmp, out=tmp)
                tmp *= scale
                p_all[start:stop] -= tmp
