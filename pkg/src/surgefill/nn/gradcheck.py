"""Finite-difference verification of analytic gradients.

The checker compares backpropagated gradients against central differences
of a scalar loss. Errors are reported as

    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)

so that both large and near-zero gradients are judged on the same scale.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .layers import Network

LossFn = Callable[[np.ndarray], tuple[float, np.ndarray]]


def weighted_sum_loss(weights: np.ndarray) -> LossFn:
    """Loss L(out) = sum(weights * out); its gradient is the weight array."""

    def loss(out: np.ndarray) -> tuple[float, np.ndarray]:
        return float(np.sum(weights * out)), weights.copy()

    return loss


def relative_error(analytic: float, numeric: float) -> float:
    denom = max(abs(analytic), abs(numeric), 1e-8)
    return abs(analytic - numeric) / denom


def check_parameter_gradients(net: Network, x: np.ndarray, loss_fn: LossFn,
                              rng: np.random.Generator,
                              max_coords: int = 100,
                              step: float = 1e-5) -> float:
    """Max relative error over sampled parameter coordinates.

    Coordinates are sampled without replacement across all parameters
    (all of them when the network has fewer than `max_coords` entries).
    """
    out = net.forward(x)
    _, dout = loss_fn(out)
    net.backward(dout)
    params = net.parameters()
    offsets = np.cumsum([0] + [p.value.size for p in params])
    total = int(offsets[-1])
    n = min(max_coords, total)
    picks = rng.choice(total, size=n, replace=False)
    worst = 0.0
    for flat in picks:
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        idx = np.unravel_index(int(flat - offsets[k]), params[k].shape)
        analytic = float(params[k].grad[idx])
        original = params[k].value[idx]
        params[k].value[idx] = original + step
        plus, _ = loss_fn(net.forward(x))
        params[k].value[idx] = original - step
        minus, _ = loss_fn(net.forward(x))
        params[k].value[idx] = original
        numeric = (plus - minus) / (2.0 * step)
        worst = max(worst, relative_error(analytic, numeric))
    return worst


def check_input_gradients(net: Network, x: np.ndarray, loss_fn: LossFn,
                          rng: np.random.Generator,
                          max_coords: int = 100,
                          step: float = 1e-5) -> float:
    """Max relative error over sampled input coordinates."""
    x = np.array(x, dtype=np.float64)
    out = net.forward(x)
    _, dout = loss_fn(out)
    dx = net.backward(dout)
    n = min(max_coords, x.size)
    picks = rng.choice(x.size, size=n, replace=False)
    worst = 0.0
    for flat in picks:
        idx = np.unravel_index(int(flat), x.shape)
        analytic = float(dx[idx])
        original = x[idx]
        x[idx] = original + step
        plus, _ = loss_fn(net.forward(x))
        x[idx] = original - step
        minus, _ = loss_fn(net.forward(x))
        x[idx] = original
        numeric = (plus - minus) / (2.0 * step)
        worst = max(worst, relative_error(analytic, numeric))
    return worst
