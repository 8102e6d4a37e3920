"""Classical imputation baselines: column means and iterative PCA.

Both operate on a (time, node) float64 matrix plus an observed-entry
mask; missing cells may hold NaN. Observed entries pass through to the
output untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _check_inputs(values: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray,
                                                                 np.ndarray]:
    values = np.asarray(values, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.uint8)
    if values.ndim != 2:
        raise ValueError("imputation expects a 2-d matrix")
    if mask.shape != values.shape:
        raise ValueError("mask shape does not match matrix shape")
    if not np.any(mask == 1):
        raise ValueError("cannot impute a fully missing matrix")
    observed = values[mask == 1]
    if not np.all(np.isfinite(observed)):
        raise ValueError("observed entries must be finite")
    return values, mask


def mean_impute(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Fill each missing cell with its node's observed column mean.

    Columns with no observations fall back to the global observed mean.
    """
    values, mask = _check_inputs(values, mask)
    safe = np.where(mask == 1, values, 0.0)
    counts = mask.sum(axis=0)
    col_means = safe.sum(axis=0) / np.maximum(counts, 1)
    global_mean = safe.sum() / mask.sum()
    col_means = np.where(counts == 0, global_mean, col_means)
    return np.where(mask == 1, values, col_means[None, :])


@dataclass(frozen=True)
class PcaConfig:
    """Iterative PCA settings; rank None picks the smallest rank whose
    singular values explain at least `variance_target` of the total."""

    rank: int | None = None
    variance_target: float = 0.95
    tol: float = 1e-6
    max_iter: int = 100


@dataclass(frozen=True)
class PcaResult:
    completed: np.ndarray
    iterations: int
    rank: int


def pca_impute(values: np.ndarray, mask: np.ndarray,
               config: PcaConfig = PcaConfig()) -> PcaResult:
    """Complete the matrix by alternating rank-r SVD truncation and
    re-imposing observed entries, starting from the mean fill.

    Convergence is declared when the relative Frobenius change of the
    iterate drops below config.tol; iteration stops at config.max_iter
    regardless.
    """
    values, mask = _check_inputs(values, mask)
    if not np.any(mask == 0):
        return PcaResult(completed=values.copy(), iterations=0, rank=0)
    if config.max_iter < 1:
        raise ValueError("PcaConfig.max_iter must be at least 1")

    filled = mean_impute(values, mask)
    max_rank = min(values.shape)
    if config.rank is None:
        s = np.linalg.svd(filled, compute_uv=False)
        energy = np.cumsum(s ** 2)
        total = energy[-1]
        if total == 0.0:
            rank = 1
        else:
            rank = int(np.searchsorted(energy / total,
                                       config.variance_target) + 1)
        rank = min(rank, max_rank)
    else:
        if config.rank < 1:
            raise ValueError("PcaConfig.rank must be positive")
        rank = min(config.rank, max_rank)

    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        u, s, vt = np.linalg.svd(filled, full_matrices=False)
        approx = (u[:, :rank] * s[:rank]) @ vt[:rank]
        new = np.where(mask == 1, values, approx)
        change = float(np.linalg.norm(new - filled))
        scale = max(float(np.linalg.norm(filled)), 1e-12)
        filled = new
        if change / scale < config.tol:
            break
    return PcaResult(completed=filled, iterations=iterations, rank=rank)
