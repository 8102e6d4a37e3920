"""Scoring, missingness-structure quantification, and benchmark orchestration.

The benchmark grid synthesizes storms per missing-rate bin, calibrates the
elevation offset per storm, runs every requested method with derived seeds,
and collects per-cell RMSE on the missing entries. All seeds descend from
one master seed, so the whole grid is reproducible bit for bit.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import PcaConfig, mean_impute, pca_impute
from .data import (SurgeDataset, apply_mask, calibrate_delta,
                   generate_structured_mask)
from .gain import PRESETS, TrainConfig, impute, train
from .synth import SynthConfig, synthesize_surge

BASELINE_METHODS = ("mi", "pca")
GAIN_METHODS = tuple(PRESETS)
ALL_METHODS = BASELINE_METHODS + GAIN_METHODS


def rmse_missing(imputed: np.ndarray, truth: np.ndarray,
                 mask: np.ndarray) -> float:
    """Root mean square error over entries with mask == 0."""
    imputed = np.asarray(imputed, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    mask = np.asarray(mask)
    if imputed.shape != truth.shape or imputed.shape != mask.shape:
        raise ValueError(
            f"rmse_missing: shape mismatch {imputed.shape} vs {truth.shape} "
            f"vs {mask.shape}")
    if not np.isin(mask, (0, 1)).all():
        raise ValueError("rmse_missing: mask must be binary")
    missing = mask == 0
    if not missing.any():
        raise ValueError("rmse_missing: no missing entries to score")
    diff = imputed[missing] - truth[missing]
    return float(np.sqrt(np.mean(diff * diff)))


# ---------------------------------------------------------------------------
# Rectangle-based structure quantifier
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StructureReport:
    """Counts of all-missing h x w rectangle placements, aggregated by area.

    `pairs` holds (area, count) sorted by area ascending; every counted
    rectangle has height >= t_min rows and width >= s_min columns, so all
    areas are at least t_min * s_min.
    """

    t_min: int
    s_min: int
    pairs: tuple[tuple[int, int], ...]

    def total_count(self) -> int:
        return sum(c for _, c in self.pairs)


def count_rectangles(mask: np.ndarray, t_min: int = 5,
                     s_min: int = 40) -> StructureReport:
    """Count every placement of an all-missing rectangle of size >= t_min x s_min.

    A rectangle is h consecutive time steps by w consecutive nodes, all
    missing (mask == 0). Every placement of every qualifying (h, w) is
    counted and the counts are aggregated by area h*w.
    """
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"count_rectangles: expected 2-d mask, got {mask.shape}")
    if not np.isin(mask, (0, 1)).all():
        raise ValueError("count_rectangles: mask must be binary")
    if t_min < 1 or s_min < 1:
        raise ValueError("count_rectangles: t_min and s_min must be >= 1")
    n_t, n_s = mask.shape
    missing = mask == 0

    # vert[t, s] = length of the all-missing vertical run starting at (t, s)
    vert = np.zeros((n_t + 1, n_s), dtype=np.int64)
    for t in range(n_t - 1, -1, -1):
        vert[t] = np.where(missing[t], vert[t + 1] + 1, 0)
    vert = vert[:n_t]

    counts: dict[int, int] = {}
    for h in range(t_min, n_t + 1):
        ok = vert[:n_t - h + 1] >= h
        if not ok.any():
            continue
        # horizontal run lengths of True in each row of ok
        padded = np.zeros((ok.shape[0], n_s + 2), dtype=np.int8)
        padded[:, 1:-1] = ok
        d = np.diff(padded, axis=1)
        starts = np.nonzero(d == 1)
        ends = np.nonzero(d == -1)
        runs = ends[1] - starts[1]
        runs = runs[runs >= s_min]
        if runs.size == 0:
            continue
        for w in range(s_min, int(runs.max()) + 1):
            n = int(np.sum(np.maximum(runs - w + 1, 0)))
            if n:
                area = h * w
                counts[area] = counts.get(area, 0) + n
    pairs = tuple(sorted(counts.items()))
    return StructureReport(t_min=t_min, s_min=s_min, pairs=pairs)


def structure_histogram(report: StructureReport,
                        area_cutoff: int = 6000) -> list[tuple[int, int]]:
    """(area, count) pairs with area >= cutoff, sorted by area ascending."""
    return [(a, c) for a, c in report.pairs if a >= area_cutoff]


# ---------------------------------------------------------------------------
# Benchmark orchestration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkCell:
    """One (rate bin, storm, method, repetition) result."""

    rate: float
    storm: int
    method: str
    rep: int
    rmse: float
    seconds: float
    error: str = ""


@dataclass
class RmseReport:
    """All benchmark cells plus the grid configuration that produced them."""

    methods: tuple[str, ...]
    rate_bins: tuple[float, ...]
    storms_per_bin: int
    repetitions: int
    seed: int
    cells: list[BenchmarkCell] = field(default_factory=list)

    def cell_values(self, method: str, rate: float) -> np.ndarray:
        """RMSE values shaped (storms_per_bin, repetitions); failures are NaN."""
        out = np.full((self.storms_per_bin, self.repetitions), np.nan)
        for c in self.cells:
            if c.method == method and c.rate == rate:
                out[c.storm, c.rep] = c.rmse
        return out

    def bin_mean(self, method: str, rate: float) -> float:
        """Mean RMSE over all storms and repetitions in the bin."""
        return float(np.mean(self.cell_values(method, rate)))

    def bin_median_over_reps(self, method: str, rate: float) -> float:
        """Per-storm median over repetitions, then mean over storms."""
        vals = self.cell_values(method, rate)
        return float(np.mean(np.median(vals, axis=1)))

    def total_seconds(self) -> float:
        return float(sum(c.seconds for c in self.cells))


def derive_seed(master: int, *key: int) -> int:
    """A stable 63-bit seed for one benchmark sub-task."""
    ss = np.random.SeedSequence(master, spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def storm_for_bin(synth: SynthConfig, master: int, bin_index: int,
                  storm_index: int, rate: float
                  ) -> tuple[SurgeDataset, SurgeDataset, np.ndarray]:
    """(truth, masked, mask) for one benchmark storm, from derived seeds."""
    storm_seed = derive_seed(master, 1, bin_index, storm_index)
    ds = synthesize_surge(replace(synth, seed=storm_seed))
    cal = calibrate_delta(ds, target_rate=rate)
    mask = generate_structured_mask(ds, cal.delta)
    return ds, apply_mask(ds, mask), mask


def run_method(method: str, masked: SurgeDataset, seed: int,
               train_config: TrainConfig, pca_config: PcaConfig) -> np.ndarray:
    """Impute `masked` with one named method and return the completed matrix."""
    if method == "mi":
        return mean_impute(masked.surge, masked.mask)
    if method == "pca":
        return pca_impute(masked.surge, masked.mask, pca_config).completed
    if method in PRESETS:
        cfg = replace(train_config, seed=seed)
        model, _ = train(masked, cfg, method)
        return impute(model, masked).completed
    raise ValueError(f"unknown method {method!r}; expected one of {ALL_METHODS}")


def _run_cell(task: tuple) -> BenchmarkCell:
    (rate, storm_index, method, rep, cell_seed,
     truth, masked, mask, train_config, pca_config) = task
    start = time.perf_counter()
    try:
        completed = run_method(method, masked, cell_seed, train_config,
                               pca_config)
        value = rmse_missing(completed, truth, mask)
        err = ""
    except Exception as exc:  # per-cell failures must not abort the grid
        value = float("nan")
        err = f"{type(exc).__name__}: {exc}"
    return BenchmarkCell(rate=rate, storm=storm_index, method=method, rep=rep,
                         rmse=value, seconds=time.perf_counter() - start,
                         error=err)


def run_benchmark(methods: tuple[str, ...] = ALL_METHODS,
                  rate_bins: tuple[float, ...] = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30),
                  storms_per_bin: int = 5,
                  repetitions: int = 5,
                  seed: int = 0,
                  synth: SynthConfig = SynthConfig(),
                  train_config: TrainConfig = TrainConfig(),
                  pca_config: PcaConfig = PcaConfig(),
                  jobs: int = 1) -> RmseReport:
    """RMSE grid over missing-rate bins, storms, methods, and repetitions.

    Every cell gets a seed derived from (master seed, bin, storm, method,
    repetition), so results are independent of execution order and of the
    `jobs` worker count.
    """
    if not methods:
        raise ValueError("run_benchmark: methods must be nonempty")
    unknown = [m for m in methods if m not in ALL_METHODS]
    if unknown:
        raise ValueError(f"run_benchmark: unknown methods {unknown}")
    if storms_per_bin < 1 or repetitions < 1:
        raise ValueError("run_benchmark: storms_per_bin and repetitions must be >= 1")
    if not all(0.0 < r < 1.0 for r in rate_bins):
        raise ValueError("run_benchmark: rate bins must lie in (0, 1)")
    if jobs < 1:
        raise ValueError("run_benchmark: jobs must be >= 1")

    tasks = []
    for b, rate in enumerate(rate_bins):
        for s in range(storms_per_bin):
            ds, masked, mask = storm_for_bin(synth, seed, b, s, rate)
            for m, method in enumerate(methods):
                for rep in range(repetitions):
                    cell_seed = derive_seed(seed, 2, b, s, m, rep)
                    tasks.append((rate, s, method, rep, cell_seed, ds.surge,
                                  masked, mask, train_config, pca_config))

    if jobs == 1:
        cells = [_run_cell(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell, tasks))

    report = RmseReport(methods=tuple(methods), rate_bins=tuple(rate_bins),
                        storms_per_bin=storms_per_bin,
                        repetitions=repetitions, seed=seed)
    report.cells = cells
    return report


def grid_csv(report: RmseReport) -> str:
    """Rows = methods, columns = rate bins, values = bin-mean RMSE."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(["method"] + [f"{r:g}" for r in report.rate_bins])
    for method in report.methods:
        row = [method]
        for rate in report.rate_bins:
            row.append(repr(report.bin_mean(method, rate)))
        writer.writerow(row)
    return buf.getvalue()


def cells_csv(report: RmseReport) -> str:
    """Long-format CSV with one row per benchmark cell.

    Timings are deliberately excluded so repeated runs with the same master
    seed serialize byte-identically; they live on the in-memory cells only.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(["rate", "storm", "method", "rep", "rmse", "error"])
    for c in report.cells:
        writer.writerow([f"{c.rate:g}", c.storm, c.method, c.rep,
                         repr(c.rmse), c.error])
    return buf.getvalue()
