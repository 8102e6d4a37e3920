"""Surge dataset type, on-disk container, masks, and normalization.

A dataset is a time-by-node float64 matrix of surge heights plus a node
table (id, latitude, longitude, elevation) and an equally spaced time
axis. Missing entries are NaN in the matrix and 0 in the companion mask;
the two encodings must always agree.

On disk a dataset is a two-file container: a UTF-8 JSON header with the
dimensions, time step, node table, and array manifest, next to a binary
blob holding the arrays little-endian in manifest order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DATASET_FORMAT = "surgefill-dataset"
CONTAINER_VERSION = 1

# Relative tolerance for the equal-spacing check on the time axis.
TIME_SPACING_RTOL = 1e-9


class DatasetError(ValueError):
    """Raised for malformed datasets, containers, or mask disagreements."""


@dataclass
class SurgeDataset:
    """Storm-surge matrix with node metadata.

    surge is (n_t, n_s) with rows ordered by time and columns by node
    table order; missing entries hold NaN and mask 0, observed entries
    are finite and mask 1.
    """

    times: np.ndarray
    node_ids: list[str]
    lat: np.ndarray
    lon: np.ndarray
    elevation: np.ndarray
    surge: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        self.times = np.ascontiguousarray(self.times, dtype=np.float64)
        self.lat = np.ascontiguousarray(self.lat, dtype=np.float64)
        self.lon = np.ascontiguousarray(self.lon, dtype=np.float64)
        self.elevation = np.ascontiguousarray(self.elevation, dtype=np.float64)
        self.surge = np.ascontiguousarray(self.surge, dtype=np.float64)
        self.mask = np.ascontiguousarray(self.mask, dtype=np.uint8)
        self.node_ids = [str(i) for i in self.node_ids]
        self.validate()

    @property
    def n_t(self) -> int:
        return self.surge.shape[0]

    @property
    def n_s(self) -> int:
        return self.surge.shape[1]

    @property
    def time_step(self) -> float:
        if len(self.times) < 2:
            return 1.0
        return float(self.times[1] - self.times[0])

    def is_complete(self) -> bool:
        return bool(np.all(self.mask == 1))

    def missing_rate(self) -> float:
        return float(np.mean(self.mask == 0))

    def validate(self) -> None:
        n_t, n_s = self.surge.shape
        if self.times.shape != (n_t,):
            raise DatasetError(
                f"time axis has {self.times.shape[0]} entries for {n_t} rows")
        for name, arr in (("lat", self.lat), ("lon", self.lon),
                          ("elevation", self.elevation)):
            if arr.shape != (n_s,):
                raise DatasetError(f"{name} has {arr.shape[0]} entries for "
                                   f"{n_s} columns")
            if not np.all(np.isfinite(arr)):
                raise DatasetError(f"non-finite values in {name}")
        if len(self.node_ids) != n_s:
            raise DatasetError(
                f"node table has {len(self.node_ids)} ids for {n_s} columns")
        if self.mask.shape != (n_t, n_s):
            raise DatasetError("mask shape does not match surge shape")
        if not np.all((self.mask == 0) | (self.mask == 1)):
            raise DatasetError("mask entries must be 0 or 1")
        if len(self.times) > 1:
            steps = np.diff(self.times)
            if steps[0] <= 0 or np.any(steps <= 0):
                raise DatasetError("non-monotone time axis")
            tol = TIME_SPACING_RTOL * max(1.0, abs(float(steps[0])))
            if np.any(np.abs(steps - steps[0]) > tol):
                raise DatasetError("time axis is not equally spaced")
        nan_at = np.isnan(self.surge)
        if np.any(nan_at & (self.mask == 1)):
            t, s = np.argwhere(nan_at & (self.mask == 1))[0]
            raise DatasetError(f"mask disagreement at ({t}, {s}): "
                               "NaN marked observed")
        if np.any(~nan_at & (self.mask == 0)):
            t, s = np.argwhere(~nan_at & (self.mask == 0))[0]
            raise DatasetError(f"mask disagreement at ({t}, {s}): "
                               "value present but marked missing")
        observed = self.surge[self.mask == 1]
        if observed.size and not np.all(np.isfinite(observed)):
            raise DatasetError("non-finite observed surge values")


# ---------------------------------------------------------------------------
# Generic two-file container (shared with model checkpoints)
# ---------------------------------------------------------------------------

def _header_path(path: str | Path) -> Path:
    p = Path(path)
    return p if p.suffix == ".json" else p.with_name(p.name + ".json")


def save_container(path: str | Path, header: dict,
                   arrays: list[tuple[str, np.ndarray]]) -> Path:
    """Write a JSON header plus a little-endian binary blob next to it."""
    header_path = _header_path(path)
    blob_path = header_path.with_suffix(".bin")
    manifest = []
    chunks = []
    for name, arr in arrays:
        dtype = np.dtype(arr.dtype).newbyteorder("<")
        data = np.ascontiguousarray(arr, dtype=dtype)
        manifest.append({"name": name, "dtype": dtype.str,
                         "shape": list(arr.shape)})
        chunks.append(data.tobytes())
    payload = dict(header)
    payload["version"] = CONTAINER_VERSION
    payload["blob"] = blob_path.name
    payload["arrays"] = manifest
    header_path.write_text(json.dumps(payload, indent=2) + "\n",
                           encoding="utf-8")
    blob_path.write_bytes(b"".join(chunks))
    return header_path


def load_container(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    header_path = _header_path(path)
    try:
        header = json.loads(header_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"malformed container header: {exc}") from exc
    for key in ("format", "version", "blob", "arrays"):
        if key not in header:
            raise DatasetError(f"container header missing '{key}'")
    blob = (header_path.parent / header["blob"]).read_bytes()
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for entry in header["arrays"]:
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
        if offset + nbytes > len(blob):
            raise DatasetError("blob shorter than the array manifest")
        arrays[entry["name"]] = np.frombuffer(
            blob, dtype=dtype, count=int(np.prod(shape, dtype=np.int64)),
            offset=offset).reshape(shape).copy()
        offset += nbytes
    if offset != len(blob):
        raise DatasetError("blob longer than the array manifest")
    return header, arrays


# ---------------------------------------------------------------------------
# Dataset IO
# ---------------------------------------------------------------------------

def save_dataset(ds: SurgeDataset, path: str | Path) -> Path:
    """Write the two-file dataset container; returns the header path."""
    header = {
        "format": DATASET_FORMAT,
        "n_t": ds.n_t,
        "n_s": ds.n_s,
        "t_step": ds.time_step,
        "nodes": [[nid, float(la), float(lo), float(el)]
                  for nid, la, lo, el in zip(ds.node_ids, ds.lat, ds.lon,
                                             ds.elevation)],
    }
    return save_container(path, header, [
        ("times", ds.times),
        ("surge", ds.surge),
        ("mask", ds.mask),
    ])


def load_dataset(path: str | Path) -> SurgeDataset:
    header, arrays = load_container(path)
    if header.get("format") != DATASET_FORMAT:
        raise DatasetError(f"not a dataset container: format="
                           f"{header.get('format')!r}")
    for name in ("times", "surge", "mask"):
        if name not in arrays:
            raise DatasetError(f"dataset container missing array '{name}'")
    nodes = header.get("nodes", [])
    return SurgeDataset(
        times=arrays["times"],
        node_ids=[row[0] for row in nodes],
        lat=np.array([row[1] for row in nodes], dtype=np.float64),
        lon=np.array([row[2] for row in nodes], dtype=np.float64),
        elevation=np.array([row[3] for row in nodes], dtype=np.float64),
        surge=arrays["surge"],
        mask=arrays["mask"],
    )


def load_node_table_csv(path: str | Path) -> tuple[list[str], np.ndarray,
                                                   np.ndarray, np.ndarray]:
    """Read a node table CSV with the exact header id,lat,lon,elev."""
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError("empty node table CSV") from None
        if [c.strip().lower() for c in header] != ["id", "lat", "lon", "elev"]:
            raise DatasetError(
                "node table CSV must start with the header id,lat,lon,elev")
        ids: list[str] = []
        lat, lon, elev = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DatasetError(f"node table line {lineno}: expected 4 "
                                   f"fields, got {len(row)}")
            ids.append(row[0])
            try:
                lat.append(float(row[1]))
                lon.append(float(row[2]))
                elev.append(float(row[3]))
            except ValueError as exc:
                raise DatasetError(f"node table line {lineno}: {exc}") from exc
    return ids, np.array(lat), np.array(lon), np.array(elev)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormStats:
    """Min-max statistics computed from observed entries only."""

    vmin: float
    vmax: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {"vmin": self.vmin, "vmax": self.vmax,
                "degenerate": self.degenerate}

    @staticmethod
    def from_dict(d: dict) -> "NormStats":
        return NormStats(vmin=float(d["vmin"]), vmax=float(d["vmax"]),
                         degenerate=bool(d["degenerate"]))


def normalize_dataset(ds: SurgeDataset) -> tuple[SurgeDataset, NormStats]:
    """Scale observed entries to [0, 1]; missing entries stay NaN.

    Constant observed data cannot be ranged, so it maps to 0.5 and the
    stats carry a degenerate flag that denormalization honors.
    """
    observed = ds.surge[ds.mask == 1]
    if observed.size == 0:
        raise DatasetError("cannot normalize a dataset with no observed entries")
    vmin = float(observed.min())
    vmax = float(observed.max())
    scaled = np.where(ds.mask == 1, ds.surge, np.nan)
    if vmax == vmin:
        stats = NormStats(vmin=vmin, vmax=vmax, degenerate=True)
        scaled = np.where(ds.mask == 1, 0.5, np.nan)
    else:
        stats = NormStats(vmin=vmin, vmax=vmax)
        scaled = (scaled - vmin) / (vmax - vmin)
    out = SurgeDataset(times=ds.times, node_ids=ds.node_ids, lat=ds.lat,
                       lon=ds.lon, elevation=ds.elevation, surge=scaled,
                       mask=ds.mask.copy())
    return out, stats


def denormalize_values(values: np.ndarray, stats: NormStats) -> np.ndarray:
    """Map [0, 1] values back to physical units."""
    if stats.degenerate:
        return np.full_like(np.asarray(values, dtype=np.float64), stats.vmin)
    return stats.vmin + np.asarray(values, dtype=np.float64) * (stats.vmax
                                                                - stats.vmin)


# ---------------------------------------------------------------------------
# Masks
# ---------------------------------------------------------------------------

def generate_structured_mask(ds: SurgeDataset, delta: float) -> np.ndarray:
    """Observed iff surge(t, s) >= elevation(s) + delta; needs a complete field.

    An entry below the adjusted elevation is a dry node whose gauge
    reports nothing; that is exactly where the mask is 0.
    """
    if not ds.is_complete():
        raise DatasetError("structured mask needs a complete surge field")
    threshold = ds.elevation[None, :] + delta
    return (ds.surge >= threshold).astype(np.uint8)


def generate_mcar_mask(n_t: int, n_s: int, rate: float,
                       rng: np.random.Generator) -> np.ndarray:
    """Each entry missing independently with the given probability."""
    if not 0.0 <= rate <= 1.0:
        raise DatasetError(f"missing rate must lie in [0, 1], got {rate}")
    return (rng.random((n_t, n_s)) >= rate).astype(np.uint8)


def apply_mask(ds: SurgeDataset, mask: np.ndarray) -> SurgeDataset:
    """Blank out entries where mask is 0; the input must be complete there."""
    mask = np.asarray(mask, dtype=np.uint8)
    if mask.shape != ds.surge.shape:
        raise DatasetError("mask shape does not match dataset shape")
    surge = np.where(mask == 1, ds.surge, np.nan)
    combined = (ds.mask & mask).astype(np.uint8)
    return SurgeDataset(times=ds.times, node_ids=ds.node_ids, lat=ds.lat,
                        lon=ds.lon, elevation=ds.elevation, surge=surge,
                        mask=combined)


@dataclass(frozen=True)
class CalibrationResult:
    """Outcome of searching for the elevation offset hitting a target rate."""

    delta: float
    achieved_rate: float
    within_tolerance: bool


def calibrate_delta(ds: SurgeDataset, target_rate: float,
                    tolerance: float = 0.005,
                    min_interval: float = 1e-9) -> CalibrationResult:
    """Bisection on delta so the structured mask hits the target missing rate.

    The achieved rate is a step function of delta, so the exact target may
    be unattainable; the nearest achievable rate is returned and the
    within_tolerance flag records whether it landed inside the band.
    """
    if not ds.is_complete():
        raise DatasetError("calibration needs a complete surge field")
    if not 0.0 <= target_rate <= 1.0:
        raise DatasetError(f"target rate must lie in [0, 1], got {target_rate}")
    margin = ds.surge - ds.elevation[None, :]

    def rate_at(delta: float) -> float:
        return float(np.mean(margin < delta))

    lo = float(margin.min())
    hi = float(np.nextafter(margin.max(), np.inf))
    best_delta, best_rate = lo, rate_at(lo)
    best_err = abs(best_rate - target_rate)
    r_hi = rate_at(hi)
    if abs(r_hi - target_rate) < best_err:
        best_delta, best_rate, best_err = hi, r_hi, abs(r_hi - target_rate)
    while hi - lo > min_interval and best_err > tolerance:
        mid = 0.5 * (lo + hi)
        r = rate_at(mid)
        if abs(r - target_rate) < best_err:
            best_delta, best_rate, best_err = mid, r, abs(r - target_rate)
        if r < target_rate:
            lo = mid
        else:
            hi = mid
    return CalibrationResult(delta=best_delta, achieved_rate=best_rate,
                             within_tolerance=best_err <= tolerance)


# ---------------------------------------------------------------------------
# Node ordering
# ---------------------------------------------------------------------------

def order_nodes(ds: SurgeDataset) -> np.ndarray:
    """Column permutation sorting nodes by (lat, lon), ties broken by id."""
    ids = np.array(ds.node_ids)
    return np.lexsort((ids, ds.lon, ds.lat))
