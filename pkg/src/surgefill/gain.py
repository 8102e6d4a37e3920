"""Adversarial imputation of masked surge matrices.

A generator network proposes values for every entry of a patch; a
discriminator receives the blend of observed data and generated values,
plus a hint matrix that reveals part of the true mask, and predicts the
probability that each entry was observed. Training alternates Adam steps
on the two networks. Imputation runs the trained generator over a patch
grid covering the matrix, averages overlapping predictions, and fills in
only the missing entries.

Patches are (t_window, s_window) blocks cut from the matrix after the
columns are sorted by node location. The two network families are

- dense: the patch and its mask are flattened and concatenated,
- conv: the patch and mask-like plane are stacked vertically into a
  (2 t_window, s_window) image, optionally with two extra channels
  holding the scaled latitude and longitude of each column.

All randomness flows from one seed through named substreams, so training
and imputation are deterministic functions of (dataset, config, seed).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import (
    DatasetError,
    NormStats,
    SurgeDataset,
    denormalize_values,
    load_container,
    normalize_dataset,
    order_nodes,
    save_container,
)
from .nn import Adam, Conv2D, Dense, Flatten, MaxPool2, Network, ReLU, Sigmoid

PROB_EPS = 1e-8
CHECKPOINT_FORMAT = "surgefill-checkpoint"


class TrainingDivergenceError(RuntimeError):
    """Raised when a training loss stops being finite."""


# ---------------------------------------------------------------------------
# Masking algebra and losses
# ---------------------------------------------------------------------------

def intermediate_imputation(values: np.ndarray, mask: np.ndarray,
                            noise: np.ndarray) -> np.ndarray:
    """Observed entries kept, missing entries replaced by noise."""
    values, mask, noise = (np.asarray(a, dtype=np.float64)
                           for a in (values, mask, noise))
    if values.shape != mask.shape or values.shape != noise.shape:
        raise ValueError("intermediate_imputation: shape mismatch")
    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(noise))):
        raise ValueError("intermediate_imputation: non-finite input")
    return values * mask + noise * (1.0 - mask)


def final_imputation(values: np.ndarray, mask: np.ndarray,
                     generated: np.ndarray) -> np.ndarray:
    """Observed entries kept, missing entries taken from the generator."""
    values, mask, generated = (np.asarray(a, dtype=np.float64)
                               for a in (values, mask, generated))
    if values.shape != mask.shape or values.shape != generated.shape:
        raise ValueError("final_imputation: shape mismatch")
    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(generated))):
        raise ValueError("final_imputation: non-finite input")
    return values * mask + generated * (1.0 - mask)


def hint_matrix(mask: np.ndarray, reveal: np.ndarray) -> np.ndarray:
    """Reveal the true mask where `reveal` is set, 0.5 elsewhere."""
    mask = np.asarray(mask, dtype=np.float64)
    return np.where(reveal, mask, 0.5)


def sample_hint(mask: np.ndarray, hint_rate: float,
                rng: np.random.Generator) -> np.ndarray:
    """Hint with each entry revealed independently at the hint rate."""
    if not 0.0 <= hint_rate <= 1.0:
        raise ValueError(f"hint rate must lie in [0, 1], got {hint_rate}")
    reveal = rng.random(np.asarray(mask).shape) < hint_rate
    return hint_matrix(mask, reveal)


def _clipped(probs: np.ndarray) -> np.ndarray:
    return np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)


def discriminator_loss(mask: np.ndarray, probs: np.ndarray) -> float:
    """Cross-entropy of the predicted observation probabilities:
    -sum(M log p + (1 - M) log(1 - p))."""
    mask = np.asarray(mask, dtype=np.float64)
    p = _clipped(np.asarray(probs, dtype=np.float64))
    return float(-np.sum(mask * np.log(p) + (1.0 - mask) * np.log(1.0 - p)))


def generator_loss(values: np.ndarray, mask: np.ndarray,
                   generated: np.ndarray, probs: np.ndarray,
                   alpha: float) -> float:
    """Adversarial term plus weighted reconstruction on observed entries:
    -sum((1 - M) log p) + alpha * sum(M (X - g)^2)."""
    values, mask, generated = (np.asarray(a, dtype=np.float64)
                               for a in (values, mask, generated))
    p = _clipped(np.asarray(probs, dtype=np.float64))
    adversarial = -np.sum((1.0 - mask) * np.log(p))
    reconstruction = np.sum(mask * (values - generated) ** 2)
    return float(adversarial + alpha * reconstruction)


# ---------------------------------------------------------------------------
# Presets and patch geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Preset:
    name: str
    kind: str            # "dense" or "conv"
    coords: bool         # append scaled lat/lon channels
    t_window: int
    s_window: int


PRESETS = {
    "gain": Preset("gain", kind="dense", coords=False, t_window=1,
                   s_window=125),
    "conv-gain": Preset("conv-gain", kind="conv", coords=True, t_window=3,
                        s_window=125),
    "conv-gain-no-coords": Preset("conv-gain-no-coords", kind="conv",
                                  coords=False, t_window=3, s_window=125),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from "
                         f"{sorted(PRESETS)}") from None


def patch_origins(extent: int, window: int, stride: int) -> list[int]:
    """Origins of a stride grid, clamped so the last patch touches the edge."""
    if extent <= window:
        return [0]
    origins = list(range(0, extent - window + 1, stride))
    if origins[-1] != extent - window:
        origins.append(extent - window)
    return origins


def _pooled(extent: int) -> int:
    return (extent + 1) // 2


def network_input_channels(preset: Preset) -> int:
    return 3 if preset.coords else 1


def build_network(preset: Preset, t_window: int, s_window: int,
                  rng: np.random.Generator) -> Network:
    """One generator-or-discriminator network for the given patch size."""
    out_dim = t_window * s_window
    if preset.kind == "dense":
        width = out_dim
        return Network([
            Dense(2 * out_dim, width, rng=rng), ReLU(),
            Dense(width, width, rng=rng), ReLU(),
            Dense(width, width, rng=rng), ReLU(),
            Dense(width, width, rng=rng), Sigmoid(),
        ])
    channels = network_input_channels(preset)
    rows = 2 * t_window
    flat = _pooled(_pooled(rows)) * _pooled(_pooled(s_window)) * 64
    return Network([
        Conv2D(channels, 32, 3, 3, rng=rng), ReLU(), MaxPool2(),
        Conv2D(32, 64, 3, 3, rng=rng), ReLU(), MaxPool2(),
        Flatten(),
        Dense(flat, 1024, rng=rng), ReLU(),
        Dense(1024, out_dim, rng=rng), Sigmoid(),
    ])


def assemble_patch_input(first: np.ndarray, second: np.ndarray,
                         lat_cols: np.ndarray | None,
                         lon_cols: np.ndarray | None,
                         preset: Preset) -> np.ndarray:
    """Stack two (batch, t, s) planes into the network input.

    The generator passes (intermediate imputation, mask); the
    discriminator passes (final imputation, hint). Dense presets get the
    flat concatenation; conv presets get a (batch, 2t, s, channels) image
    whose extra channels broadcast the scaled column coordinates.
    """
    stacked = np.concatenate([first, second], axis=1)
    if preset.kind == "dense":
        return stacked.reshape(stacked.shape[0], -1)
    if not preset.coords:
        return stacked[..., None]
    if lat_cols is None or lon_cols is None:
        raise ValueError("coordinate channels requested but no coordinates given")
    batch, rows, cols = stacked.shape
    lat_plane = np.broadcast_to(lat_cols[:, None, :], (batch, rows, cols))
    lon_plane = np.broadcast_to(lon_cols[:, None, :], (batch, rows, cols))
    return np.stack([stacked, lat_plane, lon_plane], axis=-1)


# ---------------------------------------------------------------------------
# Configuration and model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    """Training hyper-parameters.

    Window fields of None take the preset patch size; an s_stride of None
    picks s_window // 5, which keeps the patch pool large enough that the
    discriminator cannot simply memorize every patch.
    """

    alpha: float = 10.0
    hint_rate: float = 0.9
    noise_high: float = 0.01
    k_d: int = 64
    k_g: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    iterations: int = 2000
    plateau_window: int = 100
    plateau_tol: float = 1e-4
    t_window: int | None = None
    s_window: int | None = None
    t_stride: int = 1
    s_stride: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        # Zero iterations is legal and yields the freshly initialized model.
        if self.iterations < 0:
            raise ValueError("TrainConfig: iterations must be non-negative")
        if self.k_d < 1 or self.k_g < 1:
            raise ValueError("TrainConfig: batch sizes must be positive")
        if not 0.0 <= self.hint_rate <= 1.0:
            raise ValueError("TrainConfig: hint_rate must lie in [0, 1]")
        if self.alpha < 0.0:
            raise ValueError("TrainConfig: alpha must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        return TrainConfig(**d)


@dataclass(frozen=True)
class CoordScaling:
    """Per-dataset ranges that map node coordinates into [0, 1]."""

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    @staticmethod
    def from_dataset(ds: SurgeDataset) -> "CoordScaling":
        return CoordScaling(float(ds.lat.min()), float(ds.lat.max()),
                            float(ds.lon.min()), float(ds.lon.max()))

    def scale_lat(self, lat: np.ndarray) -> np.ndarray:
        if self.lat_max == self.lat_min:
            return np.full_like(np.asarray(lat, dtype=np.float64), 0.5)
        return (np.asarray(lat, dtype=np.float64) - self.lat_min) / (
            self.lat_max - self.lat_min)

    def scale_lon(self, lon: np.ndarray) -> np.ndarray:
        if self.lon_max == self.lon_min:
            return np.full_like(np.asarray(lon, dtype=np.float64), 0.5)
        return (np.asarray(lon, dtype=np.float64) - self.lon_min) / (
            self.lon_max - self.lon_min)

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "CoordScaling":
        return CoordScaling(**{k: float(v) for k, v in d.items()})


@dataclass
class GainModel:
    """Trained generator/discriminator pair plus everything needed to
    reproduce its input pipeline."""

    preset: Preset
    t_window: int
    s_window: int
    generator: Network
    discriminator: Network
    norm_stats: NormStats
    coord_scaling: CoordScaling
    config: TrainConfig


@dataclass
class TrainTrace:
    """Per-iteration losses (mean per sample) and the stop iteration."""

    d_loss: np.ndarray
    g_loss: np.ndarray
    converged_iteration: int | None = None


@dataclass
class ImputeResult:
    """Completed matrix plus per-entry provenance (1 = was observed)."""

    completed: np.ndarray
    provenance: np.ndarray


# ---------------------------------------------------------------------------
# Gradient steps
# ---------------------------------------------------------------------------

def discriminator_gradients(generator: Network, discriminator: Network,
                            values: np.ndarray, mask: np.ndarray,
                            noise: np.ndarray, reveal: np.ndarray,
                            lat_cols: np.ndarray | None,
                            lon_cols: np.ndarray | None,
                            preset: Preset) -> float:
    """Compute discriminator parameter gradients for one batch.

    Returns the per-sample-mean discriminator loss. The backward pass
    overwrites the discriminator's gradients; the generator is only run
    forward.
    """
    batch, t_window, s_window = values.shape
    blended = intermediate_imputation(values, mask, noise)
    gen_out = generator.forward(
        assemble_patch_input(blended, mask, lat_cols, lon_cols, preset))
    generated = gen_out.reshape(batch, t_window, s_window)
    completed = final_imputation(values, mask, generated)
    hint = hint_matrix(mask, reveal)
    probs = discriminator.forward(
        assemble_patch_input(completed, hint, lat_cols, lon_cols, preset))
    probs = probs.reshape(batch, t_window, s_window)
    loss = discriminator_loss(mask, probs) / batch
    p = _clipped(probs)
    dprobs = -(mask / p - (1.0 - mask) / (1.0 - p)) / batch
    discriminator.backward(dprobs.reshape(batch, -1))
    return loss


def generator_gradients(generator: Network, discriminator: Network,
                        values: np.ndarray, mask: np.ndarray,
                        noise: np.ndarray, reveal: np.ndarray,
                        lat_cols: np.ndarray | None,
                        lon_cols: np.ndarray | None,
                        preset: Preset, alpha: float) -> float:
    """Compute generator parameter gradients for one batch.

    Returns the per-sample-mean generator loss. The adversarial part
    backpropagates through the frozen discriminator into the blend of
    generated values; the reconstruction part acts on the generator
    output directly. Discriminator gradients are overwritten by the
    pass and must not be applied.
    """
    batch, t_window, s_window = values.shape
    blended = intermediate_imputation(values, mask, noise)
    gen_out = generator.forward(
        assemble_patch_input(blended, mask, lat_cols, lon_cols, preset))
    generated = gen_out.reshape(batch, t_window, s_window)
    completed = final_imputation(values, mask, generated)
    hint = hint_matrix(mask, reveal)
    probs = discriminator.forward(
        assemble_patch_input(completed, hint, lat_cols, lon_cols, preset))
    probs = probs.reshape(batch, t_window, s_window)
    loss = generator_loss(values, mask, generated, probs, alpha) / batch
    p = _clipped(probs)
    dprobs = (-(1.0 - mask) / p) / batch
    din = discriminator.backward(dprobs.reshape(batch, -1))
    if preset.kind == "dense":
        dcompleted = din[:, :t_window * s_window].reshape(
            batch, t_window, s_window)
    else:
        dcompleted = din[:, :t_window, :, 0]
    dgenerated = (dcompleted * (1.0 - mask)
                  + (2.0 * alpha / batch) * mask * (generated - values))
    generator.backward(dgenerated.reshape(batch, -1))
    return loss


def generator_objective(generator: Network, discriminator: Network,
                        values: np.ndarray, mask: np.ndarray,
                        noise: np.ndarray, reveal: np.ndarray,
                        lat_cols: np.ndarray | None,
                        lon_cols: np.ndarray | None,
                        preset: Preset, alpha: float) -> float:
    """Per-sample-mean generator loss with no gradient side effects."""
    batch, t_window, s_window = values.shape
    blended = intermediate_imputation(values, mask, noise)
    gen_out = generator.forward(
        assemble_patch_input(blended, mask, lat_cols, lon_cols, preset))
    generated = gen_out.reshape(batch, t_window, s_window)
    completed = final_imputation(values, mask, generated)
    hint = hint_matrix(mask, reveal)
    probs = discriminator.forward(
        assemble_patch_input(completed, hint, lat_cols, lon_cols, preset))
    probs = probs.reshape(batch, t_window, s_window)
    return generator_loss(values, mask, generated, probs, alpha) / batch


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def _seed_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(4)
    names = ("generator_init", "discriminator_init", "loop", "impute")
    return {name: np.random.default_rng(child)
            for name, child in zip(names, children)}


@dataclass
class _PatchSet:
    """Patch views of a column-ordered matrix plus per-patch coordinates."""

    values: np.ndarray          # (patches, t_window, s_window)
    mask: np.ndarray
    lat_cols: np.ndarray | None
    lon_cols: np.ndarray | None
    origins: list[tuple[int, int]]
    t_window: int
    s_window: int


def _cut_patches(values: np.ndarray, mask: np.ndarray,
                 lat_scaled: np.ndarray, lon_scaled: np.ndarray,
                 t_window: int, s_window: int, t_stride: int,
                 s_stride: int, preset: Preset) -> _PatchSet:
    n_t, n_s = values.shape
    t_window = min(t_window, n_t)
    s_window = min(s_window, n_s)
    origins = [(t0, s0)
               for t0 in patch_origins(n_t, t_window, t_stride)
               for s0 in patch_origins(n_s, s_window, s_stride)]
    v = np.stack([values[t0:t0 + t_window, s0:s0 + s_window]
                  for t0, s0 in origins])
    m = np.stack([mask[t0:t0 + t_window, s0:s0 + s_window]
                  for t0, s0 in origins])
    if preset.coords:
        lat_cols = np.stack([lat_scaled[s0:s0 + s_window]
                             for _, s0 in origins])
        lon_cols = np.stack([lon_scaled[s0:s0 + s_window]
                             for _, s0 in origins])
    else:
        lat_cols = lon_cols = None
    return _PatchSet(values=v, mask=m, lat_cols=lat_cols, lon_cols=lon_cols,
                     origins=origins, t_window=t_window, s_window=s_window)


def _pick(arr: np.ndarray | None, idx: np.ndarray) -> np.ndarray | None:
    return None if arr is None else arr[idx]


def train(ds: SurgeDataset, config: TrainConfig = TrainConfig(),
          preset: str | Preset = "conv-gain") -> tuple[GainModel, TrainTrace]:
    """Alternating adversarial training on the masked dataset.

    Each iteration draws a fresh batch of patches with independent noise
    and hint reveals, takes one Adam step on the discriminator, then one
    on the generator. Training stops early once the trailing mean of the
    generator loss over `plateau_window` iterations changes by less than
    `plateau_tol` relative to the preceding window.
    """
    preset = get_preset(preset) if isinstance(preset, str) else preset
    streams = _seed_streams(config.seed)

    normalized, stats = normalize_dataset(ds)
    perm = order_nodes(ds)
    values = np.nan_to_num(normalized.surge[:, perm], nan=0.0)
    mask = normalized.mask[:, perm].astype(np.float64)
    coord_scaling = CoordScaling.from_dataset(ds)
    lat_scaled = coord_scaling.scale_lat(ds.lat[perm])
    lon_scaled = coord_scaling.scale_lon(ds.lon[perm])

    t_window = config.t_window or preset.t_window
    s_window = config.s_window or preset.s_window
    s_stride = config.s_stride or max(1, s_window // 5)
    patches = _cut_patches(values, mask, lat_scaled, lon_scaled,
                           t_window, s_window, config.t_stride, s_stride,
                           preset)

    generator = build_network(preset, patches.t_window, patches.s_window,
                              streams["generator_init"])
    discriminator = build_network(preset, patches.t_window, patches.s_window,
                                  streams["discriminator_init"])
    adam_g = Adam(generator.parameters(), lr=config.learning_rate,
                  beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps)
    adam_d = Adam(discriminator.parameters(), lr=config.learning_rate,
                  beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps)

    rng = streams["loop"]
    n_patches = len(patches.origins)
    shape_d = (config.k_d, patches.t_window, patches.s_window)
    shape_g = (config.k_g, patches.t_window, patches.s_window)
    d_losses: list[float] = []
    g_losses: list[float] = []
    converged = None
    window = config.plateau_window

    for iteration in range(config.iterations):
        try:
            idx = rng.integers(0, n_patches, size=config.k_d)
            noise = rng.uniform(0.0, config.noise_high, size=shape_d)
            reveal = rng.random(shape_d) < config.hint_rate
            loss_d = discriminator_gradients(
                generator, discriminator, patches.values[idx],
                patches.mask[idx], noise, reveal,
                _pick(patches.lat_cols, idx), _pick(patches.lon_cols, idx),
                preset)
            adam_d.step()

            idx = rng.integers(0, n_patches, size=config.k_g)
            noise = rng.uniform(0.0, config.noise_high, size=shape_g)
            reveal = rng.random(shape_g) < config.hint_rate
            loss_g = generator_gradients(
                generator, discriminator, patches.values[idx],
                patches.mask[idx], noise, reveal,
                _pick(patches.lat_cols, idx), _pick(patches.lon_cols, idx),
                preset, config.alpha)
            adam_g.step()
        except ValueError as exc:
            # Layers reject non-finite activations, which in the middle of
            # a training run means the optimization blew up.
            if "non-finite" in str(exc):
                raise TrainingDivergenceError(
                    f"divergence at iteration {iteration}: {exc}") from exc
            raise

        if not (np.isfinite(loss_d) and np.isfinite(loss_g)):
            raise TrainingDivergenceError(
                f"non-finite loss at iteration {iteration}: "
                f"d={loss_d!r} g={loss_g!r}")
        d_losses.append(loss_d)
        g_losses.append(loss_g)

        if len(g_losses) >= 2 * window:
            current = float(np.mean(g_losses[-window:]))
            previous = float(np.mean(g_losses[-2 * window:-window]))
            if abs(current - previous) <= (config.plateau_tol
                                           * max(abs(previous), 1e-12)):
                converged = iteration + 1
                break

    model = GainModel(preset=preset, t_window=patches.t_window,
                      s_window=patches.s_window, generator=generator,
                      discriminator=discriminator, norm_stats=stats,
                      coord_scaling=coord_scaling, config=config)
    trace = TrainTrace(d_loss=np.array(d_losses), g_loss=np.array(g_losses),
                       converged_iteration=converged)
    return model, trace


# ---------------------------------------------------------------------------
# Imputation
# ---------------------------------------------------------------------------

def impute(model: GainModel, ds: SurgeDataset) -> ImputeResult:
    """Fill the missing entries of the dataset with generator predictions.

    Observed entries are copied from the input bit-exactly. Predictions
    come from a fixed tiling of the matrix (unit time stride, column
    stride of a fifth of the window); overlapping patch predictions are
    averaged before denormalization.
    """
    if ds.is_complete():
        return ImputeResult(completed=ds.surge.copy(),
                            provenance=ds.mask.copy())
    if ds.n_t < model.t_window or ds.n_s < model.s_window:
        raise DatasetError(
            f"dataset ({ds.n_t} x {ds.n_s}) is smaller than the model patch "
            f"({model.t_window} x {model.s_window})")

    stats = model.norm_stats
    if stats.degenerate:
        scaled = np.where(ds.mask == 1, 0.5, np.nan)
    else:
        scaled = (ds.surge - stats.vmin) / (stats.vmax - stats.vmin)
    perm = order_nodes(ds)
    values = np.nan_to_num(scaled[:, perm], nan=0.0)
    mask = ds.mask[:, perm].astype(np.float64)
    lat_scaled = model.coord_scaling.scale_lat(ds.lat[perm])
    lon_scaled = model.coord_scaling.scale_lon(ds.lon[perm])

    cfg = model.config
    # Inference tiles the matrix at a fixed fifth-of-window column stride;
    # the training strides only control how densely SGD samples patches.
    s_stride = max(1, model.s_window // 5)
    patches = _cut_patches(values, mask, lat_scaled, lon_scaled,
                           model.t_window, model.s_window, 1,
                           s_stride, model.preset)
    if (patches.t_window, patches.s_window) != (model.t_window,
                                                model.s_window):
        raise DatasetError("patch geometry incompatible with the model")

    rng = _seed_streams(cfg.seed)["impute"]
    noise_field = rng.uniform(0.0, cfg.noise_high, size=values.shape)
    noise = np.stack([noise_field[t0:t0 + model.t_window,
                                  s0:s0 + model.s_window]
                      for t0, s0 in patches.origins])
    blended = intermediate_imputation(patches.values, patches.mask, noise)
    gen_in = assemble_patch_input(blended, patches.mask, patches.lat_cols,
                                  patches.lon_cols, model.preset)
    # Bounded-size forward chunks keep activation memory flat on wide grids.
    chunks = [model.generator.forward(gen_in[start:start + 512])
              for start in range(0, len(gen_in), 512)]
    generated = np.concatenate(chunks, axis=0).reshape(
        len(patches.origins), model.t_window, model.s_window)

    sums = np.zeros_like(values)
    counts = np.zeros_like(values)
    for k, (t0, s0) in enumerate(patches.origins):
        sums[t0:t0 + model.t_window, s0:s0 + model.s_window] += generated[k]
        counts[t0:t0 + model.t_window, s0:s0 + model.s_window] += 1.0
    averaged = sums / counts

    filled_norm = denormalize_values(averaged, stats)
    completed_ordered = np.where(mask == 1.0, 0.0, filled_norm)
    completed = np.empty_like(ds.surge)
    completed[:, perm] = completed_ordered
    completed = np.where(ds.mask == 1, ds.surge, completed)
    return ImputeResult(completed=completed, provenance=ds.mask.copy())


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def _named_parameters(model: GainModel) -> list[tuple[str, np.ndarray]]:
    named = []
    for net_name, net in (("generator", model.generator),
                          ("discriminator", model.discriminator)):
        for i, layer in enumerate(net.layers):
            for param in layer.parameters():
                named.append((f"{net_name}.{i}.{param.name}", param.value))
    return named


def save_model(model: GainModel, path: str | Path) -> Path:
    """Write the checkpoint container; returns the header path."""
    header = {
        "format": CHECKPOINT_FORMAT,
        "preset": model.preset.name,
        "t_window": model.t_window,
        "s_window": model.s_window,
        "norm_stats": model.norm_stats.to_dict(),
        "coord_scaling": model.coord_scaling.to_dict(),
        "train_config": model.config.to_dict(),
    }
    return save_container(path, header, _named_parameters(model))


def load_model(path: str | Path) -> GainModel:
    header, arrays = load_container(path)
    if header.get("format") != CHECKPOINT_FORMAT:
        raise DatasetError(f"not a checkpoint container: format="
                           f"{header.get('format')!r}")
    preset = get_preset(header["preset"])
    config = TrainConfig.from_dict(header["train_config"])
    t_window = int(header["t_window"])
    s_window = int(header["s_window"])
    rng = np.random.default_rng(0)
    model = GainModel(
        preset=preset, t_window=t_window, s_window=s_window,
        generator=build_network(preset, t_window, s_window, rng),
        discriminator=build_network(preset, t_window, s_window, rng),
        norm_stats=NormStats.from_dict(header["norm_stats"]),
        coord_scaling=CoordScaling.from_dict(header["coord_scaling"]),
        config=config)
    for name, value in _named_parameters(model):
        if name not in arrays:
            raise DatasetError(f"checkpoint missing parameter {name}")
        if arrays[name].shape != value.shape:
            raise DatasetError(f"checkpoint parameter {name} has shape "
                               f"{arrays[name].shape}, expected {value.shape}")
        value[...] = arrays[name]
    return model
