"""surgefill: impute structurally missing storm-surge records.

The package bundles an adversarial imputer built on a small float64
network kernel, classical mean and iterative-PCA baselines, a synthetic
surge-field generator, missingness-structure diagnostics, and a CLI that
ties them together into reproducible benchmark runs.
"""

from .baselines import PcaConfig, PcaResult, mean_impute, pca_impute
from .data import (CalibrationResult, DatasetError, NormStats, SurgeDataset,
                   apply_mask, calibrate_delta, denormalize_values,
                   generate_mcar_mask, generate_structured_mask, load_dataset,
                   load_node_table_csv, normalize_dataset, save_dataset)
from .evaluate import (ALL_METHODS, BenchmarkCell, RmseReport, StructureReport,
                       cells_csv, count_rectangles, derive_seed, grid_csv,
                       rmse_missing, run_benchmark, run_method,
                       storm_for_bin, structure_histogram)
from .gain import (PRESETS, GainModel, ImputeResult, TrainConfig, TrainTrace,
                   TrainingDivergenceError, get_preset, impute, load_model,
                   save_model, train)
from .plots import emit_heatmap, emit_structure_histogram, emit_timeseries
from .synth import SynthConfig, synthesize_surge

__version__ = "0.1.0"

__all__ = [
    "ALL_METHODS",
    "BenchmarkCell",
    "CalibrationResult",
    "DatasetError",
    "GainModel",
    "ImputeResult",
    "NormStats",
    "PRESETS",
    "PcaConfig",
    "PcaResult",
    "RmseReport",
    "StructureReport",
    "SurgeDataset",
    "SynthConfig",
    "TrainConfig",
    "TrainTrace",
    "TrainingDivergenceError",
    "apply_mask",
    "calibrate_delta",
    "cells_csv",
    "count_rectangles",
    "denormalize_values",
    "derive_seed",
    "emit_heatmap",
    "emit_structure_histogram",
    "emit_timeseries",
    "generate_mcar_mask",
    "generate_structured_mask",
    "get_preset",
    "grid_csv",
    "impute",
    "load_dataset",
    "load_model",
    "load_node_table_csv",
    "mean_impute",
    "normalize_dataset",
    "pca_impute",
    "rmse_missing",
    "run_benchmark",
    "run_method",
    "save_dataset",
    "save_model",
    "storm_for_bin",
    "structure_histogram",
    "synthesize_surge",
    "train",
    "__version__",
]
