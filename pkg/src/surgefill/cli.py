"""Command-line surface for synthesis, masking, training, and reports.

Every command writes its artifacts into one output directory containing
the effective configuration (`config.echo`), any delimited reports, and
any figures. Outputs are byte-identical across repeated runs with the
same inputs and seeds; wall-clock timestamps are confined to `run.log`.

Exit codes: 0 success, 1 file-system errors, 2 validation or usage
errors, 3 training divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .baselines import PcaConfig
from .data import (
    apply_mask,
    calibrate_delta,
    generate_mcar_mask,
    generate_structured_mask,
    load_dataset,
    save_dataset,
    SurgeDataset,
)
from .evaluate import (
    ALL_METHODS,
    cells_csv,
    count_rectangles,
    grid_csv,
    rmse_missing,
    run_benchmark,
    storm_for_bin,
    structure_histogram,
)
from .gain import (
    PRESETS,
    TrainConfig,
    TrainingDivergenceError,
    impute,
    load_model,
    save_model,
    train,
)
from .plots import emit_heatmap, emit_structure_histogram, emit_timeseries
from .synth import SynthConfig, synthesize_surge

OUTPUT_ROOT_ENV = "SURGEFILL_OUT"
DEFAULT_BINS = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)


# ---------------------------------------------------------------------------
# Config plumbing: flags override file values, file values override defaults
# ---------------------------------------------------------------------------

def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(payload, dict):
        raise ValueError("config file must hold a JSON object")
    return payload


def _merged(base, section: dict | None, overrides: dict):
    """Dataclass `base` updated with config-file section, then CLI flags."""
    merged = dict(section or {})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(merged) - set(asdict(base)))
    if unknown:
        raise ValueError(f"unknown config fields {unknown} for "
                         f"{type(base).__name__}")
    return replace(base, **merged)


def _train_overrides(args: argparse.Namespace) -> dict:
    names = ("alpha", "hint_rate", "k_d", "k_g", "learning_rate",
             "iterations", "t_window", "s_window", "seed")
    return {n: getattr(args, n) for n in names if hasattr(args, n)}


def _out_dir(args: argparse.Namespace, command: str) -> Path:
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "surgefill-runs"))
    out = Path(args.out) if args.out else root / command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(out: Path, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    (out / "config.echo").write_text(text, encoding="utf-8")


def _log(out: Path, message: str) -> None:
    # The log file is the only artifact that carries wall-clock timestamps.
    stamp = time.strftime("%Y-%m-%d %H:%M:%S")
    with open(out / "run.log", "a", encoding="utf-8") as handle:
        handle.write(f"[{stamp}] {message}\n")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\r\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    synth = _merged(SynthConfig(), file_cfg.get("synth"),
                    {"seed": args.seed, "n_t": args.n_t, "n_s": args.n_s})
    ds = synthesize_surge(synth)
    out = _out_dir(args, "synth")
    path = save_dataset(ds, out / "storm")
    _echo_config(out, {"command": "synth", "synth": asdict(synth)})
    _log(out, f"synthesized {ds.n_t} x {ds.n_s} storm (seed {synth.seed})")
    print(f"wrote {path}")
    return 0


def cmd_mask(args: argparse.Namespace) -> int:
    ds = load_dataset(args.data)
    out = _out_dir(args, "mask")
    if args.kind == "structured":
        if args.delta is not None:
            delta = args.delta
        else:
            cal = calibrate_delta(ds, args.rate)
            delta = cal.delta
        mask = generate_structured_mask(ds, delta)
        achieved = float(np.mean(mask == 0))
        print(f"delta={delta!r} achieved_rate={achieved:.4f}")
        echo_extra = {"delta": delta}
    else:
        if args.rate is None:
            raise ValueError("mcar masking requires --rate")
        mask = generate_mcar_mask(ds.n_t, ds.n_s, args.rate,
                                  np.random.default_rng(args.mask_seed))
        achieved = float(np.mean(mask == 0))
        print(f"achieved_rate={achieved:.4f}")
        echo_extra = {"mask_seed": args.mask_seed}
    masked = apply_mask(ds, mask)
    path = save_dataset(masked, out / "masked")
    _echo_config(out, {"command": "mask", "data": str(args.data),
                       "kind": args.kind, "rate": args.rate, **echo_extra})
    _log(out, f"masked {args.data} at achieved rate {achieved:.4f}")
    print(f"wrote {path}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    ds = load_dataset(args.data)
    file_cfg = _load_config_file(args.config)
    config = _merged(TrainConfig(), file_cfg.get("train"),
                     _train_overrides(args))
    out = _out_dir(args, "train")
    _echo_config(out, {"command": "train", "data": str(args.data),
                       "preset": args.preset, "train": config.to_dict()})
    _log(out, f"training {args.preset} on {args.data}")
    model, trace = train(ds, config, args.preset)
    path = save_model(model, out / "model")
    _write_csv(out / "loss.csv", ["iteration", "d_loss", "g_loss"],
               [[i, repr(float(d)), repr(float(g))]
                for i, (d, g) in enumerate(zip(trace.d_loss, trace.g_loss))])
    stopped = (f"plateau at iteration {trace.converged_iteration}"
               if trace.converged_iteration is not None
               else f"iteration budget ({config.iterations})")
    _log(out, f"training stopped: {stopped}")
    print(f"wrote {path}")
    print(f"stopped: {stopped}")
    return 0


def cmd_impute(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    ds = load_dataset(args.data)
    result = impute(model, ds)
    completed = SurgeDataset(times=ds.times, node_ids=ds.node_ids, lat=ds.lat,
                             lon=ds.lon, elevation=ds.elevation,
                             surge=result.completed,
                             mask=np.ones_like(ds.mask))
    out = _out_dir(args, "impute")
    path = save_dataset(completed, out / "imputed")
    _echo_config(out, {"command": "impute", "model": str(args.model),
                       "data": str(args.data)})
    _log(out, f"imputed {args.data} with {args.model}")
    print(f"wrote {path}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    imputed = load_dataset(args.imputed)
    truth = load_dataset(args.truth)
    masked = load_dataset(args.masked)
    value = rmse_missing(imputed.surge, truth.surge, masked.mask)
    out = _out_dir(args, "eval")
    _write_csv(out / "metrics.csv", ["metric", "value"],
               [["rmse_missing", repr(value)]])
    _echo_config(out, {"command": "eval", "imputed": str(args.imputed),
                       "truth": str(args.truth), "masked": str(args.masked)})
    _log(out, f"rmse {value!r}")
    print(f"rmse={value!r}")
    return 0


def cmd_structure(args: argparse.Namespace) -> int:
    ds = load_dataset(args.data)
    report = count_rectangles(ds.mask, t_min=args.t_min, s_min=args.s_min)
    out = _out_dir(args, "structure")
    _write_csv(out / "structure.csv", ["area", "count"],
               [[a, c] for a, c in report.pairs])
    filtered = structure_histogram(report, area_cutoff=args.cutoff)
    emit_structure_histogram(
        filtered, out / "structure.svg",
        title=f"rectangles >= {args.t_min} x {args.s_min}, "
              f"area >= {args.cutoff}")
    _echo_config(out, {"command": "structure", "data": str(args.data),
                       "t_min": args.t_min, "s_min": args.s_min,
                       "cutoff": args.cutoff})
    _log(out, f"counted {report.total_count()} rectangles")
    print(f"rectangles={report.total_count()} "
          f"areas_above_cutoff={len(filtered)}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    methods = (tuple(args.methods.split(","))
               if args.methods else tuple(ALL_METHODS))
    bins = (tuple(float(x) for x in args.bins.split(","))
            if args.bins else DEFAULT_BINS)
    synth = _merged(SynthConfig(), file_cfg.get("synth"),
                    {"n_t": args.n_t, "n_s": args.n_s})
    train_config = _merged(TrainConfig(), file_cfg.get("train"),
                           _train_overrides(args))
    pca_config = _merged(PcaConfig(), file_cfg.get("pca"), {})
    out = _out_dir(args, "bench")
    _echo_config(out, {"command": "bench", "methods": list(methods),
                       "bins": list(bins), "storms": args.storms,
                       "reps": args.reps, "seed": args.seed,
                       "jobs": args.jobs, "synth": asdict(synth),
                       "train": train_config.to_dict(),
                       "pca": asdict(pca_config)})
    _log(out, f"benchmark started: {len(methods)} methods x {len(bins)} bins "
              f"x {args.storms} storms x {args.reps} reps")
    report = run_benchmark(methods=methods, rate_bins=bins,
                           storms_per_bin=args.storms,
                           repetitions=args.reps, seed=args.seed,
                           synth=synth, train_config=train_config,
                           pca_config=pca_config, jobs=args.jobs)
    _write_text(out / "metrics.csv", grid_csv(report))
    _write_text(out / "cells.csv", cells_csv(report))

    structure_rows = []
    for b, rate in enumerate(bins):
        for s in range(args.storms):
            _, _, mask = storm_for_bin(synth, args.seed, b, s, rate)
            for area, count in count_rectangles(mask).pairs:
                structure_rows.append([f"{rate:g}", s, area, count])
    _write_csv(out / "structure.csv", ["rate", "storm", "area", "count"],
               structure_rows)
    last_bin_pairs = [(a, c) for r, s, a, c in structure_rows
                      if r == f"{bins[-1]:g}"]
    emit_structure_histogram(last_bin_pairs, out / "structure.svg",
                             title=f"rectangle areas at rate {bins[-1]:g}")
    failures = [c for c in report.cells if c.error]
    _log(out, f"benchmark finished: {len(report.cells)} cells, "
              f"{len(failures)} failures, {report.total_seconds():.1f}s of "
              f"cell time")
    print(f"wrote {out / 'metrics.csv'}")
    for method in methods:
        means = " ".join(f"{rate:g}:{report.bin_mean(method, rate):.4f}"
                         for rate in bins)
        print(f"{method}: {means}")
    if failures:
        print(f"failures: {len(failures)} (see cells.csv)", file=sys.stderr)
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    ds = load_dataset(args.data)
    out = _out_dir(args, "plot")
    written = [emit_heatmap(ds, out / "heatmap.svg", title=args.title)]
    if args.node is not None:
        imputed: dict[str, np.ndarray] = {}
        for item in args.imputed or []:
            name, sep, path = item.partition("=")
            if not sep or not name or not path:
                raise ValueError(
                    f"--imputed expects name=path, got {item!r}")
            imputed[name] = load_dataset(path).surge
        truth = load_dataset(args.truth).surge if args.truth else None
        svg, sidecar = emit_timeseries(ds, args.node, imputed,
                                       out / f"series_{args.node}.svg",
                                       truth=truth)
        written.extend([svg, sidecar])
    _echo_config(out, {"command": "plot", "data": str(args.data),
                       "node": args.node, "truth": args.truth,
                       "imputed": list(args.imputed or []),
                       "title": args.title})
    _log(out, f"plotted {args.data}")
    for path in written:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--out", default=None,
                     help="output directory (default: $%s/<command>)"
                          % OUTPUT_ROOT_ENV)
    sub.add_argument("--config", default=None,
                     help="JSON config file; flags override its values")


def _add_train_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--iterations", type=int, default=None,
                     help="training iterations (default from config)")
    sub.add_argument("--alpha", type=float, default=None,
                     help="reconstruction weight")
    sub.add_argument("--hint-rate", dest="hint_rate", type=float,
                     default=None, help="probability an entry's mask bit is "
                                        "revealed to the discriminator")
    sub.add_argument("--learning-rate", dest="learning_rate", type=float,
                     default=None, help="Adam learning rate")
    sub.add_argument("--k-d", dest="k_d", type=int, default=None,
                     help="discriminator batch size")
    sub.add_argument("--k-g", dest="k_g", type=int, default=None,
                     help="generator batch size")
    sub.add_argument("--t-window", dest="t_window", type=int, default=None,
                     help="patch extent along time")
    sub.add_argument("--s-window", dest="s_window", type=int, default=None,
                     help="patch extent along nodes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surgefill",
        description="Impute structurally missing storm-surge records and "
                    "benchmark imputation methods on synthetic storms.")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser(
        "synth", help="synthesize a complete storm dataset")
    p.add_argument("--seed", type=int, default=None, help="synthesis seed")
    p.add_argument("--n-t", dest="n_t", type=int, default=None,
                   help="number of time steps")
    p.add_argument("--n-s", dest="n_s", type=int, default=None,
                   help="number of nodes")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = commands.add_parser(
        "mask", help="blank out entries of a complete dataset")
    p.add_argument("--data", required=True, help="dataset container to mask")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--rate", type=float, default=None,
                       help="target missing rate in [0, 1]")
    group.add_argument("--delta", type=float, default=None,
                       help="explicit elevation offset (structured only)")
    p.add_argument("--kind", choices=("structured", "mcar"),
                   default="structured",
                   help="structured: dry nodes below elevation + delta; "
                        "mcar: independent uniform misses")
    p.add_argument("--mask-seed", dest="mask_seed", type=int, default=0,
                   help="rng seed for mcar masks")
    _add_common(p)
    p.set_defaults(func=cmd_mask)

    p = commands.add_parser("train", help="train an imputation model")
    p.add_argument("--data", required=True, help="masked dataset container")
    p.add_argument("--preset", choices=sorted(PRESETS), default="conv-gain",
                   help="network family")
    p.add_argument("--seed", type=int, default=None, help="training seed")
    _add_train_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = commands.add_parser(
        "impute", help="fill a masked dataset with a trained model")
    p.add_argument("--model", required=True, help="checkpoint container")
    p.add_argument("--data", required=True, help="masked dataset container")
    _add_common(p)
    p.set_defaults(func=cmd_impute)

    p = commands.add_parser(
        "eval", help="score an imputed dataset against the truth")
    p.add_argument("--imputed", required=True, help="completed container")
    p.add_argument("--truth", required=True, help="complete truth container")
    p.add_argument("--masked", required=True,
                   help="masked container that defines which entries count")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = commands.add_parser(
        "structure", help="quantify the rectangle structure of missingness")
    p.add_argument("--data", required=True, help="masked dataset container")
    p.add_argument("--t-min", dest="t_min", type=int, default=5,
                   help="minimum rectangle height (time steps)")
    p.add_argument("--s-min", dest="s_min", type=int, default=40,
                   help="minimum rectangle width (nodes)")
    p.add_argument("--cutoff", type=int, default=6000,
                   help="histogram area cutoff (cells)")
    _add_common(p)
    p.set_defaults(func=cmd_structure)

    p = commands.add_parser(
        "bench", help="run the RMSE benchmark grid over missing-rate bins")
    p.add_argument("--methods", default=None,
                   help="comma-separated subset of: %s"
                        % ",".join(ALL_METHODS))
    p.add_argument("--bins", default=None,
                   help="comma-separated missing-rate bins "
                        "(default %s)" % ",".join(f"{b:g}"
                                                  for b in DEFAULT_BINS))
    p.add_argument("--storms", type=int, default=5,
                   help="storms per bin")
    p.add_argument("--reps", type=int, default=5,
                   help="repetitions per storm and method")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel worker processes for benchmark cells")
    p.add_argument("--n-t", dest="n_t", type=int, default=None,
                   help="storm time steps")
    p.add_argument("--n-s", dest="n_s", type=int, default=None,
                   help="storm nodes")
    _add_train_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = commands.add_parser(
        "plot", help="render a heat map and optional node series")
    p.add_argument("--data", required=True, help="dataset container to plot")
    p.add_argument("--node", default=None,
                   help="node id for a time-series figure with CSV sidecar")
    p.add_argument("--truth", default=None,
                   help="complete container for the dashed truth line")
    p.add_argument("--imputed", action="append", default=None,
                   metavar="NAME=PATH",
                   help="imputed container to overlay (repeatable)")
    p.add_argument("--title", default=None, help="heat-map title")
    _add_common(p)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingDivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
