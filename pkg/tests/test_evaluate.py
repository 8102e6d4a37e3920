"""Scoring and structure-quantifier tests against brute-force oracles."""

import csv
import io

import numpy as np
import pytest

from surgefill.data import DatasetError
from surgefill.evaluate import (RmseReport, cells_csv, count_rectangles,
                                derive_seed, grid_csv, rmse_missing,
                                run_benchmark, structure_histogram)
from surgefill.synth import SynthConfig, synthesize_surge
from surgefill.gain import TrainConfig
from surgefill.data import calibrate_delta, generate_structured_mask


def brute_force_pairs(mask: np.ndarray, t_min: int, s_min: int):
    """Quadruple-loop enumeration of all-missing rectangle placements."""
    miss = np.asarray(mask) == 0
    n_t, n_s = miss.shape
    counts: dict[int, int] = {}
    for h in range(t_min, n_t + 1):
        for w in range(s_min, n_s + 1):
            for t0 in range(n_t - h + 1):
                for s0 in range(n_s - w + 1):
                    if miss[t0:t0 + h, s0:s0 + w].all():
                        area = h * w
                        counts[area] = counts.get(area, 0) + 1
    return tuple(sorted(counts.items()))


class TestRmseMissing:
    def test_exact_on_identical_arrays(self):
        rng = np.random.default_rng(0)
        truth = rng.normal(size=(6, 7))
        mask = rng.integers(0, 2, size=(6, 7))
        mask[0, 0] = 0
        assert rmse_missing(truth, truth, mask) == 0.0

    def test_single_missing_entry_error(self):
        truth = np.zeros((2, 2))
        imp = truth.copy()
        imp[1, 1] = 0.3
        mask = np.array([[1, 1], [1, 0]])
        assert abs(rmse_missing(imp, truth, mask) - 0.3) < 1e-15

    def test_hand_value_two_entries(self):
        truth = np.zeros((1, 3))
        imp = np.array([[0.3, 0.0, -0.4]])
        mask = np.array([[0, 1, 0]])
        expected = np.sqrt((0.09 + 0.16) / 2.0)
        assert abs(rmse_missing(imp, truth, mask) - expected) < 1e-12
        assert abs(expected - 0.35355339059327376) < 1e-15

    def test_permutation_invariant_over_missing(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            truth = rng.normal(size=(5, 8))
            imp = truth + rng.normal(size=(5, 8))
            mask = rng.integers(0, 2, size=(5, 8))
            mask.flat[rng.integers(0, mask.size)] = 0
            base = rmse_missing(imp, truth, mask)
            perm = rng.permutation(mask.size)
            r2 = rmse_missing(imp.flat[perm].reshape(5, 8),
                              truth.flat[perm].reshape(5, 8),
                              mask.flat[perm].reshape(5, 8))
            assert abs(base - r2) < 1e-12

    def test_errors(self):
        with pytest.raises(ValueError, match="no missing"):
            rmse_missing(np.zeros((2, 2)), np.zeros((2, 2)), np.ones((2, 2)))
        with pytest.raises(ValueError, match="shape"):
            rmse_missing(np.zeros((2, 2)), np.zeros((2, 3)), np.ones((2, 2)))
        with pytest.raises(ValueError, match="binary"):
            rmse_missing(np.zeros((2, 2)), np.zeros((2, 2)),
                         np.full((2, 2), 0.5))


class TestCountRectangles:
    def test_single_solid_block_paper_cutoff(self):
        mask = np.ones((10, 60), dtype=np.int64)
        mask[2:7, 10:50] = 0
        report = count_rectangles(mask, t_min=5, s_min=40)
        assert report.pairs == ((200, 1),)
        assert report.total_count() == 1

    def test_no_missing_entries(self):
        report = count_rectangles(np.ones((8, 8), dtype=np.int64), 1, 1)
        assert report.pairs == ()

    def test_all_missing_tiny(self):
        mask = np.zeros((2, 2), dtype=np.int64)
        report = count_rectangles(mask, 1, 1)
        # 1x1: 4 placements (area 1); 1x2 and 2x1: 2 each (area 2); 2x2: 1.
        assert report.pairs == ((1, 4), (2, 4), (4, 1))

    def test_exhaustive_all_4x4_masks(self):
        # Rectangle placements as 16-bit patterns for an independent oracle.
        rects = []
        for h in range(1, 5):
            for w in range(1, 5):
                for t0 in range(5 - h):
                    for s0 in range(5 - w):
                        bits = 0
                        for t in range(t0, t0 + h):
                            for s in range(s0, s0 + w):
                                bits |= 1 << (4 * t + s)
                        rects.append((bits, h * w))
        for value in range(1 << 16):
            missing_bits = (~value) & 0xFFFF
            expected: dict[int, int] = {}
            for bits, area in rects:
                if missing_bits & bits == bits:
                    expected[area] = expected.get(area, 0) + 1
            mask = np.array([[(value >> (4 * t + s)) & 1 for s in range(4)]
                             for t in range(4)])
            got = count_rectangles(mask, 1, 1)
            assert got.pairs == tuple(sorted(expected.items())), value

    def test_random_6x6_against_brute_force(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            mask = (rng.random((6, 6)) < 0.55).astype(np.int64)
            for t_min, s_min in ((1, 1), (2, 2), (2, 3)):
                got = count_rectangles(mask, t_min, s_min)
                assert got.pairs == brute_force_pairs(mask, t_min, s_min)

    def test_random_12x12_against_brute_force_200_seeds(self):
        for seed in range(200):
            rng = np.random.default_rng(seed)
            mask = (rng.random((12, 12)) < rng.uniform(0.3, 0.8)).astype(np.int64)
            got = count_rectangles(mask, 2, 2)
            assert got.pairs == brute_force_pairs(mask, 2, 2)

    def test_random_15x15_against_brute_force(self):
        for seed in range(40):
            rng = np.random.default_rng(1000 + seed)
            mask = (rng.random((15, 15)) < 0.5).astype(np.int64)
            got = count_rectangles(mask, 2, 3)
            assert got.pairs == brute_force_pairs(mask, 2, 3)

    def test_containment_monotonicity(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            m1 = (rng.random((9, 9)) < 0.5).astype(np.int64)
            m2 = m1.copy()
            extra = rng.random((9, 9)) < 0.3
            m2[extra] = 0
            c1 = dict(count_rectangles(m1, 1, 1).pairs)
            c2 = dict(count_rectangles(m2, 1, 1).pairs)
            for area, n in c1.items():
                assert n <= c2.get(area, 0)

    def test_validation(self):
        with pytest.raises(ValueError, match="2-d"):
            count_rectangles(np.zeros(4, dtype=np.int64))
        with pytest.raises(ValueError, match="binary"):
            count_rectangles(np.full((3, 3), 0.5))
        with pytest.raises(ValueError, match=">= 1"):
            count_rectangles(np.ones((3, 3), dtype=np.int64), 0, 1)

    def test_structured_storm_mask_paper_cutoffs(self):
        ds = synthesize_surge(SynthConfig(seed=4))
        cal = calibrate_delta(ds, target_rate=0.30)
        mask = generate_structured_mask(ds, cal.delta)
        report = count_rectangles(mask, t_min=5, s_min=40)
        assert all(area >= 200 for area, _ in report.pairs)
        hist = structure_histogram(report, area_cutoff=6000)
        assert all(area >= 6000 for area, _ in hist)
        assert set(hist) <= set(report.pairs)


class TestStructureHistogram:
    def test_cutoff_filters_and_sorts(self):
        from surgefill.evaluate import StructureReport
        report = StructureReport(t_min=1, s_min=1,
                                 pairs=((200, 3), (250, 1), (6100, 2)))
        assert structure_histogram(report, 0) == [(200, 3), (250, 1), (6100, 2)]
        assert structure_histogram(report, 6000) == [(6100, 2)]
        assert structure_histogram(report, 7000) == []

    def test_empty_report(self):
        from surgefill.evaluate import StructureReport
        report = StructureReport(t_min=1, s_min=1, pairs=())
        assert structure_histogram(report, 0) == []


SMALL_SYNTH = SynthConfig(n_t=20, n_s=130)
FAST_TRAIN = TrainConfig(iterations=2, k_d=2, k_g=2)


class TestRunBenchmark:
    def test_single_cell_mi(self):
        report = run_benchmark(methods=("mi",), rate_bins=(0.2,),
                               storms_per_bin=1, repetitions=1, seed=3,
                               synth=SMALL_SYNTH)
        assert len(report.cells) == 1
        cell = report.cells[0]
        assert cell.method == "mi" and cell.error == ""
        assert np.isfinite(cell.rmse) and cell.rmse > 0
        assert report.bin_mean("mi", 0.2) == cell.rmse

    def test_deterministic_given_master_seed(self):
        kw = dict(methods=("mi", "pca", "gain"), rate_bins=(0.15, 0.3),
                  storms_per_bin=2, repetitions=2, seed=9,
                  synth=SMALL_SYNTH, train_config=FAST_TRAIN)
        r1 = run_benchmark(**kw)
        r2 = run_benchmark(**kw)
        assert [c.rmse for c in r1.cells] == [c.rmse for c in r2.cells]
        assert grid_csv(r1) == grid_csv(r2)
        assert cells_csv(r1) == cells_csv(r2)

    def test_jobs_parallel_merge_matches_serial(self):
        kw = dict(methods=("mi", "pca"), rate_bins=(0.2,), storms_per_bin=2,
                  repetitions=2, seed=5, synth=SMALL_SYNTH)
        serial = run_benchmark(jobs=1, **kw)
        parallel = run_benchmark(jobs=2, **kw)
        assert [(c.method, c.storm, c.rep, c.rmse) for c in serial.cells] == \
               [(c.method, c.storm, c.rep, c.rmse) for c in parallel.cells]

    def test_cell_failure_recorded_not_raised(self, monkeypatch):
        import surgefill.evaluate as ev
        real = ev.run_method

        def flaky(method, masked, seed, train_config, pca_config):
            if method == "pca":
                raise RuntimeError("injected failure")
            return real(method, masked, seed, train_config, pca_config)

        monkeypatch.setattr(ev, "run_method", flaky)
        report = run_benchmark(methods=("mi", "pca"), rate_bins=(0.2,),
                               storms_per_bin=1, repetitions=1, seed=2,
                               synth=SMALL_SYNTH)
        by_method = {c.method: c for c in report.cells}
        assert by_method["mi"].error == ""
        assert np.isnan(by_method["pca"].rmse)
        assert by_method["pca"].error == "RuntimeError: injected failure"

    def test_aggregation_helpers(self):
        report = RmseReport(methods=("mi",), rate_bins=(0.2,),
                            storms_per_bin=2, repetitions=3, seed=0)
        from surgefill.evaluate import BenchmarkCell
        values = [[1.0, 2.0, 6.0], [3.0, 4.0, 20.0]]
        for storm in range(2):
            for rep in range(3):
                report.cells.append(BenchmarkCell(
                    rate=0.2, storm=storm, method="mi", rep=rep,
                    rmse=values[storm][rep], seconds=0.0))
        grid = report.cell_values("mi", 0.2)
        assert grid.shape == (2, 3)
        assert report.bin_mean("mi", 0.2) == pytest.approx(np.mean(values))
        # medians per storm: 2.0 and 4.0 -> mean 3.0
        assert report.bin_median_over_reps("mi", 0.2) == pytest.approx(3.0)

    def test_grid_csv_layout(self):
        report = run_benchmark(methods=("mi", "pca"), rate_bins=(0.1, 0.3),
                               storms_per_bin=1, repetitions=1, seed=7,
                               synth=SMALL_SYNTH)
        rows = list(csv.reader(io.StringIO(grid_csv(report))))
        assert rows[0] == ["method", "0.1", "0.3"]
        assert [r[0] for r in rows[1:]] == ["mi", "pca"]
        assert float(rows[1][1]) == report.bin_mean("mi", 0.1)

    def test_cells_csv_roundtrip_without_timing(self):
        report = run_benchmark(methods=("mi",), rate_bins=(0.2,),
                               storms_per_bin=1, repetitions=2, seed=7,
                               synth=SMALL_SYNTH)
        rows = list(csv.reader(io.StringIO(cells_csv(report))))
        assert rows[0] == ["rate", "storm", "method", "rep", "rmse", "error"]
        assert len(rows) == 3
        assert float(rows[1][4]) == report.cells[0].rmse

    def test_validation_errors(self):
        with pytest.raises(ValueError, match="nonempty"):
            run_benchmark(methods=())
        with pytest.raises(ValueError, match="unknown"):
            run_benchmark(methods=("mi", "nope"))
        with pytest.raises(ValueError, match="rate bins"):
            run_benchmark(methods=("mi",), rate_bins=(0.0,))
        with pytest.raises(ValueError, match="jobs"):
            run_benchmark(methods=("mi",), rate_bins=(0.2,), jobs=0)
        with pytest.raises(ValueError, match=">= 1"):
            run_benchmark(methods=("mi",), rate_bins=(0.2,), storms_per_bin=0)

    def test_derive_seed_stable_and_distinct(self):
        a = derive_seed(7, 1, 2, 3)
        assert a == derive_seed(7, 1, 2, 3)
        assert a != derive_seed(7, 1, 2, 4)
        assert a != derive_seed(8, 1, 2, 3)
        assert 0 <= a < 2 ** 63
