"""Masking algebra, hint sampling, losses, presets, and gradient wiring."""

import itertools
import math

import numpy as np
import pytest

from surgefill.gain import (
    PRESETS,
    TrainConfig,
    assemble_patch_input,
    build_network,
    discriminator_gradients,
    discriminator_loss,
    final_imputation,
    generator_gradients,
    generator_loss,
    generator_objective,
    get_preset,
    hint_matrix,
    intermediate_imputation,
    patch_origins,
    sample_hint,
)
from surgefill.nn import Adam


class TestMaskingAlgebra:
    def test_all_two_by_two_masks_exhaustively(self):
        rng = np.random.default_rng(0)
        values = rng.uniform(0, 1, (2, 2))
        noise = rng.uniform(0, 0.01, (2, 2))
        generated = rng.uniform(0, 1, (2, 2))
        for bits in itertools.product([0, 1], repeat=4):
            mask = np.array(bits, dtype=np.float64).reshape(2, 2)
            blended = intermediate_imputation(values, mask, noise)
            completed = final_imputation(values, mask, generated)
            for i in range(2):
                for j in range(2):
                    if mask[i, j] == 1:
                        assert blended[i, j] == values[i, j]
                        assert completed[i, j] == values[i, j]
                    else:
                        assert blended[i, j] == noise[i, j]
                        assert completed[i, j] == generated[i, j]

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            intermediate_imputation(np.ones((2, 2)), np.ones((2, 3)),
                                    np.ones((2, 2)))
        with pytest.raises(ValueError, match="shape"):
            final_imputation(np.ones((2, 2)), np.ones((2, 2)),
                             np.ones((3, 2)))

    def test_non_finite_values_rejected(self):
        bad = np.array([[np.nan, 0.0]])
        with pytest.raises(ValueError, match="non-finite"):
            intermediate_imputation(bad, np.ones((1, 2)), np.zeros((1, 2)))


class TestHint:
    def test_full_rate_reveals_mask(self):
        mask = np.array([[1.0, 0.0], [0.0, 1.0]])
        hint = sample_hint(mask, 1.0, np.random.default_rng(0))
        np.testing.assert_array_equal(hint, mask)

    def test_zero_rate_is_all_half(self):
        mask = np.array([[1.0, 0.0]])
        hint = sample_hint(mask, 0.0, np.random.default_rng(0))
        np.testing.assert_array_equal(hint, [[0.5, 0.5]])

    def test_partial_rate_mixes_mask_and_half(self):
        mask = np.ones((200, 200))
        mask[::2] = 0.0
        hint = sample_hint(mask, 0.9, np.random.default_rng(1))
        revealed = hint != 0.5
        assert abs(revealed.mean() - 0.9) < 0.01
        np.testing.assert_array_equal(hint[revealed], mask[revealed])

    def test_hint_matrix_from_fixed_reveal(self):
        mask = np.array([[1.0, 0.0]])
        reveal = np.array([[True, False]])
        np.testing.assert_array_equal(hint_matrix(mask, reveal), [[1.0, 0.5]])

    def test_invalid_rate_rejected(self):
        with pytest.raises(ValueError):
            sample_hint(np.ones((1, 1)), 1.5, np.random.default_rng(0))


class TestLosses:
    def test_missing_entry_at_half_contributes_log_two(self):
        # One missing entry judged at probability 0.5: -log 0.5.
        loss = generator_loss(values=np.zeros((1, 1)), mask=np.zeros((1, 1)),
                              generated=np.zeros((1, 1)),
                              probs=np.full((1, 1), 0.5), alpha=10.0)
        assert abs(loss - 0.6931471805599453) < 1e-9

    def test_discriminator_all_half_hand_value(self):
        # M = [1, 0], probabilities [0.5, 0.5]: loss is 2 log 2.
        loss = discriminator_loss(np.array([[1.0, 0.0]]),
                                  np.array([[0.5, 0.5]]))
        assert abs(loss - 1.3862943611198906) < 1e-9

    def test_discriminator_matches_cross_entropy_oracle(self):
        rng = np.random.default_rng(3)
        mask = (rng.random((5, 5)) < 0.5).astype(np.float64)
        probs = rng.uniform(0.05, 0.95, (5, 5))
        expected = 0.0
        for i in range(5):
            for j in range(5):
                if mask[i, j] == 1:
                    expected -= math.log(probs[i, j])
                else:
                    expected -= math.log(1.0 - probs[i, j])
        assert abs(discriminator_loss(mask, probs) - expected) < 1e-12

    def test_generator_loss_matches_oracle(self):
        rng = np.random.default_rng(4)
        mask = (rng.random((4, 6)) < 0.6).astype(np.float64)
        values = rng.uniform(0, 1, (4, 6))
        generated = rng.uniform(0, 1, (4, 6))
        probs = rng.uniform(0.05, 0.95, (4, 6))
        alpha = 7.5
        expected = 0.0
        for i in range(4):
            for j in range(6):
                if mask[i, j] == 0:
                    expected -= math.log(probs[i, j])
                else:
                    expected += alpha * (values[i, j] - generated[i, j]) ** 2
        got = generator_loss(values, mask, generated, probs, alpha)
        assert abs(got - expected) < 1e-12

    def test_generator_loss_monotone_in_missing_probability(self):
        rng = np.random.default_rng(5)
        mask = np.array([[1.0, 0.0], [0.0, 1.0]])
        values = rng.uniform(0, 1, (2, 2))
        generated = rng.uniform(0, 1, (2, 2))
        probs = np.full((2, 2), 0.4)
        base = generator_loss(values, mask, generated, probs, 10.0)
        bumped = probs.copy()
        bumped[0, 1] = 0.6
        assert generator_loss(values, mask, generated, bumped, 10.0) < base

    def test_extreme_probabilities_stay_finite(self):
        loss = discriminator_loss(np.array([[1.0, 0.0]]),
                                  np.array([[0.0, 1.0]]))
        assert np.isfinite(loss)
        # Clamping at 1e-8 bounds each term by -log(1e-8).
        assert loss <= 2.0 * -math.log(1e-8) + 1e-9


class TestPresets:
    def test_conv_gain_layer_chain(self):
        preset = get_preset("conv-gain")
        net = build_network(preset, 3, 125, np.random.default_rng(0))
        shapes = net.layer_output_shapes((6, 125, 3))
        structural = [(kind, s) for kind, s in shapes
                      if kind in ("Conv2D", "MaxPool2", "Flatten", "Dense")]
        assert structural == [
            ("Conv2D", (6, 125, 32)),
            ("MaxPool2", (3, 63, 32)),
            ("Conv2D", (3, 63, 64)),
            ("MaxPool2", (2, 32, 64)),
            ("Flatten", (4096,)),
            ("Dense", (1024,)),
            ("Dense", (375,)),
        ]
        assert type(net.layers[-1]).__name__ == "Sigmoid"

    def test_gain_preset_is_four_dense_width_125(self):
        net = build_network(get_preset("gain"), 1, 125,
                            np.random.default_rng(0))
        dense = [l for l in net.layers if type(l).__name__ == "Dense"]
        assert len(dense) == 4
        assert all(layer.n_out == 125 for layer in dense)
        assert dense[0].n_in == 250
        assert type(net.layers[-1]).__name__ == "Sigmoid"

    def test_no_coords_preset_has_single_channel(self):
        preset = get_preset("conv-gain-no-coords")
        net = build_network(preset, 3, 125, np.random.default_rng(0))
        assert net.layers[0].in_channels == 1

    def test_unknown_preset_rejected(self):
        with pytest.raises(ValueError, match="unknown preset"):
            get_preset("bogus")

    def test_generator_discriminator_same_output_length(self):
        for name in PRESETS:
            preset = get_preset(name)
            rng = np.random.default_rng(1)
            gen = build_network(preset, preset.t_window, preset.s_window, rng)
            disc = build_network(preset, preset.t_window, preset.s_window, rng)
            out = preset.t_window * preset.s_window
            assert gen.layers[-2].n_out == out
            assert disc.layers[-2].n_out == out


class TestAssembleInput:
    def test_dense_concatenates_planes_flat(self):
        first = np.arange(6, dtype=np.float64).reshape(1, 2, 3)
        second = 10.0 + first
        out = assemble_patch_input(first, second, None, None,
                                   get_preset("gain"))
        np.testing.assert_array_equal(out[0, :6], first.ravel())
        np.testing.assert_array_equal(out[0, 6:], second.ravel())

    def test_conv_stacks_planes_vertically(self):
        first = np.ones((2, 3, 4))
        second = np.zeros((2, 3, 4))
        lat = np.linspace(0, 1, 4)[None, :].repeat(2, axis=0)
        lon = np.linspace(1, 0, 4)[None, :].repeat(2, axis=0)
        out = assemble_patch_input(first, second, lat, lon,
                                   get_preset("conv-gain"))
        assert out.shape == (2, 6, 4, 3)
        np.testing.assert_array_equal(out[0, :3, :, 0], first[0])
        np.testing.assert_array_equal(out[0, 3:, :, 0], second[0])
        # Coordinate channels are constant down each column.
        np.testing.assert_array_equal(out[0, :, :, 1],
                                      np.tile(lat[0], (6, 1)))
        np.testing.assert_array_equal(out[1, :, :, 2],
                                      np.tile(lon[1], (6, 1)))

    def test_no_coords_single_channel(self):
        out = assemble_patch_input(np.ones((1, 2, 3)), np.zeros((1, 2, 3)),
                                   None, None,
                                   get_preset("conv-gain-no-coords"))
        assert out.shape == (1, 4, 3, 1)


class TestPatchOrigins:
    def test_stride_grid_with_clamped_tail(self):
        assert patch_origins(10, 4, 3) == [0, 3, 6]
        assert patch_origins(11, 4, 3) == [0, 3, 6, 7]
        assert patch_origins(4, 4, 1) == [0]

    def test_window_larger_than_extent_clamps_to_single_patch(self):
        assert patch_origins(3, 5, 1) == [0]


def tiny_setup(preset_name, seed=0, batch=3, t_window=2, s_window=8):
    rng = np.random.default_rng(seed)
    preset = get_preset(preset_name)
    gen = build_network(preset, t_window, s_window, rng)
    disc = build_network(preset, t_window, s_window, rng)
    shape = (batch, t_window, s_window)
    values = rng.uniform(0, 1, shape)
    mask = (rng.random(shape) < 0.7).astype(np.float64)
    noise = rng.uniform(0, 0.01, shape)
    reveal = rng.random(shape) < 0.9
    if preset.coords:
        lat = rng.uniform(0, 1, (batch, s_window))
        lon = rng.uniform(0, 1, (batch, s_window))
    else:
        lat = lon = None
    return preset, gen, disc, values, mask, noise, reveal, lat, lon


class TestGradientWiring:
    @pytest.mark.parametrize("preset_name", ["gain", "conv-gain",
                                             "conv-gain-no-coords"])
    def test_generator_gradients_match_finite_differences(self, preset_name):
        (preset, gen, disc, values, mask, noise, reveal,
         lat, lon) = tiny_setup(preset_name, seed=11)
        alpha = 10.0
        generator_gradients(gen, disc, values, mask, noise, reveal, lat, lon,
                            preset, alpha)
        rng = np.random.default_rng(2)
        params = gen.parameters()
        step = 1e-5
        for _ in range(25):
            p = params[int(rng.integers(len(params)))]
            idx = np.unravel_index(int(rng.integers(p.value.size)),
                                   p.value.shape)
            analytic = p.grad[idx]
            orig = p.value[idx]
            p.value[idx] = orig + step
            plus = generator_objective(gen, disc, values, mask, noise, reveal,
                                       lat, lon, preset, alpha)
            p.value[idx] = orig - step
            minus = generator_objective(gen, disc, values, mask, noise,
                                        reveal, lat, lon, preset, alpha)
            p.value[idx] = orig
            numeric = (plus - minus) / (2 * step)
            denom = max(abs(analytic), abs(numeric), 1e-8)
            assert abs(analytic - numeric) / denom < 1e-4

    def test_discriminator_step_decreases_frozen_batch_loss(self):
        (preset, gen, disc, values, mask, noise, reveal,
         lat, lon) = tiny_setup("conv-gain", seed=13)
        adam = Adam(disc.parameters(), lr=1e-5)
        before = discriminator_gradients(gen, disc, values, mask, noise,
                                         reveal, lat, lon, preset)
        adam.step()
        after = discriminator_gradients(gen, disc, values, mask, noise,
                                        reveal, lat, lon, preset)
        assert after < before

    def test_generator_step_decreases_frozen_batch_loss(self):
        (preset, gen, disc, values, mask, noise, reveal,
         lat, lon) = tiny_setup("gain", seed=14)
        adam = Adam(gen.parameters(), lr=1e-5)
        before = generator_gradients(gen, disc, values, mask, noise, reveal,
                                     lat, lon, preset, 10.0)
        adam.step()
        after = generator_objective(gen, disc, values, mask, noise, reveal,
                                    lat, lon, preset, 10.0)
        assert after < before


class TestTrainConfig:
    def test_round_trips_through_dict(self):
        cfg = TrainConfig(iterations=5, k_d=4, k_g=4, t_window=2, s_window=9)
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg

    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(iterations=-1)
        with pytest.raises(ValueError):
            TrainConfig(hint_rate=2.0)
        with pytest.raises(ValueError):
            TrainConfig(alpha=-1.0)
        with pytest.raises(ValueError):
            TrainConfig(k_d=0)
