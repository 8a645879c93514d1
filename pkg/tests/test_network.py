import numpy as np
import pytest

from csae.errors import ConfigError, TensorShapeError
from csae.network import (
    build_csae,
    classify,
    classify_latent,
    count_parameters,
    decode,
    deployed_parameters,
    encode,
    make_preset,
)


@pytest.mark.unit
class TestPresets:
    def test_small28(self):
        preset = make_preset("small28", latent_dim=10, num_classes=10)
        assert preset.conv_filters == (32, 64)
        assert preset.flat_side == 7

    def test_large128(self):
        preset = make_preset("large128", latent_dim=2, num_classes=5)
        assert preset.conv_filters == (32, 64, 128, 256)
        assert preset.conv_kernels == (5, 5, 3, 3)
        assert preset.flat_side == 8

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"name": "huge", "latent_dim": 2, "num_classes": 2},
            {"name": "small28", "latent_dim": 0, "num_classes": 2},
            {"name": "small28", "latent_dim": 2, "num_classes": 1},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            make_preset(**kwargs)


@pytest.mark.unit
class TestShapes:
    def test_small28_paths(self, small_model):
        x = np.random.default_rng(0).uniform(size=(3, 28, 28, 1)).astype(np.float32)
        z = encode(small_model, x)
        assert z.shape == (3, 10)
        x_hat = decode(small_model, z)
        assert x_hat.shape == (3, 28, 28, 1)
        assert np.all((x_hat >= 0) & (x_hat <= 1))
        p = classify(small_model, x)
        assert p.shape == (3, 10)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, rtol=1e-5)
        np.testing.assert_allclose(classify_latent(small_model, z), p, rtol=1e-6)

    def test_large128_decoder_mirrors_input(self):
        model = build_csae(make_preset("large128", latent_dim=2, num_classes=3), seed=0)
        assert model.input_shape == (128, 128, 1)
        x_hat = decode(model, np.zeros((1, 2), dtype=np.float32))
        assert x_hat.shape == (1, 128, 128, 1)

    def test_rejects_wrong_image_shape(self, small_model):
        with pytest.raises(TensorShapeError):
            encode(small_model, np.zeros((1, 27, 27, 1)))

    def test_rejects_wrong_latent_width(self, small_model):
        with pytest.raises(TensorShapeError):
            decode(small_model, np.zeros((1, 3)))


@pytest.mark.unit
class TestParameters:
    def test_counts_small28(self, small_model):
        counts = count_parameters(small_model)
        assert counts["encoder"] == 438154
        assert counts["decoder"] == 441217
        assert counts["classifier"] == 19210
        assert counts["total"] == 898581
        assert counts["deployed"] == 457364
        assert deployed_parameters(small_model) == 457364

    def test_counts_without_conv_bias(self):
        model = build_csae(make_preset("small28", 10, 10, conv_bias=False), seed=0)
        # 32 + 64 encoder biases, 32 + 1 decoder biases
        assert count_parameters(model)["total"] == 898581 - 129

    def test_same_seed_same_weights(self):
        preset = make_preset("small28", latent_dim=2, num_classes=3)
        a, b = build_csae(preset, seed=5), build_csae(preset, seed=5)
        for (name, ta), (_, tb) in zip(a.named_tensors(), b.named_tensors()):
            np.testing.assert_array_equal(ta, tb, err_msg=name)

    def test_different_seed_different_weights(self):
        preset = make_preset("small28", latent_dim=2, num_classes=3)
        a, b = build_csae(preset, seed=0), build_csae(preset, seed=1)
        assert not np.array_equal(dict(a.named_tensors())["enc.conv0.w"], dict(b.named_tensors())["enc.conv0.w"])


@pytest.mark.unit
class TestForwardBehaviour:
    def test_deterministic(self, small_model):
        x = np.random.default_rng(1).uniform(size=(4, 28, 28, 1)).astype(np.float32)
        np.testing.assert_array_equal(encode(small_model, x), encode(small_model, x))

    def test_zero_image_maps_to_zero_latent(self, small_model):
        # zero biases at initialization propagate a zero input unchanged
        z = encode(small_model, np.zeros((2, 28, 28, 1), dtype=np.float32))
        assert not z.any()

    def test_zero_weights_give_uniform_outputs(self, small_model):
        for _, tensor in small_model.named_tensors():
            tensor[...] = 0
        x = np.random.default_rng(0).uniform(size=(2, 28, 28, 1)).astype(np.float32)
        np.testing.assert_array_equal(decode(small_model, encode(small_model, x)), 0.5)
        np.testing.assert_allclose(classify(small_model, x), 0.1, rtol=1e-6)

    def test_batched_inference_matches_single_pass(self, small_model):
        x = np.random.default_rng(2).uniform(size=(10, 28, 28, 1)).astype(np.float32)
        np.testing.assert_allclose(encode(small_model, x, batch_size=3), encode(small_model, x), rtol=1e-6, atol=1e-7)

    def test_snapshot_is_independent(self, small_model):
        snap = small_model.snapshot()
        dict(small_model.named_tensors())["enc.fc2.w"][...] = 0
        assert dict(snap.named_tensors())["enc.fc2.w"].any()
