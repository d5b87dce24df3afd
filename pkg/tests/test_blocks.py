"""Composite blocks: gate, frequency mixer, residual block, pyramid."""

import numpy as np
import pytest

from sfnet.blocks import (FrequencyMixer, ResidualBlock, StructurePyramid,
                          simple_gate)
from sfnet.errors import ConfigError, ShapeError
from sfnet.tensor import Tensor


def _rng():
    return np.random.default_rng(0)


class TestSimpleGate:
    def test_fixture(self):
        x = Tensor(np.array([2.0, 3.0, 4.0, 5.0]).reshape(1, 4, 1, 1))
        out = simple_gate(x)
        np.testing.assert_allclose(out.data.reshape(-1), [8.0, 15.0])

    def test_zero_half_annihilates(self):
        rng = _rng()
        top = rng.standard_normal((1, 3, 2, 2))
        x = Tensor(np.concatenate([top, np.zeros_like(top)], axis=1))
        assert np.all(simple_gate(x).data == 0.0)

    def test_ones_half_is_identity(self):
        rng = _rng()
        top = rng.standard_normal((1, 3, 2, 2))
        x = Tensor(np.concatenate([top, np.ones_like(top)], axis=1))
        np.testing.assert_array_equal(simple_gate(x).data, top)

    def test_odd_channels_rejected(self):
        with pytest.raises(ShapeError):
            simple_gate(Tensor(np.zeros((1, 3, 2, 2))))


class TestFrequencyMixer:
    def test_zero_weight_is_skip_only(self):
        mixer = FrequencyMixer("m", 3, _rng(), dtype=np.float64)
        mixer.conv1.weight.data[:] = 0.0
        x = Tensor(_rng().standard_normal((1, 3, 5, 6)))
        np.testing.assert_allclose(mixer(x).data, x.data, atol=1e-12)

    def test_identity_weight_doubles(self):
        mixer = FrequencyMixer("m", 2, _rng(), dtype=np.float64)
        mixer.conv1.weight.data[:] = np.eye(4).reshape(4, 4, 1, 1)
        x = Tensor(_rng().standard_normal((1, 2, 5, 5)))
        np.testing.assert_allclose(mixer(x).data, 2.0 * x.data, atol=1e-5)

    def test_single_sinusoid_bin_scaling(self):
        # a pure 2-D sinusoid occupies one conjugate bin pair; scaling the
        # whole spectrum by s returns (1+s) * input through the skip
        h, w = 8, 8
        ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
        sinus = np.cos(2 * np.pi * (2 * ii / h + 3 * jj / w))
        x = Tensor(sinus[None, None])
        for s in (0.0, 1.0, 0.5):
            mixer = FrequencyMixer("m", 1, _rng(), dtype=np.float64)
            mixer.conv1.weight.data[:] = s * np.eye(2).reshape(2, 2, 1, 1)
            np.testing.assert_allclose(mixer(x).data, (1.0 + s) * x.data,
                                       atol=1e-6)

    def test_energy_preserved_with_zero_weights(self):
        mixer = FrequencyMixer("m", 2, _rng(), dtype=np.float64)
        mixer.conv1.weight.data[:] = 0.0
        x = Tensor(_rng().standard_normal((1, 2, 4, 7)))
        assert np.sum(mixer(x).data ** 2) == pytest.approx(np.sum(x.data ** 2))

    def test_odd_sizes_preserved(self):
        for variant in ("simplified", "complex"):
            mixer = FrequencyMixer("m", 2, _rng(), variant=variant)
            for (h, w) in [(3, 3), (5, 4), (1, 6)]:
                x = Tensor(_rng().standard_normal((1, 2, h, w)).astype(np.float32))
                assert mixer(x).shape == x.shape

    def test_complex_variant_has_second_conv(self):
        mixer = FrequencyMixer("m", 2, _rng(), variant="complex")
        assert mixer.conv2 is not None
        assert len(mixer.parameters()) == 4

    def test_bad_variant(self):
        with pytest.raises(ConfigError):
            FrequencyMixer("m", 2, _rng(), variant="fancy")

    def test_channel_mismatch(self):
        mixer = FrequencyMixer("m", 3, _rng())
        with pytest.raises(ShapeError):
            mixer(Tensor(np.zeros((1, 2, 4, 4))))


class TestResidualBlock:
    def _zeroed(self, c=4, **kwargs):
        block = ResidualBlock("b", c, _rng(), dtype=np.float64, **kwargs)
        for p in block.parameters():
            if p.name.endswith(".w"):
                p.data[:] = 0.0
        return block

    def test_zero_convs_identity(self):
        block = self._zeroed()
        x = Tensor(_rng().standard_normal((1, 4, 6, 6)))
        np.testing.assert_allclose(block(x).data, x.data, atol=1e-6)

    def test_zero_convs_alpha_beta_product(self):
        a, b = 0.7, -1.3
        block = self._zeroed()
        block.alpha.data[:] = a
        block.beta.data[:] = b
        x = Tensor(_rng().standard_normal((1, 4, 5, 5)))
        np.testing.assert_allclose(block(x).data, a * b * x.data, atol=1e-6)

    def test_shape_preserved(self):
        block = ResidualBlock("b", 3, _rng())
        for (h, w) in [(8, 8), (12, 16), (16, 9)]:
            x = Tensor(_rng().standard_normal((2, 3, h, w)).astype(np.float32))
            assert block(x).shape == x.shape

    def test_frequency_branch_optional(self):
        block = ResidualBlock("b", 3, _rng(), use_frequency=False)
        assert block.freq is None
        x = Tensor(_rng().standard_normal((1, 3, 6, 6)).astype(np.float32))
        assert block(x).shape == x.shape


class TestStructurePyramid:
    def test_level_dims(self):
        pyr = StructurePyramid("p", 1, [8, 16, 32, 64], 4, _rng())
        levels = pyr(Tensor(np.random.default_rng(1).random((1, 1, 64, 64))
                            .astype(np.float32)))
        dims = [lv.shape for lv in levels]
        assert dims == [(1, 8, 64, 64), (1, 16, 32, 32),
                        (1, 32, 16, 16), (1, 64, 8, 8)]

    def test_constant_image_zero_interior(self):
        pyr = StructurePyramid("p", 1, [4, 8], 4, _rng(), dtype=np.float64)
        levels = pyr(Tensor(np.full((1, 1, 16, 16), 0.6)))
        # borders feel the zero padding; two pixels in from the edge every
        # contribution chain saw only the constant
        for lv in levels:
            np.testing.assert_allclose(lv.data[:, :, 2:-2, 2:-2], 0.0, atol=1e-6)

    def test_zero_gamma_all_levels_zero(self):
        pyr = StructurePyramid("p", 1, [4, 8], 4, _rng(), dtype=np.float64)
        pyr.econv_bank.gamma.data[:] = 0.0
        levels = pyr(Tensor(np.random.default_rng(2).random((1, 1, 8, 8))))
        for lv in levels:
            assert np.all(lv.data == 0.0)

    def test_projections_have_no_bias(self):
        pyr = StructurePyramid("p", 1, [4, 8, 16], 4, _rng())
        for proj in pyr.projections:
            assert proj.bias is None
