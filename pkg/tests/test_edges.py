"""Edge kernel banks: fixed stencils, learnable per-channel scale."""

import numpy as np
import pytest

from sfnet.edges import (base_patterns, depthwise_edge_conv, edge_conv,
                         make_kernel_bank)
from sfnet.errors import ConfigError
from sfnet.tensor import Tensor

VERTICAL = np.array([[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]])
HORIZONTAL = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])


def sobel_vertical_oracle(plane):
    """Valid cross-correlation of one plane with the fixed vertical stencil."""
    h, w = plane.shape
    out = np.zeros((h - 2, w - 2))
    for i in range(h - 2):
        for j in range(w - 2):
            out[i, j] = np.sum(plane[i:i + 3, j:j + 3] * VERTICAL)
    return out


class TestBank:
    def test_stencil_fixtures(self):
        bank = make_kernel_bank(4, 4, 1.0, dtype=np.float64)
        w = bank.realized_weight(1, dtype=np.float64).data
        np.testing.assert_allclose(w[0, 0], VERTICAL)
        np.testing.assert_allclose(w[1, 0], HORIZONTAL)

    def test_channel_cycling(self):
        bank = make_kernel_bank(2, 5, 1.0, dtype=np.float64)
        w = bank.realized_weight(1, dtype=np.float64).data
        np.testing.assert_allclose(w[2, 0], VERTICAL)
        np.testing.assert_allclose(w[3, 0], HORIZONTAL)
        np.testing.assert_allclose(w[4, 0], VERTICAL)

    def test_eight_kinds_are_negated_four(self):
        pats = base_patterns(8)
        np.testing.assert_allclose(pats[4:], -pats[:4])

    def test_all_stencils_zero_sum(self):
        for kinds in (2, 4, 8):
            pats = base_patterns(kinds)
            np.testing.assert_allclose(pats.sum(axis=(1, 2)), 0.0)

    def test_zero_gamma_zero_kernel(self):
        bank = make_kernel_bank(4, 4, 0.0, dtype=np.float64)
        assert np.all(bank.realized_weight(1, dtype=np.float64).data == 0.0)

    def test_unsupported_kinds(self):
        with pytest.raises(ConfigError):
            make_kernel_bank(3, 4)
        with pytest.raises(ConfigError):
            base_patterns(16)


class TestEdgeConv:
    def _ramp(self, size=8):
        ii = np.arange(size, dtype=np.float64)[:, None]
        return np.broadcast_to(ii, (size, size)).copy()

    def test_constant_input_zero_interior(self):
        for kinds in (2, 4, 8):
            bank = make_kernel_bank(kinds, kinds, 1.0, dtype=np.float64)
            x = Tensor(np.full((1, 1, 8, 8), 0.7))
            out = edge_conv(x, bank).data
            np.testing.assert_allclose(out[:, :, 1:-1, 1:-1], 0.0, atol=1e-6)

    def test_vertical_ramp_fixture(self):
        bank = make_kernel_bank(4, 4, 1.0, dtype=np.float64)
        x = Tensor(self._ramp()[None, None])
        out = edge_conv(x, bank).data
        np.testing.assert_allclose(out[0, 0, 1:-1, 1:-1], 8.0, atol=1e-6)
        np.testing.assert_allclose(out[0, 1, 1:-1, 1:-1], 0.0, atol=1e-6)

    def test_channel0_matches_sobel_oracle(self):
        rng = np.random.default_rng(0)
        plane = rng.standard_normal((8, 8))
        bank = make_kernel_bank(4, 4, 1.0, dtype=np.float64)
        out = edge_conv(Tensor(plane[None, None]), bank).data
        np.testing.assert_allclose(out[0, 0, 1:-1, 1:-1],
                                   sobel_vertical_oracle(plane), atol=1e-6)

    def test_linear_in_gamma(self):
        rng = np.random.default_rng(1)
        plane = Tensor(rng.standard_normal((1, 1, 6, 6)))
        one = make_kernel_bank(4, 4, 1.0, dtype=np.float64)
        two = make_kernel_bank(4, 4, 2.0, dtype=np.float64)
        np.testing.assert_allclose(edge_conv(plane, two).data,
                                   2.0 * edge_conv(plane, one).data, atol=1e-6)

    def test_rotation_maps_vertical_to_horizontal(self):
        rng = np.random.default_rng(2)
        plane = rng.standard_normal((7, 7))
        bank = make_kernel_bank(4, 4, 1.0, dtype=np.float64)
        a = edge_conv(Tensor(plane[None, None]), bank).data
        rot = np.rot90(plane).copy()
        b = edge_conv(Tensor(rot[None, None]), bank).data
        # rotating the input 90 deg CCW turns the vertical response into the
        # (rotated, sign-flipped) horizontal response
        np.testing.assert_allclose(np.rot90(a[0, 1])[1:-1, 1:-1],
                                   -b[0, 0, 1:-1, 1:-1], atol=1e-6)


class TestDepthwise:
    def test_per_channel_ramps(self):
        size = 8
        ii = np.arange(size, dtype=np.float64)[:, None]
        vert = np.broadcast_to(ii, (size, size))
        horiz = vert.T
        x = Tensor(np.stack([vert, horiz])[None])
        bank = make_kernel_bank(4, 2, 1.0, dtype=np.float64)
        out = depthwise_edge_conv(x, bank).data
        np.testing.assert_allclose(out[0, 0, 1:-1, 1:-1], 8.0, atol=1e-6)
        np.testing.assert_allclose(out[0, 1, 1:-1, 1:-1], 8.0, atol=1e-6)

    def test_constant_input_zero_interior(self):
        bank = make_kernel_bank(4, 3, 1.0, dtype=np.float64)
        x = Tensor(np.full((1, 3, 6, 6), 0.4))
        out = depthwise_edge_conv(x, bank).data
        np.testing.assert_allclose(out[:, :, 1:-1, 1:-1], 0.0, atol=1e-6)

    def test_gamma_vector_scales_channels(self):
        rng = np.random.default_rng(3)
        x = Tensor(rng.standard_normal((1, 2, 6, 6)))
        base = make_kernel_bank(4, 2, 1.0, dtype=np.float64)
        scaled = make_kernel_bank(4, 2, 1.0, dtype=np.float64)
        scaled.gamma.data = np.array([1.0, 2.0]).reshape(2, 1, 1, 1)
        a = depthwise_edge_conv(x, base).data
        b = depthwise_edge_conv(x, scaled).data
        np.testing.assert_allclose(b[0, 0], a[0, 0], atol=1e-6)
        np.testing.assert_allclose(b[0, 1], 2.0 * a[0, 1], atol=1e-6)

    def test_bank_size_mismatch(self):
        bank = make_kernel_bank(4, 3, 1.0)
        with pytest.raises(ConfigError):
            depthwise_edge_conv(Tensor(np.zeros((1, 2, 4, 4))), bank)
