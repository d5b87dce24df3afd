"""Fourier module against a naive O(N^2) DFT oracle."""

import numpy as np
import pytest

from sfnet import tensor as T
from sfnet.errors import ShapeError
from sfnet.fourier import (Spectrum, fft2d_real, freq_conv1x1, ifft2d_real,
                           irfft2_stacked, rfft2_stacked)
from sfnet.tensor import Tensor


def naive_dft2(plane):
    """Full-plane unnormalized 2-D DFT by direct summation."""
    h, w = plane.shape
    out = np.zeros((h, w), dtype=np.complex128)
    for u in range(h):
        for v in range(w):
            acc = 0.0 + 0.0j
            for i in range(h):
                for j in range(w):
                    acc += plane[i, j] * np.exp(-2j * np.pi * (u * i / h + v * j / w))
            out[u, v] = acc
    return out


def naive_idft2(spec_full):
    h, w = spec_full.shape
    out = np.zeros((h, w), dtype=np.complex128)
    for i in range(h):
        for j in range(w):
            acc = 0.0 + 0.0j
            for u in range(h):
                for v in range(w):
                    acc += spec_full[u, v] * np.exp(2j * np.pi * (u * i / h + v * j / w))
            out[i, j] = acc
    return out / (h * w)


def spectrum_complex(spec):
    return spec.real + 1j * spec.imag


class TestForward:
    def test_constant_plane_dc_only(self):
        x = Tensor(np.ones((1, 1, 4, 4)))
        s = fft2d_real(x)
        full = spectrum_complex(s)[0, 0]
        assert full[0, 0] == pytest.approx(16.0)
        rest = full.copy()
        rest[0, 0] = 0.0
        assert np.abs(rest).max() < 1e-6

    def test_impulse_flat_spectrum(self):
        plane = np.zeros((1, 1, 3, 5))
        plane[0, 0, 0, 0] = 1.0
        s = fft2d_real(Tensor(plane))
        full = spectrum_complex(s)
        np.testing.assert_allclose(full, np.ones_like(full), atol=1e-6)

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(0)
        for (h, w) in [(4, 4), (3, 5), (5, 6), (1, 7), (6, 1)]:
            plane = rng.standard_normal((h, w))
            s = fft2d_real(Tensor(plane[None, None]))
            want = naive_dft2(plane)[:, :w // 2 + 1]
            np.testing.assert_allclose(spectrum_complex(s)[0, 0], want,
                                       atol=1e-4)

    def test_linearity(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((1, 2, 5, 6))
        b = rng.standard_normal((1, 2, 5, 6))
        sa = rfft2_stacked(Tensor(a)).data
        sb = rfft2_stacked(Tensor(b)).data
        sm = rfft2_stacked(Tensor(2.0 * a - 0.5 * b)).data
        np.testing.assert_allclose(sm, 2.0 * sa - 0.5 * sb, atol=1e-5)


class TestInverse:
    def test_roundtrip_identity(self):
        rng = np.random.default_rng(2)
        for (h, w) in [(1, 1), (2, 3), (7, 4), (8, 8), (5, 9)]:
            x = rng.standard_normal((1, 2, h, w))
            back = ifft2d_real(fft2d_real(Tensor(x)))
            np.testing.assert_allclose(back.data, x, atol=1e-5)

    def test_dc_only_gives_constant(self):
        h, w, k = 4, 6, 1.5
        stacked = np.zeros((1, 2, h, w // 2 + 1))
        stacked[0, 0, 0, 0] = h * w * k
        out = irfft2_stacked(Tensor(stacked), w)
        np.testing.assert_allclose(out.data, k, atol=1e-6)

    def test_matches_naive_inverse(self):
        rng = np.random.default_rng(3)
        for (h, w) in [(4, 4), (3, 5), (5, 6)]:
            # build a spectrum consistent with real input by transforming one
            x = rng.standard_normal((h, w))
            s = fft2d_real(Tensor(x[None, None]))
            full = np.zeros((h, w), dtype=np.complex128)
            half = spectrum_complex(s)[0, 0]
            full[:, :w // 2 + 1] = half
            for v in range(w // 2 + 1, w):
                for u in range(h):
                    full[u, v] = np.conj(full[(h - u) % h, (w - v) % w])
            want = naive_idft2(full).real
            np.testing.assert_allclose(ifft2d_real(s).data[0, 0], want, atol=1e-4)

    def test_inconsistent_width_rejected(self):
        with pytest.raises(ShapeError):
            irfft2_stacked(Tensor(np.zeros((1, 2, 4, 3))), 8)
        with pytest.raises(ShapeError):
            irfft2_stacked(Tensor(np.zeros((1, 3, 4, 3))), 4)


class TestParseval:
    def test_energy_relation(self):
        rng = np.random.default_rng(4)
        plane = rng.standard_normal((8, 8))
        full = np.fft.fft2(plane)
        lhs = np.sum(plane ** 2)
        rhs = np.sum(np.abs(full) ** 2) / plane.size
        assert lhs == pytest.approx(rhs, rel=1e-4)

    def test_energy_from_half_plane(self):
        rng = np.random.default_rng(5)
        for (h, w) in [(8, 8), (5, 6), (4, 7)]:
            plane = rng.standard_normal((h, w))
            s = fft2d_real(Tensor(plane[None, None]))
            half = spectrum_complex(s)[0, 0]
            # weight mirrored columns twice, self-conjugate columns once
            weights = np.full(w // 2 + 1, 2.0)
            weights[0] = 1.0
            if w % 2 == 0:
                weights[-1] = 1.0
            rhs = np.sum(weights * np.abs(half) ** 2) / (h * w)
            assert np.sum(plane ** 2) == pytest.approx(rhs, rel=1e-4)


class TestFreqConv:
    def _identity_weight(self, c2):
        w = np.zeros((c2, c2, 1, 1))
        for i in range(c2):
            w[i, i, 0, 0] = 1.0
        return Tensor(w)

    def test_identity_weight_is_noop(self):
        rng = np.random.default_rng(6)
        s = fft2d_real(Tensor(rng.standard_normal((1, 3, 5, 6))))
        out = freq_conv1x1(s, self._identity_weight(6))
        np.testing.assert_allclose(out.stacked.data, s.stacked.data, atol=1e-6)

    def test_zero_weight_annihilates(self):
        rng = np.random.default_rng(7)
        s = fft2d_real(Tensor(rng.standard_normal((1, 2, 4, 4))))
        out = freq_conv1x1(s, Tensor(np.zeros((4, 4, 1, 1))))
        assert np.all(out.stacked.data == 0.0)

    def test_double_identity_doubles_output(self):
        rng = np.random.default_rng(8)
        x = Tensor(rng.standard_normal((1, 2, 5, 6)))
        s = fft2d_real(x)
        doubled = freq_conv1x1(s, Tensor(2.0 * self._identity_weight(4).data))
        np.testing.assert_allclose(ifft2d_real(doubled).data, 2.0 * x.data,
                                   atol=1e-5)

    def test_wrong_weight_dims_rejected(self):
        s = fft2d_real(Tensor(np.zeros((1, 2, 4, 4))))
        with pytest.raises(ShapeError):
            freq_conv1x1(s, Tensor(np.zeros((3, 3, 1, 1))))


def test_spectrum_dims():
    s = fft2d_real(Tensor(np.zeros((2, 3, 5, 8))))
    assert s.dims == (2, 3, 5, 5)
    assert s.original_w == 8
    assert isinstance(s, Spectrum)


def test_gradients_flow_through_fft_path():
    rng = np.random.default_rng(9)
    x = Tensor(rng.standard_normal((1, 2, 4, 5)), requires_grad=True,
               dtype=np.float64)
    mask = Tensor(rng.standard_normal((1, 2, 4, 5)), dtype=np.float64)
    from sfnet.gradcheck import finite_diff_check

    def f(t):
        return T.sum_all(T.hadamard(irfft2_stacked(rfft2_stacked(t), 5), mask))

    assert finite_diff_check(f, x, h=1e-5) < 1e-6
