"""Real-input 2-D FFT with half-plane storage and frequency-domain 1x1 conv.

The forward transform is unnormalized; the inverse carries the 1/(h*w)
factor. Only the non-redundant half-plane (w_half = w//2 + 1 columns) of the
Hermitian-symmetric spectrum is kept. Inside the autodiff graph a spectrum
travels as a real tensor with real and imaginary parts stacked along the
channel axis (2c channels), so the frequency-domain convolution is an
ordinary real-valued 1x1 conv that may mix real and imaginary components.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import ShapeError
from .tensor import Tensor, _make, conv2d


def _half_to_full(s: np.ndarray, w: int) -> np.ndarray:
    """Extend a half-plane complex spectrum to the full plane by conjugate symmetry."""
    n, c, h, w_half = s.shape
    full = np.zeros((n, c, h, w), dtype=s.dtype)
    full[..., :w_half] = s
    cols = np.arange(w_half, w)
    rows = (h - np.arange(h)) % h
    full[..., cols] = np.conj(s[:, :, rows][..., w - cols])
    return full


def rfft2_stacked(x: Tensor) -> Tensor:
    """(n, c, h, w) -> (n, 2c, h, w_half): channels [0, c) real, [c, 2c) imag."""
    n, c, h, w = x.shape
    spec = np.fft.rfft2(x.data.astype(np.float64, copy=False), axes=(2, 3))
    out_data = np.concatenate([spec.real, spec.imag], axis=1).astype(x.data.dtype)

    def bwd(g):
        if x.requires_grad:
            gc = g.astype(np.float64, copy=False)
            G = gc[:, :c] + 1j * gc[:, c:]
            full = np.zeros((n, c, h, w), dtype=np.complex128)
            full[..., :G.shape[3]] = G
            dx = (h * w) * np.fft.ifft2(full, axes=(2, 3)).real
            x.accumulate_grad(dx.astype(x.data.dtype))

    return _make(out_data, (x,), bwd)


def irfft2_stacked(s: Tensor, original_w: int) -> Tensor:
    """Inverse of ``rfft2_stacked``; any imaginary residue after symmetry
    reconstruction is discarded."""
    n, c2, h, w_half = s.shape
    if c2 % 2:
        raise ShapeError(f"stacked spectrum needs an even channel count, got {c2}")
    if w_half != original_w // 2 + 1:
        raise ShapeError(f"w_half={w_half} inconsistent with original width {original_w}")
    c = c2 // 2
    w = original_w
    sd = s.data.astype(np.float64, copy=False)
    spec = sd[:, :c] + 1j * sd[:, c:]
    full = _half_to_full(spec, w)
    out_data = np.fft.ifft2(full, axes=(2, 3)).real.astype(s.data.dtype)

    def bwd(g):
        if s.requires_grad:
            t = np.fft.fft2(g.astype(np.float64, copy=False), axes=(2, 3)) / (h * w)
            ds = t[..., :w_half].copy()
            # stored bins whose mirror column fell outside the half-plane also
            # received a conjugated copy during reconstruction
            lo = 1
            hi = w_half - 1 if w % 2 == 0 else w_half
            if hi > lo:
                cols = np.arange(lo, hi)
                rows = (h - np.arange(h)) % h
                ds[..., cols] += np.conj(t[:, :, rows][..., w - cols])
            grad = np.concatenate([ds.real, ds.imag], axis=1).astype(s.data.dtype)
            s.accumulate_grad(grad)

    return _make(out_data, (s,), bwd)


class Spectrum:
    """Half-plane frequency representation of a real rank-4 tensor."""

    __slots__ = ("stacked", "original_w")

    def __init__(self, stacked: Tensor, original_w: int):
        self.stacked = stacked
        self.original_w = int(original_w)

    @property
    def dims(self) -> tuple:
        n, c2, h, w_half = self.stacked.shape
        return (n, c2 // 2, h, w_half)

    @property
    def real(self) -> np.ndarray:
        c = self.stacked.shape[1] // 2
        return self.stacked.data[:, :c]

    @property
    def imag(self) -> np.ndarray:
        c = self.stacked.shape[1] // 2
        return self.stacked.data[:, c:]


def fft2d_real(x: Tensor) -> Spectrum:
    return Spectrum(rfft2_stacked(x), x.shape[3])


def ifft2d_real(s: Spectrum) -> Tensor:
    return irfft2_stacked(s.stacked, s.original_w)


def freq_conv1x1(s: Spectrum, weight: Tensor, bias: Optional[Tensor] = None) -> Spectrum:
    """Real 1x1 convolution over the stacked (2c-channel) spectrum."""
    c2 = s.stacked.shape[1]
    if weight.shape != (c2, c2, 1, 1):
        raise ShapeError(f"frequency conv weight must be ({c2}, {c2}, 1, 1), got {weight.shape}")
    return Spectrum(conv2d(s.stacked, weight, bias), s.original_w)
