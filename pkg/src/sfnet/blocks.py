"""Composite network blocks: simple gate, frequency mixer, residual block,
and the multi-scale structure pyramid."""

from __future__ import annotations

from typing import List, Optional

import numpy as np

from . import tensor as T
from .edges import depthwise_edge_conv, edge_conv, make_kernel_bank
from .errors import ConfigError, ShapeError
from .fourier import freq_conv1x1, fft2d_real, ifft2d_real
from .tensor import Parameter, Tensor


def simple_gate(x: Tensor) -> Tensor:
    """Halve the channels by multiplying the two channel halves together."""
    a, b = T.channel_split2(x)
    return T.hadamard(a, b)


def _init_conv_weight(rng: np.random.Generator, c_out: int, c_in_g: int, k: int,
                      dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(c_in_g * k * k)
    return rng.uniform(-bound, bound, size=(c_out, c_in_g, k, k)).astype(dtype)


class ConvLayer:
    """Plain conv with optional zero-initialized bias."""

    def __init__(self, name: str, c_in: int, c_out: int, k: int,
                 rng: np.random.Generator, stride: int = 1, pad: int = 0,
                 groups: int = 1, bias: bool = True, zero_init: bool = False,
                 dtype=T.DEFAULT_DTYPE):
        c_in_g = c_in // groups
        if zero_init:
            w = np.zeros((c_out, c_in_g, k, k), dtype=dtype)
        else:
            w = _init_conv_weight(rng, c_out, c_in_g, k, dtype)
        self.weight = Parameter(w, name=f"{name}.w", dtype=dtype)
        self.bias = Parameter(np.zeros((1, c_out, 1, 1)), name=f"{name}.b", dtype=dtype) if bias else None
        self.stride = stride
        self.pad = pad
        self.groups = groups

    def __call__(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.weight, self.bias, stride=self.stride,
                        pad=self.pad, groups=self.groups)

    def parameters(self) -> List[Parameter]:
        return [self.weight] + ([self.bias] if self.bias is not None else [])


class LayerNorm2d:
    def __init__(self, name: str, c: int, eps: float = 1e-6, dtype=T.DEFAULT_DTYPE):
        self.gain = Parameter(np.ones((1, c, 1, 1)), name=f"{name}.gain", dtype=dtype)
        self.shift = Parameter(np.zeros((1, c, 1, 1)), name=f"{name}.shift", dtype=dtype)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm_2d(x, self.gain, self.shift, self.eps)

    def parameters(self) -> List[Parameter]:
        return [self.gain, self.shift]


class FrequencyMixer:
    """FFT -> 1x1 conv over stacked real/imag channels -> inverse FFT, plus a
    spatial skip. The ``complex`` variant inserts conv -> relu -> conv in the
    frequency domain instead of the single conv."""

    def __init__(self, name: str, c: int, rng: np.random.Generator,
                 variant: str = "simplified", dtype=T.DEFAULT_DTYPE):
        if variant not in ("simplified", "complex"):
            raise ConfigError(f"frequency variant must be 'simplified' or 'complex', got {variant!r}")
        self.c = c
        self.variant = variant
        self.conv1 = ConvLayer(f"{name}.fconv1", 2 * c, 2 * c, 1, rng, dtype=dtype)
        self.conv2 = (ConvLayer(f"{name}.fconv2", 2 * c, 2 * c, 1, rng, dtype=dtype)
                      if variant == "complex" else None)

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[1] != self.c:
            raise ShapeError(f"frequency mixer built for c={self.c}, got {x.shape}")
        spec = fft2d_real(x)
        spec = freq_conv1x1(spec, self.conv1.weight, self.conv1.bias)
        if self.conv2 is not None:
            from .fourier import Spectrum
            spec = Spectrum(T.relu(spec.stacked), spec.original_w)
            spec = freq_conv1x1(spec, self.conv2.weight, self.conv2.bias)
        return T.add(ifft2d_real(spec), x)

    def parameters(self) -> List[Parameter]:
        params = self.conv1.parameters()
        if self.conv2 is not None:
            params += self.conv2.parameters()
        return params


class ResidualBlock:
    """Main activation-free residual block.

    Two gated sub-paths with learnable per-channel skip weights:
      y1 = SG(DConv(Conv(LN(x))));  f = Conv(Freq(y1)) + alpha * x
      y2 = SG(Conv(LN(f)));         out = Conv(y2) + beta * f
    The expansion before each gate is 2x so gating returns c channels.
    """

    def __init__(self, name: str, c: int, rng: np.random.Generator,
                 freq_variant: str = "simplified", use_frequency: bool = True,
                 dtype=T.DEFAULT_DTYPE):
        self.c = c
        self.ln1 = LayerNorm2d(f"{name}.ln1", c, dtype=dtype)
        self.conv1 = ConvLayer(f"{name}.conv1", c, 2 * c, 1, rng, dtype=dtype)
        self.dconv = ConvLayer(f"{name}.dconv", 2 * c, 2 * c, 3, rng, pad=1,
                               groups=2 * c, dtype=dtype)
        self.freq: Optional[FrequencyMixer] = (
            FrequencyMixer(f"{name}.freq", c, rng, variant=freq_variant, dtype=dtype)
            if use_frequency else None)
        self.conv2 = ConvLayer(f"{name}.conv2", c, c, 1, rng, dtype=dtype)
        self.alpha = Parameter(np.ones((1, c, 1, 1)), name=f"{name}.alpha", dtype=dtype)
        self.ln2 = LayerNorm2d(f"{name}.ln2", c, dtype=dtype)
        self.conv3 = ConvLayer(f"{name}.conv3", c, 2 * c, 1, rng, dtype=dtype)
        self.conv4 = ConvLayer(f"{name}.conv4", c, c, 1, rng, dtype=dtype)
        self.beta = Parameter(np.ones((1, c, 1, 1)), name=f"{name}.beta", dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        y = simple_gate(self.dconv(self.conv1(self.ln1(x))))
        if self.freq is not None:
            y = self.freq(y)
        f = T.add(self.conv2(y), T.hadamard(self.alpha, x))
        y2 = simple_gate(self.conv3(self.ln2(f)))
        return T.add(self.conv4(y2), T.hadamard(self.beta, f))

    def parameters(self) -> List[Parameter]:
        params = (self.ln1.parameters() + self.conv1.parameters()
                  + self.dconv.parameters())
        if self.freq is not None:
            params += self.freq.parameters()
        params += self.conv2.parameters() + [self.alpha]
        params += self.ln2.parameters() + self.conv3.parameters()
        params += self.conv4.parameters() + [self.beta]
        return params


class StructurePyramid:
    """Edge conv + depthwise edge conv on the input image, then a pyramid of
    2x average-pooled, 1x1-projected copies matching each encoder scale.

    Projections carry no bias so constant inputs keep producing (interior)
    zeros at every scale.
    """

    def __init__(self, name: str, in_channels: int, widths: List[int], kinds: int,
                 rng: np.random.Generator, dtype=T.DEFAULT_DTYPE):
        c0 = widths[0]
        self.econv_bank = make_kernel_bank(kinds, c0, 1.0, name=f"{name}.econv.gamma", dtype=dtype)
        self.deconv_bank = make_kernel_bank(kinds, c0, 1.0, name=f"{name}.deconv.gamma", dtype=dtype)
        self.projections = [
            ConvLayer(f"{name}.proj{k}", widths[k - 1], widths[k], 1, rng,
                      bias=False, dtype=dtype)
            for k in range(1, len(widths))
        ]
        self.in_channels = in_channels

    def __call__(self, image: Tensor) -> List[Tensor]:
        levels = [depthwise_edge_conv(edge_conv(image, self.econv_bank), self.deconv_bank)]
        for proj in self.projections:
            levels.append(proj(T.avg_pool2(levels[-1])))
        return levels

    def parameters(self) -> List[Parameter]:
        params = [self.econv_bank.gamma, self.deconv_bank.gamma]
        for proj in self.projections:
            params += proj.parameters()
        return params
