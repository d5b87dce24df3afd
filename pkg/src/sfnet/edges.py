"""Trainable Sobel-style edge kernel banks and edge convolutions.

A bank holds 2, 4, or 8 fixed zero-sum 3x3 stencils plus one learnable
scale per output channel; output channel c uses stencil c mod kinds. With
the scales at 1.0 the bank is the classical Sobel operator set.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .tensor import DEFAULT_DTYPE, Parameter, Tensor, conv2d, hadamard

# vertical, horizontal, and the two diagonal orientations
_VERTICAL = np.array([[-1.0, -2.0, -1.0],
                      [0.0, 0.0, 0.0],
                      [1.0, 2.0, 1.0]])
_HORIZONTAL = np.array([[-1.0, 0.0, 1.0],
                        [-2.0, 0.0, 2.0],
                        [-1.0, 0.0, 1.0]])
_DIAG_MAIN = np.array([[-2.0, -1.0, 0.0],
                       [-1.0, 0.0, 1.0],
                       [0.0, 1.0, 2.0]])
_DIAG_ANTI = np.array([[0.0, 1.0, 2.0],
                       [-1.0, 0.0, 1.0],
                       [-2.0, -1.0, 0.0]])


def base_patterns(kinds: int) -> np.ndarray:
    """The fixed (kinds, 3, 3) stencil set; 8 kinds adds the sign-flipped four."""
    four = np.stack([_VERTICAL, _HORIZONTAL, _DIAG_MAIN, _DIAG_ANTI])
    if kinds == 2:
        return four[:2].copy()
    if kinds == 4:
        return four.copy()
    if kinds == 8:
        return np.concatenate([four, -four])
    raise ConfigError(f"kinds must be 2, 4, or 8; got {kinds}")


class EdgeKernelBank:
    """Per-channel scaled stencils: realized kernel c = gamma[c] * pattern[c mod kinds]."""

    def __init__(self, kinds: int, out_channels: int, gamma: Parameter):
        self.kinds = kinds
        self.out_channels = out_channels
        self.gamma = gamma
        self.patterns = base_patterns(kinds)

    def stencil_stack(self, dtype=DEFAULT_DTYPE) -> np.ndarray:
        """(out_channels, 1, 3, 3) pattern per output channel."""
        idx = np.arange(self.out_channels) % self.kinds
        return self.patterns[idx][:, None].astype(dtype)

    def realized_weight(self, c_in_per_group: int, dtype=DEFAULT_DTYPE) -> Tensor:
        """Graph node for the (c_out, c_in/g, 3, 3) weight; only gamma is trainable."""
        stack = np.repeat(self.stencil_stack(dtype), c_in_per_group, axis=1)
        return hadamard(Tensor(stack, dtype=dtype), self.gamma)


def make_kernel_bank(kinds: int, out_channels: int, gamma_init: float = 1.0,
                     name: str = "edge.gamma", dtype=DEFAULT_DTYPE) -> EdgeKernelBank:
    if out_channels < 1:
        raise ConfigError(f"out_channels must be >= 1, got {out_channels}")
    patterns = base_patterns(kinds)  # validates kinds
    assert np.allclose(patterns.sum(axis=(1, 2)), 0.0)
    gamma = Parameter(np.full((out_channels, 1, 1, 1), gamma_init), name=name, dtype=dtype)
    return EdgeKernelBank(kinds, out_channels, gamma)


def edge_conv(x: Tensor, bank: EdgeKernelBank) -> Tensor:
    """Same-size conv summing over input channels, one stencil per output channel."""
    weight = bank.realized_weight(x.shape[1], dtype=x.dtype)
    return conv2d(x, weight, bias=None, stride=1, pad=1, groups=1)


def depthwise_edge_conv(x: Tensor, bank: EdgeKernelBank) -> Tensor:
    """One kernel per channel, one channel per kernel (groups = c_in)."""
    c = x.shape[1]
    if bank.out_channels != c:
        raise ConfigError(f"bank size {bank.out_channels} != input channels {c}")
    weight = bank.realized_weight(1, dtype=x.dtype)
    return conv2d(x, weight, bias=None, stride=1, pad=1, groups=c)
