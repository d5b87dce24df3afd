"""Full denoising network: intro conv, structure pyramid, encoder-decoder of
residual blocks with skip connections, and a zero-initialized residual head.

A freshly built model is exactly the identity map: the final conv starts at
zero, so the predicted residual is zero everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from . import tensor as T
from .blocks import ConvLayer, ResidualBlock, StructurePyramid
from .errors import ConfigError, NumericError
from .tensor import Parameter, Tensor


@dataclass(frozen=True)
class NetworkConfig:
    width: int = 64
    enc_blocks: Tuple[int, ...] = (2, 2, 4, 8)
    mid_blocks: int = 12
    dec_blocks: Tuple[int, ...] = (2, 2, 2, 2)
    kernel_kinds: int = 4
    freq_variant: str = "simplified"
    in_channels: int = 1
    use_structure: bool = True
    use_frequency: bool = True

    def __post_init__(self):
        if self.width < 2:
            raise ConfigError(f"width must be >= 2, got {self.width}")
        if len(self.enc_blocks) != len(self.dec_blocks):
            raise ConfigError(
                f"enc/dec block lists must have equal length: {self.enc_blocks} vs {self.dec_blocks}")
        if not self.enc_blocks or any(b < 1 for b in self.enc_blocks + self.dec_blocks):
            raise ConfigError(f"block counts must be >= 1: {self.enc_blocks}, {self.dec_blocks}")
        if self.mid_blocks < 1:
            raise ConfigError(f"mid_blocks must be >= 1, got {self.mid_blocks}")
        if self.kernel_kinds not in (2, 4, 8):
            raise ConfigError(f"kernel_kinds must be 2, 4, or 8, got {self.kernel_kinds}")
        if self.freq_variant not in ("simplified", "complex"):
            raise ConfigError(f"freq_variant must be 'simplified' or 'complex', got {self.freq_variant!r}")
        if self.in_channels < 1:
            raise ConfigError(f"in_channels must be >= 1, got {self.in_channels}")

    @property
    def levels(self) -> int:
        return len(self.enc_blocks) + 1

    @property
    def pad_multiple(self) -> int:
        return 2 ** (self.levels - 1)

    def level_width(self, k: int) -> int:
        return self.width * (2 ** k)


class Model:
    """Built network: parameter registry plus the forward pass."""

    def __init__(self, config: NetworkConfig, seed: int, dtype=T.DEFAULT_DTYPE):
        self.config = config
        self.seed = int(seed)
        self.dtype = dtype
        rng = np.random.Generator(np.random.Philox(key=self.seed))
        cfg = config
        L = cfg.levels

        self.intro = ConvLayer("intro", cfg.in_channels, cfg.width, 3, rng, pad=1, dtype=dtype)
        enc_widths = [cfg.level_width(k) for k in range(L - 1)]
        self.pyramid = (StructurePyramid("pyramid", cfg.in_channels, enc_widths,
                                         cfg.kernel_kinds, rng, dtype=dtype)
                        if cfg.use_structure else None)

        def make_blocks(prefix: str, count: int, c: int) -> List[ResidualBlock]:
            return [ResidualBlock(f"{prefix}.block{i}", c, rng,
                                  freq_variant=cfg.freq_variant,
                                  use_frequency=cfg.use_frequency, dtype=dtype)
                    for i in range(count)]

        self.enc_stages: List[List[ResidualBlock]] = []
        self.down_convs: List[ConvLayer] = []
        for k in range(L - 1):
            c = cfg.level_width(k)
            self.enc_stages.append(make_blocks(f"enc{k}", cfg.enc_blocks[k], c))
            self.down_convs.append(ConvLayer(f"down{k}", c, 2 * c, 3, rng,
                                             stride=2, pad=1, dtype=dtype))

        self.mid_stage = make_blocks("mid", cfg.mid_blocks, cfg.level_width(L - 1))

        self.up_convs: List[ConvLayer] = []
        self.dec_stages: List[List[ResidualBlock]] = []
        for k in reversed(range(L - 1)):
            c_hi = cfg.level_width(k + 1)
            self.up_convs.append(ConvLayer(f"up{k}", c_hi, 2 * c_hi, 1, rng,
                                           bias=False, dtype=dtype))
            self.dec_stages.append(make_blocks(f"dec{k}", cfg.dec_blocks[k],
                                               cfg.level_width(k)))

        self.final = ConvLayer("final", cfg.width, cfg.in_channels, 3, rng,
                               pad=1, zero_init=True, dtype=dtype)

        self._params: Dict[str, Parameter] = {}
        for p in self._collect():
            if p.name in self._params:
                raise ConfigError(f"duplicate parameter name {p.name!r}")
            self._params[p.name] = p

    def _collect(self) -> List[Parameter]:
        params = self.intro.parameters()
        if self.pyramid is not None:
            params += self.pyramid.parameters()
        for stage, down in zip(self.enc_stages, self.down_convs):
            for b in stage:
                params += b.parameters()
            params += down.parameters()
        for b in self.mid_stage:
            params += b.parameters()
        for up, stage in zip(self.up_convs, self.dec_stages):
            params += up.parameters()
            for b in stage:
                params += b.parameters()
        params += self.final.parameters()
        return params

    def parameters(self) -> Dict[str, Parameter]:
        return self._params

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.zero_grad()

    def forward(self, noisy: Tensor) -> Tensor:
        if not np.all(np.isfinite(noisy.data)):
            raise NumericError("non-finite values in network input")
        n, c, h, w = noisy.shape
        if c != self.config.in_channels:
            raise ConfigError(f"model expects {self.config.in_channels} channels, got {c}")
        m = self.config.pad_multiple
        ph = (-h) % m
        pw = (-w) % m
        x = T.reflect_pad_br(noisy, ph, pw)
        padded = x

        feat = self.intro(x)
        pyr = self.pyramid(padded) if self.pyramid is not None else None
        skips: List[Tensor] = []
        for k, (stage, down) in enumerate(zip(self.enc_stages, self.down_convs)):
            for block in stage:
                feat = block(feat)
            skips.append(feat)
            if pyr is not None:
                feat = T.add(feat, pyr[k])
            feat = down(feat)
        for block in self.mid_stage:
            feat = block(feat)
        for up, stage, skip in zip(self.up_convs, self.dec_stages, reversed(skips)):
            feat = T.pixel_shuffle(up(feat), 2, "up")
            feat = T.add(feat, skip)
            for block in stage:
                feat = block(feat)
        residual = self.final(feat)
        return T.add(noisy, T.crop_tl(residual, h, w))

    def __call__(self, noisy: Tensor) -> Tensor:
        return self.forward(noisy)


def build(config: NetworkConfig, seed: int, dtype=T.DEFAULT_DTYPE) -> Model:
    """Deterministic construction: same config and seed give bit-identical parameters."""
    return Model(config, seed, dtype=dtype)


# ---------------------------------------------------------------------------
# complexity accounting
# ---------------------------------------------------------------------------

def _conv_macs(c_in: int, c_out: int, k: int, h_out: int, w_out: int,
               groups: int = 1) -> int:
    return (c_in // groups) * c_out * k * k * h_out * w_out


def _fft_macs(c: int, h: int, w: int) -> int:
    # c * (h * w_half) * log2(h*w) complex butterflies, 4 real MACs each
    w_half = w // 2 + 1
    return int(round(c * h * w_half * np.log2(h * w) * 4))


def _block_macs(c: int, h: int, w: int, freq_variant: str, use_frequency: bool) -> int:
    macs = _conv_macs(c, 2 * c, 1, h, w)                    # expand
    macs += _conv_macs(2 * c, 2 * c, 3, h, w, groups=2 * c)  # depthwise
    if use_frequency:
        w_half = w // 2 + 1
        macs += 2 * _fft_macs(c, h, w)                       # forward + inverse
        macs += _conv_macs(2 * c, 2 * c, 1, h, w_half)
        if freq_variant == "complex":
            macs += _conv_macs(2 * c, 2 * c, 1, h, w_half)
    macs += _conv_macs(c, c, 1, h, w)                        # project back
    macs += _conv_macs(c, 2 * c, 1, h, w)                    # second expand
    macs += _conv_macs(c, c, 1, h, w)                        # output conv
    return macs


def count_macs(config: NetworkConfig, h: int, w: int) -> Tuple[int, List[Tuple[str, int]]]:
    """Total multiply-accumulate count plus a per-block table (total = sum of rows).

    Convs cost c_in/g * c_out * k^2 * h_out * w_out; each FFT costs
    c * h * w_half * log2(h*w) butterflies at 4 real MACs; elementwise work is
    excluded. Spatial dims must divide by the downsampling factor.
    """
    cfg = config
    if h % cfg.pad_multiple or w % cfg.pad_multiple:
        raise ConfigError(f"{h}x{w} not divisible by {cfg.pad_multiple}")
    rows: List[Tuple[str, int]] = []
    L = cfg.levels
    rows.append(("intro", _conv_macs(cfg.in_channels, cfg.width, 3, h, w)))
    if cfg.use_structure:
        pyramid = _conv_macs(cfg.in_channels, cfg.width, 3, h, w)   # edge conv
        pyramid += _conv_macs(cfg.width, cfg.width, 3, h, w, groups=cfg.width)
        hh, ww = h, w
        for k in range(1, L - 1):
            hh, ww = hh // 2, ww // 2
            pyramid += _conv_macs(cfg.level_width(k - 1), cfg.level_width(k), 1, hh, ww)
        rows.append(("pyramid", pyramid))
    hh, ww = h, w
    for k in range(L - 1):
        c = cfg.level_width(k)
        for i in range(cfg.enc_blocks[k]):
            rows.append((f"enc{k}.block{i}",
                         _block_macs(c, hh, ww, cfg.freq_variant, cfg.use_frequency)))
        rows.append((f"down{k}", _conv_macs(c, 2 * c, 3, hh // 2, ww // 2)))
        hh, ww = hh // 2, ww // 2
    c = cfg.level_width(L - 1)
    for i in range(cfg.mid_blocks):
        rows.append((f"mid.block{i}",
                     _block_macs(c, hh, ww, cfg.freq_variant, cfg.use_frequency)))
    for k in reversed(range(L - 1)):
        c_hi = cfg.level_width(k + 1)
        rows.append((f"up{k}", _conv_macs(c_hi, 2 * c_hi, 1, hh, ww)))
        hh, ww = hh * 2, ww * 2
        c = cfg.level_width(k)
        for i in range(cfg.dec_blocks[k]):
            rows.append((f"dec{k}.block{i}",
                         _block_macs(c, hh, ww, cfg.freq_variant, cfg.use_frequency)))
    rows.append(("final", _conv_macs(cfg.width, cfg.in_channels, 3, h, w)))
    total = sum(m for _, m in rows)
    return total, rows


def config_to_vector(cfg: NetworkConfig) -> List[float]:
    """Flat numeric encoding used inside checkpoints."""
    vec = [float(cfg.in_channels), float(cfg.width), float(cfg.kernel_kinds),
           1.0 if cfg.freq_variant == "complex" else 0.0,
           1.0 if cfg.use_structure else 0.0,
           1.0 if cfg.use_frequency else 0.0,
           float(cfg.mid_blocks), float(len(cfg.enc_blocks))]
    vec += [float(b) for b in cfg.enc_blocks]
    vec += [float(b) for b in cfg.dec_blocks]
    return vec


def config_from_vector(vec) -> NetworkConfig:
    vals = [float(v) for v in np.asarray(vec).reshape(-1)]
    in_ch, width, kinds, fvar, use_s, use_f, mid, n_enc = vals[:8]
    n = int(n_enc)
    enc = tuple(int(v) for v in vals[8:8 + n])
    dec = tuple(int(v) for v in vals[8 + n:8 + 2 * n])
    return NetworkConfig(width=int(width), enc_blocks=enc, mid_blocks=int(mid),
                         dec_blocks=dec, kernel_kinds=int(kinds),
                         freq_variant="complex" if fvar else "simplified",
                         in_channels=int(in_ch), use_structure=bool(use_s),
                         use_frequency=bool(use_f))
