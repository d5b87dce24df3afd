"""Gradient verification table: finite-difference checks for every
differentiable operation and composite block, plus a micro network."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from . import tensor as T
from .blocks import FrequencyMixer, ResidualBlock, StructurePyramid, simple_gate
from .edges import depthwise_edge_conv, edge_conv, make_kernel_bank
from .fourier import irfft2_stacked, rfft2_stacked
from .gradcheck import finite_diff_check
from .network import NetworkConfig, build
from .rng import generator
from .tensor import Tensor
from .train import psnr_loss

# f32 verifies the production single-precision backward pass against probe
# evaluations widened to f64 (see finite_diff_check's upcast flag); pure-f32
# probes would drown the 1e-3 tolerance in roundoff at any step size.
MODES = {
    "f32": {"dtype": np.float32, "h": 1e-5, "tol": 1e-3, "upcast": True},
    "f64": {"dtype": np.float64, "h": 3e-5, "tol": 1e-6, "upcast": False},
}


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol


def _rand(rng, shape, dtype):
    return Tensor(rng.uniform(-1.0, 1.0, size=shape), requires_grad=True, dtype=dtype)


def gradcheck_all(seed: int, mode: str = "f64", max_coords: int = 12) -> List[CheckResult]:
    cfg = MODES[mode]
    dtype, h, tol = cfg["dtype"], cfg["h"], cfg["tol"]
    upcast = cfg["upcast"]
    rng = generator(seed)
    sub = generator(seed, 1)
    results: List[CheckResult] = []

    def check(name, f, x):
        err = finite_diff_check(f, x, h, max_coords=max_coords, rng=sub,
                                upcast=upcast)
        results.append(CheckResult(name, err, tol))

    # primitive ops
    x = _rand(rng, (1, 4, 6, 6), dtype)
    w = _rand(rng, (6, 2, 3, 3), dtype)
    b = _rand(rng, (1, 6, 1, 1), dtype)
    check("conv2d/input", lambda t: T.sum_all(T.conv2d(t, w, b, stride=2, pad=1, groups=2)), x)
    check("conv2d/weight", lambda t: T.sum_all(T.conv2d(x, t, b, stride=2, pad=1, groups=2)), w)
    check("conv2d/bias", lambda t: T.sum_all(T.conv2d(x, w, t, stride=2, pad=1, groups=2)), b)

    a2 = _rand(rng, (2, 4, 3, 3), dtype)
    b2 = _rand(rng, (2, 4, 3, 3), dtype)
    v2 = _rand(rng, (1, 4, 1, 1), dtype)
    check("elementwise/mix", lambda t: T.sum_all(
        T.hadamard(T.add(t, b2), T.sub(T.scale(t, 0.7), T.hadamard(v2, t)))), a2)
    check("elementwise/channel-vector", lambda t: T.sum_all(T.hadamard(a2, t)), v2)

    ln_g = _rand(rng, (1, 4, 1, 1), dtype)
    ln_s = _rand(rng, (1, 4, 1, 1), dtype)
    ln_x = _rand(rng, (2, 4, 3, 3), dtype)
    ln_m = Tensor(rng.uniform(-1, 1, size=(2, 4, 3, 3)), dtype=dtype)
    check("layer_norm/input", lambda t: T.sum_all(
        T.hadamard(T.layer_norm_2d(t, ln_g, ln_s), ln_m)), ln_x)
    check("layer_norm/gain", lambda t: T.sum_all(
        T.hadamard(T.layer_norm_2d(ln_x, t, ln_s), ln_m)), ln_g)

    xs = _rand(rng, (1, 8, 4, 4), dtype)
    mask_up = Tensor(rng.uniform(-1, 1, size=(1, 2, 8, 8)), dtype=dtype)
    mask_dn = Tensor(rng.uniform(-1, 1, size=(1, 32, 2, 2)), dtype=dtype)
    mask_av = Tensor(rng.uniform(-1, 1, size=(1, 8, 2, 2)), dtype=dtype)
    check("pixel_shuffle/up", lambda t: T.sum_all(
        T.hadamard(T.pixel_shuffle(t, 2, "up"), mask_up)), xs)
    check("pixel_shuffle/down", lambda t: T.sum_all(
        T.hadamard(T.pixel_shuffle(t, 2, "down"), mask_dn)), xs)
    check("channel_split2", lambda t: T.sum_all(T.hadamard(*T.channel_split2(t))), xs)
    check("avg_pool2", lambda t: T.sum_all(T.hadamard(T.avg_pool2(t), mask_av)), xs)

    xp = _rand(rng, (1, 2, 5, 6), dtype)
    mask = Tensor(rng.uniform(0.5, 1.5, size=(1, 2, 8, 8)), dtype=dtype)
    mask_c = Tensor(rng.uniform(-1, 1, size=(1, 2, 3, 4)), dtype=dtype)
    check("reflect_pad", lambda t: T.sum_all(T.hadamard(T.reflect_pad_br(t, 3, 2), mask)), xp)
    check("crop", lambda t: T.sum_all(T.hadamard(T.crop_tl(t, 3, 4), mask_c)), xp)
    check("relu+log", lambda t: T.log(T.add_scalar(T.sum_all(T.relu(t)), 5.0)), xp)

    # fourier path
    xf = _rand(rng, (1, 2, 5, 6), dtype)
    mask_f = Tensor(rng.uniform(-1, 1, size=(1, 4, 5, 4)), dtype=dtype)
    check("fft/forward", lambda t: T.sum_all(T.hadamard(rfft2_stacked(t), mask_f)), xf)
    sf = _rand(rng, (1, 4, 5, 4), dtype)
    mask_s = Tensor(rng.uniform(-1, 1, size=(1, 2, 5, 6)), dtype=dtype)
    check("fft/inverse", lambda t: T.sum_all(T.hadamard(irfft2_stacked(t, 6), mask_s)), sf)
    wf = _rand(rng, (4, 4, 1, 1), dtype)
    check("fft/freq-conv-weight", lambda t: T.sum_all(
        T.hadamard(irfft2_stacked(T.conv2d(rfft2_stacked(xf), t), 6), mask_s)), wf)

    # edge kernels: gamma is the only trainable part
    bank = make_kernel_bank(4, 4, 1.0, dtype=dtype)
    bank.gamma.data = rng.uniform(0.5, 1.5, size=bank.gamma.shape).astype(dtype)
    xe = _rand(rng, (1, 1, 6, 6), dtype)
    mask_e = Tensor(rng.uniform(-1, 1, size=(1, 4, 6, 6)), dtype=dtype)
    check("edge_conv/gamma", lambda t: T.sum_all(T.hadamard(edge_conv(xe, bank), mask_e)), bank.gamma)
    bank_d = make_kernel_bank(4, 4, 1.0, dtype=dtype)
    xd = _rand(rng, (1, 4, 6, 6), dtype)
    check("depthwise_edge_conv/gamma", lambda t: T.sum_all(
        T.hadamard(depthwise_edge_conv(xd, bank_d), mask_e)), bank_d.gamma)

    # composite blocks
    xg = _rand(rng, (1, 6, 4, 4), dtype)
    check("simple_gate", lambda t: T.sum_all(simple_gate(t)), xg)

    for variant in ("simplified", "complex"):
        mixer = FrequencyMixer(f"chk.{variant}", 3, rng, variant=variant, dtype=dtype)
        xm = _rand(rng, (1, 3, 5, 5), dtype)
        # random cotangent: a plain sum leaves most spectral weight
        # coordinates with an exactly-zero derivative, where the central
        # difference is pure roundoff
        mask_m = Tensor(rng.uniform(-1, 1, size=(1, 3, 5, 5)), dtype=dtype)
        check(f"freq_mixer[{variant}]/input",
              lambda t, mx=mixer, mk=mask_m: T.sum_all(T.hadamard(mx(t), mk)), xm)
        check(f"freq_mixer[{variant}]/weight",
              lambda t, mx=mixer, mk=mask_m, xi=xm: T.sum_all(T.hadamard(mx(xi), mk)),
              mixer.conv1.weight)

    block = ResidualBlock("chk.block", 4, rng, dtype=dtype)
    xb = _rand(rng, (1, 4, 6, 6), dtype)
    check("residual_block/input", lambda t: T.sum_all(block(t)), xb)
    check("residual_block/alpha", lambda t: T.sum_all(block(xb)), block.alpha)
    check("residual_block/dconv", lambda t: T.sum_all(block(xb)), block.dconv.weight)
    check("residual_block/freq", lambda t: T.sum_all(block(xb)), block.freq.conv1.weight)

    pyr = StructurePyramid("chk.pyramid", 1, [4, 8], 4, rng, dtype=dtype)
    xs2 = _rand(rng, (1, 1, 8, 8), dtype)

    def pyr_sum(_):
        levels = pyr(xs2)
        total = T.sum_all(levels[0])
        for lv in levels[1:]:
            total = T.add(total, T.sum_all(lv))
        return total

    check("structure_pyramid/gamma", pyr_sum, pyr.econv_bank.gamma)
    check("structure_pyramid/proj", pyr_sum, pyr.projections[0].weight)

    # micro network end to end through the training loss
    net_cfg = NetworkConfig(width=8, enc_blocks=(1, 1), mid_blocks=1,
                            dec_blocks=(1, 1), kernel_kinds=4)
    model = build(net_cfg, seed=seed, dtype=dtype)
    # break the identity initialization so the head also gets a gradient
    model.final.weight.data = rng.uniform(-0.05, 0.05,
                                          size=model.final.weight.shape).astype(dtype)
    xn = Tensor(rng.uniform(0.0, 1.0, size=(1, 1, 8, 8)), requires_grad=True, dtype=dtype)
    target = Tensor(rng.uniform(0.0, 1.0, size=(1, 1, 8, 8)), dtype=dtype)

    def net_loss(_):
        return psnr_loss(model(xn), target)

    check("micro_network/input", lambda t: psnr_loss(model(t), target), xn)
    check("micro_network/intro", net_loss, model.intro.weight)
    check("micro_network/edge-gamma", net_loss, model.pyramid.econv_bank.gamma)
    check("micro_network/final", net_loss, model.final.weight)
    return results
