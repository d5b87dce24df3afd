"""Evaluation suite: PSNR, SSIM, paired t-test, and dataset reports."""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .data import ImagePair
from .errors import ConfigError, ShapeError, UsageError
from .network import Model, count_macs
from .tensor import Tensor

PSNR_CAP_DB = 100.0


def psnr(a: Tensor, b: Tensor, max_pixel: float = 1.0) -> float:
    """10*log10(max^2 / MSE); identical images return the 100 dB cap."""
    if a.shape != b.shape:
        raise ShapeError(f"dims differ: {a.shape} vs {b.shape}")
    mse = float(np.mean((a.data.astype(np.float64) - b.data.astype(np.float64)) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(max_pixel * max_pixel / mse), PSNR_CAP_DB)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    w = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return w / w.sum()


def _filter_valid(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    # separable valid-mode filtering
    out = np.apply_along_axis(lambda r: np.convolve(r, win, mode="valid"), 1, img)
    return np.apply_along_axis(lambda c: np.convolve(c, win, mode="valid"), 0, out)


def ssim(a: Tensor, b: Tensor, max_pixel: float = 1.0) -> float:
    """Mean local SSIM, 11x11 Gaussian window sigma=1.5, K1=0.01, K2=0.03."""
    if a.shape != b.shape:
        raise ShapeError(f"dims differ: {a.shape} vs {b.shape}")
    n, c, h, w = a.shape
    win_size = 11
    if h < win_size or w < win_size:
        raise ConfigError(f"image {h}x{w} smaller than the {win_size}x{win_size} window")
    win = _gaussian_window(win_size, 1.5)
    c1 = (0.01 * max_pixel) ** 2
    c2 = (0.03 * max_pixel) ** 2
    vals = []
    for ni in range(n):
        for ci in range(c):
            x = a.data[ni, ci].astype(np.float64)
            y = b.data[ni, ci].astype(np.float64)
            mu_x = _filter_valid(x, win)
            mu_y = _filter_valid(y, win)
            xx = _filter_valid(x * x, win) - mu_x * mu_x
            yy = _filter_valid(y * y, win) - mu_y * mu_y
            xy = _filter_valid(x * y, win) - mu_x * mu_y
            num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
            den = (mu_x ** 2 + mu_y ** 2 + c1) * (xx + yy + c2)
            vals.append(np.mean(num / den))
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# paired t-test (incomplete-beta p-value implemented in-repo)
# ---------------------------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    # continued fraction for the regularized incomplete beta (Lentz's method)
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 500):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-14:
            break
    return h


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not (0.0 <= x <= 1.0):
        raise UsageError(f"x must be in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log(1.0 - x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf_two_sided(t_stat: float, dof: int) -> float:
    """Two-sided p-value for Student's t with ``dof`` degrees of freedom."""
    x = dof / (dof + t_stat * t_stat)
    return betainc_reg(dof / 2.0, 0.5, x)


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> Tuple[float, float]:
    """t = mean(d) / (sd(d)/sqrt(n)) with sample sd; two-sided p-value."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"paired samples must be equal-length vectors: {a.shape} vs {b.shape}")
    n = a.size
    if n < 2:
        raise ConfigError(f"need n >= 2 pairs, got {n}")
    d = a - b
    sd = d.std(ddof=1)
    if sd == 0.0:
        raise ConfigError("degenerate case: all paired differences identical")
    t_stat = float(d.mean() / (sd / math.sqrt(n)))
    return t_stat, student_t_sf_two_sided(t_stat, n - 1)


# ---------------------------------------------------------------------------
# dataset evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    sigma: float
    psnr_values: List[float]
    ssim_values: List[float]
    wallclock_ms: List[float]
    model_macs: int
    config_fingerprint: str

    @property
    def mean_psnr(self) -> float:
        return float(np.mean(self.psnr_values))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean(self.ssim_values))

    def to_kv(self) -> str:
        lines = [
            f"sigma = {self.sigma}",
            f"images = {len(self.psnr_values)}",
            f"mean_psnr_db = {self.mean_psnr!r}",
            f"mean_ssim = {self.mean_ssim!r}",
            f"model_macs = {self.model_macs}",
            f"config_fingerprint = {self.config_fingerprint}",
        ]
        for i, (p, s, ms) in enumerate(zip(self.psnr_values, self.ssim_values,
                                           self.wallclock_ms)):
            lines.append(f"image_{i}_psnr_db = {p!r}")
            lines.append(f"image_{i}_ssim = {s!r}")
            lines.append(f"image_{i}_wallclock_ms = {ms:.3f}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        lines = [f"evaluation at sigma={self.sigma} ({len(self.psnr_values)} images)",
                 f"{'image':>6} {'psnr_db':>10} {'ssim':>8} {'ms':>9}"]
        for i, (p, s, ms) in enumerate(zip(self.psnr_values, self.ssim_values,
                                           self.wallclock_ms)):
            lines.append(f"{i:>6} {p:>10.4f} {s:>8.4f} {ms:>9.2f}")
        lines.append(f"{'mean':>6} {self.mean_psnr:>10.4f} {self.mean_ssim:>8.4f}")
        lines.append(f"model MACs: {self.model_macs}")
        return "\n".join(lines) + "\n"


def config_fingerprint(model: Model) -> str:
    text = repr(model.config)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def evaluate(model: Model, pairs: Sequence[ImagePair], sigma: float,
             with_ssim: bool = True) -> EvalReport:
    """Denoise every pair, score against clean, and time each forward pass."""
    if not pairs:
        raise ConfigError("empty dataset")
    psnr_values: List[float] = []
    ssim_values: List[float] = []
    wall: List[float] = []
    for pair in pairs:
        t0 = time.perf_counter()
        denoised = model(pair.noisy)
        wall.append((time.perf_counter() - t0) * 1e3)
        psnr_values.append(psnr(denoised, pair.clean))
        ssim_values.append(ssim(denoised, pair.clean) if with_ssim else float("nan"))
    cfg = model.config
    m = cfg.pad_multiple
    h, w = pairs[0].clean.shape[2], pairs[0].clean.shape[3]
    macs, _ = count_macs(cfg, h + (-h) % m, w + (-w) % m)
    return EvalReport(sigma=sigma, psnr_values=psnr_values, ssim_values=ssim_values,
                      wallclock_ms=wall, model_macs=macs,
                      config_fingerprint=config_fingerprint(model))


def measure_runtime_ms(model: Model, size: int = 256, repeats: int = 5) -> float:
    """Median forward wallclock on a fixed input after one warm-up pass."""
    x = Tensor(np.zeros((1, model.config.in_channels, size, size), dtype=np.float32))
    model(x)
    times = []
    for _ in range(max(repeats, 1)):
        t0 = time.perf_counter()
        model(x)
        times.append((time.perf_counter() - t0) * 1e3)
    return float(np.median(times))
