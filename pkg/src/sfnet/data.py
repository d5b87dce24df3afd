"""Image I/O, noise synthesis, patch sampling, and the synthetic corpus.

Pixel values live in [0, 1]; noise levels are quoted on the 0-255 scale and
applied as sigma/255 on the normalized scale. Noisy images are clipped to
[0, 1] after noise addition (emulating 8-bit capture) but never re-quantized;
quantization happens only at PGM export.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import ConfigError, FormatError
from .rng import generator
from .tensor import Tensor


# ---------------------------------------------------------------------------
# PGM (P5, 8-bit) files
# ---------------------------------------------------------------------------

def _read_token(data: bytes, off: int) -> Tuple[bytes, int]:
    # skip whitespace and '#' comment lines
    while off < len(data):
        ch = data[off:off + 1]
        if ch.isspace():
            off += 1
        elif ch == b"#":
            while off < len(data) and data[off:off + 1] != b"\n":
                off += 1
        else:
            break
    start = off
    while off < len(data) and not data[off:off + 1].isspace():
        off += 1
    if start == off:
        raise FormatError(f"unexpected end of header at byte {start}")
    return data[start:off], off


def load_pgm(path: str) -> Tensor:
    """Read a binary (P5) 8-bit PGM into a 1x1xHxW tensor with values v/255."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P5":
        raise FormatError(f"bad magic {data[:2]!r} at byte 0 (only binary P5 supported)")
    off = 2
    tokens = []
    for _ in range(3):
        tok, off = _read_token(data, off)
        tokens.append(tok)
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FormatError(f"non-numeric header token before byte {off}") from None
    if maxval != 255:
        raise FormatError(f"maxval {maxval} at byte {off} (only 255 supported)")
    off += 1  # single whitespace byte after maxval
    payload = data[off:off + w * h]
    if len(payload) != w * h:
        raise FormatError(f"short file: expected {w * h} pixel bytes at byte {off}, got {len(payload)}")
    img = np.frombuffer(payload, dtype=np.uint8).reshape(h, w).astype(np.float32) / 255.0
    return Tensor(img[None, None])


def save_pgm(t: Tensor, path: str) -> None:
    """Write a 1x1xHxW tensor with values in [0, 1] as binary 8-bit PGM."""
    n, c, h, w = t.shape
    if n != 1 or c != 1:
        raise FormatError(f"PGM export needs a 1x1xHxW tensor, got {t.shape}")
    vals = t.data[0, 0]
    if vals.min() < 0.0 or vals.max() > 1.0:
        raise FormatError("pixel values outside [0, 1]")
    quant = np.clip(np.rint(vals * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(quant.tobytes())


# ---------------------------------------------------------------------------
# noise synthesis
# ---------------------------------------------------------------------------

@dataclass
class ImagePair:
    clean: Tensor
    noisy: Tensor
    sigma: float
    seed: int


def add_gaussian_noise(clean: Tensor, sigma: float, seed: int) -> Tensor:
    """i.i.d. Gaussian noise at sigma on the 0-255 scale, clipped to [0, 1]."""
    if sigma < 0:
        raise ConfigError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return Tensor(clean.data.copy())
    rng = generator(seed)
    g = rng.normal(0.0, sigma / 255.0, size=clean.shape)
    return Tensor(np.clip(clean.data + g.astype(clean.data.dtype), 0.0, 1.0))


def make_pair(clean: Tensor, sigma: float, seed: int) -> ImagePair:
    return ImagePair(clean=clean, noisy=add_gaussian_noise(clean, sigma, seed),
                     sigma=sigma, seed=seed)


def sample_patches(pairs: Sequence[ImagePair], crop: int, batch: int,
                   rng: np.random.Generator) -> Tuple[Tensor, Tensor]:
    """Aligned random crops, uniform over images and valid offsets."""
    if not pairs:
        raise ConfigError("empty dataset")
    clean_out = []
    noisy_out = []
    for _ in range(batch):
        pair = pairs[int(rng.integers(len(pairs)))]
        _, _, h, w = pair.clean.shape
        if crop > h or crop > w:
            raise ConfigError(f"crop {crop} larger than image {h}x{w}")
        i = int(rng.integers(h - crop + 1))
        j = int(rng.integers(w - crop + 1))
        clean_out.append(pair.clean.data[0, :, i:i + crop, j:j + crop])
        noisy_out.append(pair.noisy.data[0, :, i:i + crop, j:j + crop])
    return Tensor(np.stack(clean_out)), Tensor(np.stack(noisy_out))


# ---------------------------------------------------------------------------
# synthetic corpus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorpusSpec:
    count: int = 16
    size: int = 64
    pitch: int = 8
    line_width: int = 1
    illumination: Tuple[float, float] = (0.2, 1.0)
    star_density: float = 0.0005
    seed: int = 0

    def __post_init__(self):
        if self.count < 1 or self.size < 4:
            raise ConfigError(f"bad corpus dims: count={self.count}, size={self.size}")
        if not (0 < self.line_width < self.pitch <= self.size):
            raise ConfigError(f"need 0 < line_width < pitch <= size; got {self}")
        lo, hi = self.illumination
        if not (0.0 <= lo <= hi <= 1.0):
            raise ConfigError(f"illumination range must satisfy 0 <= lo <= hi <= 1, got {self.illumination}")
        if self.star_density < 0:
            raise ConfigError(f"star_density must be >= 0, got {self.star_density}")


def _panel_image(spec: CorpusSpec, rng: np.random.Generator) -> np.ndarray:
    s = spec.size
    ii, jj = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
    phase_i = int(rng.integers(spec.pitch))
    phase_j = int(rng.integers(spec.pitch))
    grid = (((ii + phase_i) % spec.pitch) < spec.line_width) | \
           (((jj + phase_j) % spec.pitch) < spec.line_width)
    cell_level = 0.35
    line_level = 1.0
    img = np.where(grid, line_level, cell_level)
    lo, hi = spec.illumination
    img = img * float(rng.uniform(lo, hi))
    n_stars = int(round(spec.star_density * s * s))
    for _ in range(n_stars):
        si = int(rng.integers(s))
        sj = int(rng.integers(s))
        img[si, sj] = 1.0
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def generate_corpus(spec: CorpusSpec) -> List[Tensor]:
    """Periodic panel-grid images with configurable illumination and sparse
    bright points; a pure function of the spec."""
    images = []
    for idx in range(spec.count):
        rng = generator(spec.seed, idx)
        images.append(Tensor(_panel_image(spec, rng)[None, None]))
    return images


def write_manifest(path: str, entries: Sequence[Tuple[int, str, int]]) -> None:
    """Lines of "index<TAB>path<TAB>seed"."""
    with open(path, "w", encoding="utf-8") as fh:
        for index, img_path, seed in entries:
            fh.write(f"{index}\t{img_path}\t{seed}\n")


def read_manifest(path: str) -> List[Tuple[int, str, int]]:
    entries = []
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(f"manifest line {lineno}: expected 3 tab-separated fields")
            index, img_path, seed = parts
            if not os.path.isabs(img_path):
                img_path = os.path.join(base, img_path)
            entries.append((int(index), img_path, int(seed)))
    return entries
