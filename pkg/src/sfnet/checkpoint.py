"""Binary checkpoint archive.

Layout (all integers little-endian):
  magic "SFFN" | u32 version | u64 iteration | u32 tensor count
  per tensor: u32 name length | UTF-8 name | u32 rank | rank x u32 dims |
              float32 little-endian payload
  trailing u64 checksum (CRC-32 << 32 | Adler-32) of all preceding bytes

Model parameters are stored under their own names; optimizer moments under
"opt/m/<name>" and "opt/v/<name>"; the step counter under "opt/step"; RNG
state words (bit-cast to f32) under "rng/state"; the architecture vector
under "meta/config". Saves are atomic (temp file + rename); loads verify
length and checksum before constructing anything.
"""

from __future__ import annotations

import os
import struct
import zlib
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import CheckpointError
from .network import Model, NetworkConfig, build, config_from_vector, config_to_vector
from .tensor import DEFAULT_DTYPE

MAGIC = b"SFFN"
VERSION = 1


def _checksum64(data: bytes) -> int:
    # CRC-32 in the high word, Adler-32 in the low word
    return (zlib.crc32(data) << 32) | zlib.adler32(data)


def _pack_tensor(name: str, arr: np.ndarray) -> bytes:
    nm = name.encode("utf-8")
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    head = struct.pack("<I", len(nm)) + nm
    head += struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + payload


def write_archive(path: str, iteration: int, tensors: Dict[str, np.ndarray]) -> None:
    body = MAGIC + struct.pack("<IQI", VERSION, iteration, len(tensors))
    for name, arr in tensors.items():
        body += _pack_tensor(name, arr)
    body += struct.pack("<Q", _checksum64(body))
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(body)
    os.replace(tmp, path)


def read_archive(path: str) -> Tuple[int, Dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 + 4 + 8 + 4 + 8:
        raise CheckpointError(f"truncated checkpoint: {len(data)} bytes")
    if data[:4] != MAGIC:
        raise CheckpointError(f"bad magic {data[:4]!r}")
    (stored_sum,) = struct.unpack("<Q", data[-8:])
    if _checksum64(data[:-8]) != stored_sum:
        raise CheckpointError("checksum mismatch (corrupt or truncated file)")
    version, iteration, count = struct.unpack("<IQI", data[4:20])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    off = 20
    end = len(data) - 8
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        try:
            (nlen,) = struct.unpack_from("<I", data, off)
            off += 4
            name = data[off:off + nlen].decode("utf-8")
            off += nlen
            (rank,) = struct.unpack_from("<I", data, off)
            off += 4
            dims = struct.unpack_from(f"<{rank}I", data, off)
            off += 4 * rank
            size = int(np.prod(dims, dtype=np.int64)) if rank else 1
            payload = data[off:off + 4 * size]
            if len(payload) != 4 * size:
                raise CheckpointError(f"tensor {name!r} payload truncated")
            off += 4 * size
        except struct.error as exc:
            raise CheckpointError(f"malformed tensor record at offset {off}: {exc}") from None
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
    if off != end:
        raise CheckpointError(f"{end - off} trailing bytes after last tensor")
    return iteration, tensors


def save_checkpoint(path: str, model: Model, iteration: int = 0,
                    optimizer_state: Optional[dict] = None,
                    rng_words: Optional[np.ndarray] = None) -> None:
    tensors: Dict[str, np.ndarray] = {
        "meta/config": np.asarray(config_to_vector(model.config), dtype=np.float32)}
    for name, p in model.parameters().items():
        tensors[name] = p.data
    if optimizer_state is not None:
        tensors["opt/step"] = np.array([optimizer_state["step"]], dtype=np.float32)
        for name, m in optimizer_state["m"].items():
            tensors[f"opt/m/{name}"] = m
        for name, v in optimizer_state["v"].items():
            tensors[f"opt/v/{name}"] = v
    if rng_words is not None:
        tensors["rng/state"] = rng_words.view(np.float32)
    write_archive(path, iteration, tensors)


def load_checkpoint(path: str, config: Optional[NetworkConfig] = None,
                    dtype=DEFAULT_DTYPE):
    """Restore (model, optimizer_state, iteration, rng_words).

    With ``config`` given, stored tensors are validated against that
    architecture; any dimension mismatch names the offending tensor.
    """
    iteration, tensors = read_archive(path)
    if "meta/config" not in tensors:
        raise CheckpointError("missing meta/config record")
    stored_cfg = config_from_vector(tensors["meta/config"])
    cfg = config if config is not None else stored_cfg
    model = build(cfg, seed=0, dtype=dtype)
    for name, p in model.parameters().items():
        if name not in tensors:
            raise CheckpointError(f"missing parameter {name!r}")
        arr = tensors[name]
        if tuple(arr.shape) != tuple(p.shape):
            raise CheckpointError(
                f"dim mismatch for {name!r}: checkpoint {tuple(arr.shape)} vs model {tuple(p.shape)}")
        p.data = arr.astype(dtype)
    opt_state = None
    if "opt/step" in tensors:
        opt_state = {"step": int(tensors["opt/step"][0]), "m": {}, "v": {}}
        for name in model.parameters():
            for kind in ("m", "v"):
                key = f"opt/{kind}/{name}"
                if key not in tensors:
                    raise CheckpointError(f"missing optimizer moment {key!r}")
                arr = tensors[key]
                if tuple(arr.shape) != tuple(model.parameters()[name].shape):
                    raise CheckpointError(
                        f"dim mismatch for {key!r}: {tuple(arr.shape)}")
                opt_state[kind][name] = arr.astype(dtype)
    rng_words = tensors.get("rng/state")
    if rng_words is not None:
        rng_words = rng_words.view(np.uint32)
    return model, opt_state, iteration, rng_words
