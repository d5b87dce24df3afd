"""Counter-based random number generation (Philox 4x64-10).

All randomness in the package flows through explicit 64-bit seeds feeding
Philox generators, so corpora, noise, and training runs reproduce bit-exactly
across platforms. The generator state serializes to raw 32-bit words for
checkpoint storage.
"""

from __future__ import annotations

import numpy as np

ALGORITHM_ID = "philox4x64-10"


def generator(*key) -> np.random.Generator:
    """Generator keyed by one or two u64 values (Philox keys are 128-bit)."""
    if not 1 <= len(key) <= 2:
        raise ValueError("generator takes one or two u64 key values")
    k = np.zeros(2, dtype=np.uint64)
    for i, v in enumerate(key):
        k[i] = np.uint64(int(v) & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=k))


def state_to_words(gen: np.random.Generator) -> np.ndarray:
    """Full Philox state as u32 words (counter, key, buffer, positions)."""
    st = gen.bit_generator.state
    inner = st["state"]
    u64s = np.concatenate([
        np.asarray(inner["counter"], dtype=np.uint64),
        np.asarray(inner["key"], dtype=np.uint64),
        np.asarray(st["buffer"], dtype=np.uint64),
        np.array([st["buffer_pos"], st["has_uint32"], st["uinteger"]], dtype=np.uint64),
    ])
    return u64s.view(np.uint32)


def generator_from_words(words: np.ndarray) -> np.random.Generator:
    u64s = np.ascontiguousarray(words, dtype=np.uint32).view(np.uint64)
    gen = np.random.Generator(np.random.Philox())
    gen.bit_generator.state = {
        "bit_generator": "Philox",
        "state": {"counter": u64s[0:4], "key": u64s[4:6]},
        "buffer": u64s[6:10],
        "buffer_pos": int(u64s[10]),
        "has_uint32": int(u64s[11]),
        "uinteger": int(u64s[12]),
    }
    return gen
