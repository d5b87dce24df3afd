"""Rank-4 tensor type with reverse-mode automatic differentiation.

Every value in the network is a dense (batch, channel, height, width) array
of floats. Forward operations build a dynamic graph; ``backward`` walks it in
reverse topological order and accumulates gradients additively into every
reachable tensor that requires them. Callers (the training engine) own
zeroing gradients between steps.

float32 is the production dtype; the same code paths run in float64 for
gradient-check verification.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NumericError, ShapeError, UsageError

DEFAULT_DTYPE = np.float32


def _as_array(data, dtype=None) -> np.ndarray:
    arr = np.asarray(data)
    if dtype is not None:
        arr = arr.astype(dtype, copy=False)
    elif arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(DEFAULT_DTYPE)
    if arr.ndim != 4:
        raise ShapeError(f"tensors are rank-4 (n, c, h, w); got shape {arr.shape}")
    if any(d < 1 for d in arr.shape):
        raise ShapeError(f"all dims must be >= 1; got {arr.shape}")
    return arr


class Tensor:
    """Immutable-by-convention rank-4 array plus autodiff bookkeeping."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None,
                 parents: Sequence["Tensor"] = (),
                 backward: Optional[Callable[[np.ndarray], None]] = None):
        self.data = _as_array(data, dtype)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = tuple(parents)
        self._backward = backward

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() needs a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(())[()])

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """A trainable tensor with a unique name inside one model."""

    __slots__ = ("name",)

    def __init__(self, data, name: str, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def zeros(shape, dtype=DEFAULT_DTYPE) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype))


def ones(shape, dtype=DEFAULT_DTYPE) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype))


def _make(data: np.ndarray, parents: Sequence[Tensor],
          backward: Callable[[np.ndarray], None]) -> Tensor:
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req,
                  parents=parents if req else (),
                  backward=backward if req else None)


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar loss node.

    Gradients accumulate additively across uses; reachable tensors with
    ``requires_grad`` end up with a populated ``grad``.
    """
    if loss.shape != (1, 1, 1, 1):
        raise UsageError(f"backward needs a scalar (1,1,1,1) loss, got {loss.shape}")
    if not loss.requires_grad:
        raise UsageError("backward on a detached node: nothing requires grad")

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    loss.accumulate_grad(np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# elementwise operations (limited broadcasting: shapes must be numpy
# broadcast-compatible at rank 4, e.g. a per-channel (1, c, 1, 1) vector)
# ---------------------------------------------------------------------------

def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    axes = tuple(i for i in range(4) if shape[i] == 1 and g.shape[i] != 1)
    return g.sum(axis=axes, keepdims=True)


def _check_broadcast(a: Tensor, b: Tensor) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"non-broadcastable dims {a.shape} vs {b.shape}") from None


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    out_data = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.shape))

    return _make(out_data, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    out_data = a.data - b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(-_unbroadcast(g, b.shape))

    return _make(out_data, (a, b), bwd)


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    out_data = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.shape))

    return _make(out_data, (a, b), bwd)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    out_data = a.data * s

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * s)

    return _make(out_data, (a,), bwd)


def add_scalar(a: Tensor, s: float) -> Tensor:
    out_data = a.data + float(s)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g)

    return _make(out_data, (a,), bwd)


def elementwise(op: str, a: Tensor, b) -> Tensor:
    """Dispatch by name; ``b`` is a tensor for add/sub/hadamard, a float for scale."""
    if op == "add":
        return add(a, b)
    if op == "sub":
        return sub(a, b)
    if op == "hadamard":
        return hadamard(a, b)
    if op == "scale":
        return scale(a, b)
    raise UsageError(f"unknown elementwise op {op!r}")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    out_data = a.data * mask

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * mask)

    return _make(out_data, (a,), bwd)


def log(a: Tensor) -> Tensor:
    """Natural logarithm; domain errors surface as NumericError."""
    with np.errstate(invalid="ignore", divide="ignore"):
        out_data = np.log(a.data)
    if not np.all(np.isfinite(out_data)):
        raise NumericError("log of non-positive value")

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g / a.data)

    return _make(out_data, (a,), bwd)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def sum_all(a: Tensor) -> Tensor:
    out_data = a.data.sum(dtype=a.data.dtype).reshape(1, 1, 1, 1)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(np.full_like(a.data, g.reshape(())[()]))

    return _make(out_data, (a,), bwd)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    out_data = (a.data.sum(dtype=a.data.dtype) / n).reshape(1, 1, 1, 1)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(np.full_like(a.data, g.reshape(())[()] / n))

    return _make(out_data, (a,), bwd)


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def _im2col(xp: np.ndarray, k: int, stride: int):
    n, c, hp, wp = xp.shape
    ho = (hp - k) // stride + 1
    wo = (wp - k) // stride + 1
    s = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp, (n, c, k, k, ho, wo),
        (s[0], s[1], s[2], s[3], s[2] * stride, s[3] * stride),
        writeable=False)
    return view, ho, wo


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
           stride: int = 1, pad: int = 0, groups: int = 1) -> Tensor:
    """Grouped 2-D cross-correlation with zero padding.

    ``weight`` is (c_out, c_in/groups, k, k); ``bias`` is a per-channel
    (1, c_out, 1, 1) tensor. No kernel flip: the kernel is slid over the
    input as-is.
    """
    from .errors import ConfigError

    n, cin, h, w = x.shape
    cout, cin_g, kh, kw = weight.shape
    if kh != kw:
        raise ShapeError(f"square kernels only, got {weight.shape}")
    k = kh
    if stride < 1 or pad < 0:
        raise ConfigError(f"stride must be >= 1 and pad >= 0, got stride={stride} pad={pad}")
    if cin % groups or cout % groups:
        raise ConfigError(f"channels not divisible by groups: c_in={cin} c_out={cout} groups={groups}")
    if cin_g != cin // groups:
        raise ShapeError(f"weight dims {weight.shape} incompatible with input dims {x.shape} at groups={groups}")
    if h + 2 * pad < k or w + 2 * pad < k:
        raise ShapeError(f"kernel {k}x{k} larger than padded input {x.shape} with pad={pad}")
    if bias is not None and bias.shape != (1, cout, 1, 1):
        raise ShapeError(f"bias dims {bias.shape} != (1, {cout}, 1, 1)")

    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    view, ho, wo = _im2col(xp, k, stride)
    kk = cin_g * k * k
    p_sites = ho * wo
    cols = np.ascontiguousarray(view).reshape(n, groups, kk, p_sites)
    w_r = weight.data.reshape(groups, cout // groups, kk)
    out_data = np.matmul(w_r, cols).reshape(n, cout, ho, wo)
    if bias is not None:
        out_data = out_data + bias.data

    def bwd(g):
        g_r = g.reshape(n, groups, cout // groups, p_sites)
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(g.sum(axis=(0, 2, 3)).reshape(1, cout, 1, 1))
        if weight.requires_grad:
            dw = np.matmul(g_r, cols.transpose(0, 1, 3, 2)).sum(axis=0)
            weight.accumulate_grad(dw.reshape(weight.shape))
        if x.requires_grad:
            dcols = np.matmul(w_r.transpose(0, 2, 1), g_r)
            dcols = dcols.reshape(n, cin, k, k, ho, wo)
            dxp = np.zeros_like(xp)
            for ki in range(k):
                for kj in range(k):
                    dxp[:, :, ki:ki + stride * ho:stride,
                        kj:kj + stride * wo:stride] += dcols[:, :, ki, kj]
            dx = dxp[:, :, pad:pad + h, pad:pad + w] if pad else dxp
            x.accumulate_grad(dx)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(out_data, parents, bwd)


# ---------------------------------------------------------------------------
# channel rearrangements
# ---------------------------------------------------------------------------

def slice_channels(x: Tensor, start: int, stop: int) -> Tensor:
    n, c, h, w = x.shape
    if not (0 <= start < stop <= c):
        raise ShapeError(f"channel slice [{start}, {stop}) out of range for c={c}")
    out_data = x.data[:, start:stop].copy()

    def bwd(g):
        if x.requires_grad:
            dx = np.zeros_like(x.data)
            dx[:, start:stop] = g
            x.accumulate_grad(dx)

    return _make(out_data, (x,), bwd)


def channel_split2(x: Tensor) -> tuple[Tensor, Tensor]:
    """Split channels into halves [0, c/2) and [c/2, c)."""
    c = x.shape[1]
    if c % 2:
        raise ShapeError(f"channel_split2 needs an even channel count, got c={c}")
    return slice_channels(x, 0, c // 2), slice_channels(x, c // 2, c)


def concat_channels(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise UsageError("concat_channels needs at least one tensor")
    ref = parts[0].shape
    for p in parts[1:]:
        if (p.shape[0], p.shape[2], p.shape[3]) != (ref[0], ref[2], ref[3]):
            raise ShapeError(f"concat dims disagree: {ref} vs {p.shape}")
    out_data = np.concatenate([p.data for p in parts], axis=1)
    splits = np.cumsum([p.shape[1] for p in parts])[:-1]

    def bwd(g):
        pieces = np.split(g, splits, axis=1)
        for p, gp in zip(parts, pieces):
            if p.requires_grad:
                p.accumulate_grad(gp)

    return _make(out_data, tuple(parts), bwd)


def pixel_shuffle(x: Tensor, r: int, direction: str) -> Tensor:
    """Sub-pixel rearrangement: up (c/r^2, h*r, w*r) or its exact inverse."""
    n, c, h, w = x.shape
    if direction == "up":
        if c % (r * r):
            raise ShapeError(f"pixel_shuffle up needs c divisible by r^2; c={c}, r={r}")
        co = c // (r * r)
        out_data = (x.data.reshape(n, co, r, r, h, w)
                    .transpose(0, 1, 4, 2, 5, 3)
                    .reshape(n, co, h * r, w * r))

        def bwd(g):
            if x.requires_grad:
                dx = (g.reshape(n, co, h, r, w, r)
                      .transpose(0, 1, 3, 5, 2, 4)
                      .reshape(n, c, h, w))
                x.accumulate_grad(dx)

        return _make(out_data, (x,), bwd)

    if direction == "down":
        if h % r or w % r:
            raise ShapeError(f"pixel_shuffle down needs h, w divisible by r; dims={x.shape}, r={r}")
        ho, wo = h // r, w // r
        out_data = (x.data.reshape(n, c, ho, r, wo, r)
                    .transpose(0, 1, 3, 5, 2, 4)
                    .reshape(n, c * r * r, ho, wo))

        def bwd(g):
            if x.requires_grad:
                dx = (g.reshape(n, c, r, r, ho, wo)
                      .transpose(0, 1, 4, 2, 5, 3)
                      .reshape(n, c, h, w))
                x.accumulate_grad(dx)

        return _make(out_data, (x,), bwd)

    raise UsageError(f"pixel_shuffle direction must be 'up' or 'down', got {direction!r}")


# ---------------------------------------------------------------------------
# normalization, pooling, padding
# ---------------------------------------------------------------------------

def layer_norm_2d(x: Tensor, gain: Tensor, shift: Tensor, eps: float = 1e-6) -> Tensor:
    """Per-site channel normalization (population variance, eps inside the root)."""
    n, c, h, w = x.shape
    if gain.shape != (1, c, 1, 1) or shift.shape != (1, c, 1, 1):
        raise ShapeError(f"gain/shift must be (1, {c}, 1, 1); got {gain.shape}, {shift.shape}")
    if eps <= 0:
        raise UsageError(f"eps must be > 0, got {eps}")
    mu = x.data.mean(axis=1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.data.dtype))
    xhat = xc * inv
    out_data = xhat * gain.data + shift.data

    def bwd(g):
        if shift.requires_grad:
            shift.accumulate_grad(g.sum(axis=(0, 2, 3)).reshape(1, c, 1, 1))
        if gain.requires_grad:
            gain.accumulate_grad((g * xhat).sum(axis=(0, 2, 3)).reshape(1, c, 1, 1))
        if x.requires_grad:
            dxhat = g * gain.data
            m1 = dxhat.sum(axis=1, keepdims=True)
            m2 = (dxhat * xhat).sum(axis=1, keepdims=True)
            dx = (inv / c) * (c * dxhat - m1 - xhat * m2)
            x.accumulate_grad(dx)

    return _make(out_data, (x, gain, shift), bwd)


def avg_pool2(x: Tensor) -> Tensor:
    """2x2 average pooling with stride 2."""
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"avg_pool2 needs even h, w; got {x.shape}")
    out_data = x.data.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def bwd(g):
        if x.requires_grad:
            dx = np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * 0.25
            x.accumulate_grad(dx.astype(x.data.dtype, copy=False))

    return _make(out_data, (x,), bwd)


def _reflect_indices(size: int, pad: int) -> np.ndarray:
    # reflect-101 (no edge duplication); degenerate size-1 axes repeat the value
    idx = np.arange(size + pad)
    if size == 1:
        return np.zeros_like(idx)
    period = 2 * size - 2
    j = idx % period
    return np.where(j < size, j, period - j)


def reflect_pad_br(x: Tensor, pad_h: int, pad_w: int) -> Tensor:
    """Reflect-pad the bottom and right edges."""
    n, c, h, w = x.shape
    if pad_h < 0 or pad_w < 0:
        raise UsageError("padding must be non-negative")
    if pad_h == 0 and pad_w == 0:
        return x
    ih = _reflect_indices(h, pad_h)
    iw = _reflect_indices(w, pad_w)
    out_data = x.data[:, :, ih][:, :, :, iw]

    def _fold(g: np.ndarray, idx: np.ndarray, out_size: int) -> np.ndarray:
        # accumulate along the last axis through an index map
        lead = g.shape[:-1]
        flat = g.reshape(-1, g.shape[-1])
        res = np.zeros((flat.shape[0], out_size), dtype=g.dtype)
        np.add.at(res, (np.arange(flat.shape[0])[:, None], idx[None, :]), flat)
        return res.reshape(*lead, out_size)

    def bwd(g):
        if x.requires_grad:
            dg = _fold(g, iw, w)
            dg = _fold(dg.transpose(0, 1, 3, 2), ih, h).transpose(0, 1, 3, 2)
            x.accumulate_grad(np.ascontiguousarray(dg))

    return _make(out_data, (x,), bwd)


def crop_tl(x: Tensor, h: int, w: int) -> Tensor:
    """Keep the top-left h x w window."""
    n, c, hh, ww = x.shape
    if h > hh or w > ww or h < 1 or w < 1:
        raise ShapeError(f"cannot crop {x.shape} to {h}x{w}")
    out_data = x.data[:, :, :h, :w].copy()

    def bwd(g):
        if x.requires_grad:
            dx = np.zeros_like(x.data)
            dx[:, :, :h, :w] = g
            x.accumulate_grad(dx)

    return _make(out_data, (x,), bwd)
