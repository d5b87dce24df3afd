"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .errors import NumericError
from .tensor import Tensor, backward


def finite_diff_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float,
                      max_coords: Optional[int] = None,
                      rng: Optional[np.random.Generator] = None,
                      upcast: bool = False) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` must be scalar-valued. Coordinates of ``x`` are perturbed by +/- h;
    with ``max_coords`` set, a random subset is swept (large tensors).

    With ``upcast`` the probe evaluations run on the same values widened to
    float64. The analytic gradient is still computed in the tensor's own
    dtype; widening only keeps the central-difference oracle's roundoff noise
    well below the comparison tolerance, which single precision cannot do at
    any step size.
    """
    if not x.requires_grad:
        x.requires_grad = True
    x.zero_grad()
    loss = f(x)
    backward(loss)
    analytic = x.grad.copy() if x.grad is not None else np.zeros_like(x.data)

    original = x.data
    if upcast:
        # swap the payload in place so closures holding this tensor see the
        # widened values during probe evaluations
        x.data = original.astype(np.float64)
    flat = x.data.reshape(-1)
    coords = np.arange(flat.size)
    if max_coords is not None and flat.size > max_coords:
        gen = rng if rng is not None else np.random.default_rng(0)
        coords = gen.choice(flat.size, size=max_coords, replace=False)

    analytic_flat = analytic.reshape(-1)
    worst = 0.0
    try:
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            fp = f(x).item()
            flat[i] = orig - h
            fm = f(x).item()
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                idx = np.unravel_index(int(i), x.shape)
                raise NumericError(f"non-finite function value at coordinate {idx}")
            numeric = (fp - fm) / (2.0 * h)
            a = float(analytic_flat[i])
            denom = max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, abs(a - numeric) / denom)
    finally:
        x.data = original
    return worst
