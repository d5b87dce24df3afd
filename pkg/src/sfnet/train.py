"""Training engine: PSNR loss, AdamW, cosine-annealed schedule, main loop.

The loss is the negative PSNR computed from the mean squared error, so lower
is better and the value is resolution-independent. All randomness flows from
the config seed through one counter-based generator, making same-seed runs
bit-identical (timing fields aside).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import tensor as T
from .checkpoint import save_checkpoint
from .data import ImagePair, sample_patches
from .errors import ConfigError, NumericError, ShapeError, UsageError
from .network import Model
from .rng import generator, state_to_words
from .tensor import Tensor, backward


@dataclass
class TrainConfig:
    total_iters: int = 5000
    lr0: float = 1e-3
    eta_min: float = 1e-7
    beta1: float = 0.9
    beta2: float = 0.9
    weight_decay: float = 0.0
    batch: int = 4
    crop: int = 64
    loss_eps: float = 1e-8
    max_pixel: float = 1.0
    seed: int = 0
    checkpoint_every: int = 1000
    lr_step: int = 1000  # schedule is sampled in stair-steps of this many iterations

    def __post_init__(self):
        if self.total_iters < 1:
            raise ConfigError(f"total_iters must be >= 1, got {self.total_iters}")
        if not (self.lr0 >= self.eta_min >= 0):
            raise ConfigError(f"need lr0 >= eta_min >= 0, got lr0={self.lr0}, eta_min={self.eta_min}")


def psnr_loss(pred: Tensor, target: Tensor, max_pixel: float = 1.0,
              eps: float = 1e-8) -> Tensor:
    """Differentiable -10*log10(max^2 / (MSE + eps))."""
    if pred.shape != target.shape:
        raise ShapeError(f"dims differ: {pred.shape} vs {target.shape}")
    if eps <= 0:
        raise ConfigError(f"eps must be > 0, got {eps}")
    diff = T.sub(pred, target)
    mse = T.mean_all(T.hadamard(diff, diff))
    ratio = T.scale(T.add_scalar(mse, eps), 1.0 / (max_pixel * max_pixel))
    return T.scale(T.log(ratio), 10.0 / math.log(10.0))


def init_optim_state(model: Model) -> dict:
    return {
        "step": 0,
        "m": {name: np.zeros_like(p.data) for name, p in model.parameters().items()},
        "v": {name: np.zeros_like(p.data) for name, p in model.parameters().items()},
    }


def adamw_step(model: Model, state: dict, lr: float, cfg: TrainConfig) -> None:
    """Bias-corrected AdamW with decoupled weight decay; eps 1e-8."""
    state["step"] += 1
    t = state["step"]
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in model.parameters().items():
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter {name!r}")
        m = state["m"][name]
        v = state["v"][name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        if cfg.weight_decay:
            p.data -= (lr * cfg.weight_decay) * p.data
        m_hat = m / c1
        v_hat = v / c2
        p.data -= lr * m_hat / (np.sqrt(v_hat) + 1e-8)


def cosine_lr(t: int, cfg: TrainConfig) -> float:
    """Stair-stepped cosine annealing from lr0 down to eta_min."""
    if not (0 <= t <= cfg.total_iters):
        raise UsageError(f"iteration {t} outside [0, {cfg.total_iters}]")
    step = min(cfg.lr_step, cfg.total_iters)
    t_eff = cfg.total_iters if t == cfg.total_iters else (t // step) * step
    frac = t_eff / cfg.total_iters
    return cfg.eta_min + (cfg.lr0 - cfg.eta_min) * (1.0 + math.cos(math.pi * frac)) / 2.0


@dataclass
class LossRecord:
    iteration: int
    lr: float
    loss: float
    wallclock_ms: float

    def line(self) -> str:
        return f"{self.iteration}\t{self.lr:.10e}\t{self.loss!r}\t{self.wallclock_ms:.3f}"


def write_loss_log(path: str, records: Sequence[LossRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iter\tlr\tloss\twallclock_ms\n")
        for rec in records:
            fh.write(rec.line() + "\n")


def train_loop(model: Model, dataset: Sequence[ImagePair], cfg: TrainConfig,
               log_sink: Optional[Callable[[LossRecord], None]] = None,
               checkpoint_path: Optional[str] = None) -> List[LossRecord]:
    """Deterministic loop: sample batch, forward, loss, backward, AdamW step.

    On a non-finite loss the loop aborts with the iteration index after
    checkpointing the last good state.
    """
    if not dataset:
        raise ConfigError("empty dataset")
    rng = generator(cfg.seed)
    state = init_optim_state(model)
    records: List[LossRecord] = []
    for it in range(cfg.total_iters):
        t0 = time.perf_counter()
        clean, noisy = sample_patches(dataset, cfg.crop, cfg.batch, rng)
        model.zero_grads()
        try:
            pred = model(noisy)
            loss = psnr_loss(pred, clean, cfg.max_pixel, cfg.loss_eps)
            loss_val = loss.item()
        except NumericError:
            loss_val = math.nan
        if not math.isfinite(loss_val):
            if checkpoint_path is not None:
                save_checkpoint(checkpoint_path, model, iteration=it, optimizer_state=state,
                                rng_words=state_to_words(rng))
            raise NumericError(f"non-finite loss at iteration {it}")
        lr = cosine_lr(it, cfg)
        if lr > 0.0:
            backward(loss)
            adamw_step(model, state, lr, cfg)
        rec = LossRecord(iteration=it, lr=lr, loss=loss_val,
                         wallclock_ms=(time.perf_counter() - t0) * 1e3)
        records.append(rec)
        if log_sink is not None:
            log_sink(rec)
        if checkpoint_path is not None and cfg.checkpoint_every > 0 \
                and (it + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, model, iteration=it + 1,
                            optimizer_state=state, rng_words=state_to_words(rng))
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, model, iteration=cfg.total_iters,
                        optimizer_state=state, rng_words=state_to_words(rng))
    return records
