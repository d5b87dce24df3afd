"""Figure rendering for the report paths (training, evaluation, ablation)."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_loss_curve(records, path: str) -> None:
    iters = [r.iteration for r in records]
    losses = [r.loss for r in records]
    lrs = [r.lr for r in records]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(iters, losses, lw=0.8, color="tab:blue")
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss (negative PSNR, dB)", color="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(iters, lrs, lw=0.8, color="tab:orange", alpha=0.7)
    ax2.set_ylabel("learning rate", color="tab:orange")
    ax2.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_eval_figure(report, path: str) -> None:
    idx = range(len(report.psnr_values))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.bar(idx, report.psnr_values, color="tab:blue")
    ax1.axhline(report.mean_psnr, color="k", ls="--", lw=0.8,
                label=f"mean {report.mean_psnr:.2f} dB")
    ax1.set_xlabel("image")
    ax1.set_ylabel("PSNR (dB)")
    ax1.legend(fontsize=8)
    ax2.bar(idx, report.ssim_values, color="tab:green")
    ax2.axhline(report.mean_ssim, color="k", ls="--", lw=0.8,
                label=f"mean {report.mean_ssim:.4f}")
    ax2.set_xlabel("image")
    ax2.set_ylabel("SSIM")
    ax2.legend(fontsize=8)
    fig.suptitle(f"sigma = {report.sigma}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_ablation_figure(rows: Sequence[dict], path: str) -> None:
    """Grouped bars of held-out PSNR per ablation variant."""
    labels = [r["variant"] for r in rows]
    values = [r["psnr_db"] for r in rows]
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(rows)), 4))
    ax.bar(range(len(rows)), values, color="tab:purple")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("held-out PSNR (dB)")
    lo = min(values)
    hi = max(values)
    pad = max(0.5, 0.1 * (hi - lo))
    ax.set_ylim(lo - pad, hi + pad)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
