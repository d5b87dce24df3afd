"""Desk-scale ablation grids: module on/off, kernel kinds, frequency-branch
variant. One runner keeps every variant on the identical data and schedule."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Sequence

from .data import CorpusSpec, generate_corpus, make_pair
from .metrics import evaluate
from .network import NetworkConfig, build
from .train import TrainConfig, train_loop


@dataclass
class AblationRow:
    grid: str
    variant: str
    psnr_db: float
    ssim: float
    final_loss: float


def _module_variants(base: NetworkConfig):
    return [
        ("baseline", replace(base, use_structure=False, use_frequency=False)),
        ("+structure", replace(base, use_structure=True, use_frequency=False)),
        ("+spectral", replace(base, use_structure=False, use_frequency=True)),
        ("+structure+spectral", replace(base, use_structure=True, use_frequency=True)),
    ]


def _kinds_variants(base: NetworkConfig):
    return [(f"kinds={k}", replace(base, kernel_kinds=k)) for k in (2, 4, 8)]


def _freq_variants(base: NetworkConfig):
    return [(f"freq={v}", replace(base, freq_variant=v))
            for v in ("simplified", "complex")]


def run_ablation(base_config: NetworkConfig, train_cfg: TrainConfig,
                 sigma: float = 25.0, train_count: int = 8, eval_count: int = 4,
                 image_size: int = 48, seed: int = 0,
                 grids: Sequence[str] = ("modules", "kinds", "freq"),
                 log=print) -> List[AblationRow]:
    """Train every grid variant on a shared synthetic corpus and score on a
    held-out split. Desk-scale results are reported, not asserted."""
    spec = CorpusSpec(count=train_count + eval_count, size=image_size,
                      pitch=8, line_width=1, seed=seed)
    images = generate_corpus(spec)
    pairs = [make_pair(img, sigma, seed=seed * 100003 + i)
             for i, img in enumerate(images)]
    train_pairs = pairs[:train_count]
    eval_pairs = pairs[train_count:]

    variants = []
    if "modules" in grids:
        variants += [("modules", n, c) for n, c in _module_variants(base_config)]
    if "kinds" in grids:
        variants += [("kinds", n, c) for n, c in _kinds_variants(base_config)]
    if "freq" in grids:
        variants += [("freq", n, c) for n, c in _freq_variants(base_config)]

    rows: List[AblationRow] = []
    for grid, name, cfg in variants:
        model = build(cfg, seed=seed)
        records = train_loop(model, train_pairs, train_cfg)
        report = evaluate(model, eval_pairs, sigma)
        rows.append(AblationRow(grid=grid, variant=name,
                                psnr_db=report.mean_psnr, ssim=report.mean_ssim,
                                final_loss=records[-1].loss))
        if log is not None:
            log(f"[{grid}] {name}: psnr={report.mean_psnr:.3f} dB "
                f"ssim={report.mean_ssim:.4f} final_loss={records[-1].loss:.3f}")
    return rows


def rows_to_tsv(rows: Sequence[AblationRow]) -> str:
    lines = ["grid\tvariant\tpsnr_db\tssim\tfinal_loss"]
    for r in rows:
        lines.append(f"{r.grid}\t{r.variant}\t{r.psnr_db:.4f}\t{r.ssim:.5f}\t{r.final_loss:.4f}")
    return "\n".join(lines) + "\n"
