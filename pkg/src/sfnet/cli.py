"""Command-line front door.

Subcommands: synth, train, denoise, eval, gradcheck, macs, ablate.
Option precedence: built-in defaults, then a ``key = value`` config file
(--config), then explicit flags. Every run echoes its fully resolved
configuration as ``key = value`` lines before acting; that echo is itself a
valid config file for reproducing the run. Report paths write matplotlib
figures next to their delimited text output.

Exit codes: 0 success, 1 usage/configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .ablate import rows_to_tsv, run_ablation
from .checkpoint import load_checkpoint
from .data import (CorpusSpec, ImagePair, generate_corpus, load_pgm, make_pair,
                   read_manifest, save_pgm, write_manifest)
from .errors import (CheckpointError, ConfigError, FormatError, NumericError,
                     ShapeError, UsageError)
from .metrics import evaluate, measure_runtime_ms
from .network import NetworkConfig, build, count_macs
from .plots import save_ablation_figure, save_eval_figure, save_loss_curve
from .train import TrainConfig, train_loop, write_loss_log
from .verify import MODES, gradcheck_all


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageExit(message)


class _UsageExit(Exception):
    pass


def parse_config_file(path: str) -> Dict[str, str]:
    """Line-oriented ``key = value``; '#' starts a comment."""
    values: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


_NETWORK_KEYS = {
    "width": int,
    "enc_blocks": str,
    "mid_blocks": int,
    "dec_blocks": str,
    "kernel_kinds": int,
    "freq_variant": str,
    "in_channels": int,
    "use_structure": int,
    "use_frequency": int,
}

_TRAIN_KEYS = {
    "iters": int,
    "lr0": float,
    "eta_min": float,
    "weight_decay": float,
    "batch": int,
    "crop": int,
    "sigma": float,
    "seed": int,
    "checkpoint_every": int,
}


def _resolve(defaults: Dict[str, object], file_values: Dict[str, str],
             flag_values: Dict[str, object], types: Dict[str, type]) -> Dict[str, object]:
    resolved = dict(defaults)
    for key, raw in file_values.items():
        if key not in resolved:
            raise ConfigError(f"unknown config key {key!r}")
        resolved[key] = types.get(key, str)(raw)
    for key, val in flag_values.items():
        if val is not None:
            resolved[key] = val
    return resolved


def _echo_config(resolved: Dict[str, object]) -> None:
    print("# resolved configuration")
    for key in sorted(resolved):
        print(f"{key} = {resolved[key]}")


def _parse_blocks(text: str) -> tuple:
    try:
        return tuple(int(t) for t in str(text).replace(" ", "").split(","))
    except ValueError:
        raise ConfigError(f"bad block list {text!r}; expected e.g. 2,2,4,8") from None


def _network_config(resolved: Dict[str, object]) -> NetworkConfig:
    return NetworkConfig(
        width=int(resolved["width"]),
        enc_blocks=_parse_blocks(resolved["enc_blocks"]),
        mid_blocks=int(resolved["mid_blocks"]),
        dec_blocks=_parse_blocks(resolved["dec_blocks"]),
        kernel_kinds=int(resolved["kernel_kinds"]),
        freq_variant=str(resolved["freq_variant"]),
        in_channels=int(resolved["in_channels"]),
        use_structure=bool(int(resolved["use_structure"])),
        use_frequency=bool(int(resolved["use_frequency"])),
    )


def _add_network_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--width", type=int)
    p.add_argument("--enc-blocks", dest="enc_blocks")
    p.add_argument("--mid-blocks", dest="mid_blocks", type=int)
    p.add_argument("--dec-blocks", dest="dec_blocks")
    p.add_argument("--kernel-kinds", dest="kernel_kinds", type=int, choices=(2, 4, 8))
    p.add_argument("--freq-variant", dest="freq_variant", choices=("simplified", "complex"))
    p.add_argument("--in-channels", dest="in_channels", type=int)
    p.add_argument("--use-structure", dest="use_structure", type=int, choices=(0, 1))
    p.add_argument("--use-frequency", dest="use_frequency", type=int, choices=(0, 1))


_NETWORK_DEFAULTS = {
    "width": 64, "enc_blocks": "2,2,4,8", "mid_blocks": 12, "dec_blocks": "2,2,2,2",
    "kernel_kinds": 4, "freq_variant": "simplified", "in_channels": 1,
    "use_structure": 1, "use_frequency": 1,
}

_TRAIN_DEFAULTS = {
    "iters": 5000, "lr0": 1e-3, "eta_min": 1e-7, "weight_decay": 0.0,
    "batch": 4, "crop": 64, "sigma": 25.0, "seed": 0, "checkpoint_every": 1000,
}


def _load_pairs(manifest_path: str, sigma: float) -> List[ImagePair]:
    pairs = []
    for _, path, seed in read_manifest(manifest_path):
        pairs.append(make_pair(load_pgm(path), sigma, seed))
    return pairs


def build_parser() -> _Parser:
    parser = _Parser(prog="sfnet", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="generate a synthetic panel-grid corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config")
    p.add_argument("--count", type=int)
    p.add_argument("--size", type=int)
    p.add_argument("--pitch", type=int)
    p.add_argument("--line-width", dest="line_width", type=int)
    p.add_argument("--illum-lo", dest="illum_lo", type=float)
    p.add_argument("--illum-hi", dest="illum_hi", type=float)
    p.add_argument("--star-density", dest="star_density", type=float)
    p.add_argument("--seed", type=int)

    p = subs.add_parser("train", help="train a model on a corpus manifest")
    p.add_argument("--data", required=True, help="corpus manifest file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config")
    _add_network_flags(p)
    p.add_argument("--iters", type=int)
    p.add_argument("--lr0", type=float)
    p.add_argument("--eta-min", dest="eta_min", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--crop", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)

    p = subs.add_parser("denoise", help="denoise a PGM image with a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)

    p = subs.add_parser("eval", help="evaluate a checkpoint on a corpus manifest")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--sigma", type=float, default=25.0)
    p.add_argument("--runtime", action="store_true",
                   help="also measure median forward wallclock on 256x256")

    p = subs.add_parser("gradcheck", help="finite-difference check of every op")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("f32", "f64", "both"), default="both")
    p.add_argument("--max-coords", dest="max_coords", type=int, default=12)

    p = subs.add_parser("macs", help="per-block multiply-accumulate table")
    p.add_argument("--config")
    _add_network_flags(p)
    p.add_argument("--size", type=int, default=256)

    p = subs.add_parser("ablate", help="run the desk-scale ablation grids")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config")
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--sigma", type=float, default=25.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=8)
    p.add_argument("--image-size", dest="image_size", type=int, default=48)
    p.add_argument("--grids", default="modules,kinds,freq",
                   help="comma subset of modules,kinds,freq")
    return parser


def _cmd_synth(args) -> int:
    file_values = parse_config_file(args.config) if args.config else {}
    defaults = {"count": 16, "size": 64, "pitch": 8, "line_width": 1,
                "illum_lo": 0.2, "illum_hi": 1.0, "star_density": 0.0005, "seed": 0}
    types = {"count": int, "size": int, "pitch": int, "line_width": int,
             "illum_lo": float, "illum_hi": float, "star_density": float, "seed": int}
    flags = {k: getattr(args, k) for k in defaults}
    resolved = _resolve(defaults, file_values, flags, types)
    resolved["out"] = args.out
    _echo_config(resolved)
    spec = CorpusSpec(count=int(resolved["count"]), size=int(resolved["size"]),
                      pitch=int(resolved["pitch"]), line_width=int(resolved["line_width"]),
                      illumination=(float(resolved["illum_lo"]), float(resolved["illum_hi"])),
                      star_density=float(resolved["star_density"]), seed=int(resolved["seed"]))
    os.makedirs(args.out, exist_ok=True)
    images = generate_corpus(spec)
    entries = []
    for i, img in enumerate(images):
        name = f"img_{i:05d}.pgm"
        save_pgm(img, os.path.join(args.out, name))
        entries.append((i, name, int(resolved["seed"]) * 100003 + i))
    write_manifest(os.path.join(args.out, "manifest.tsv"), entries)
    print(f"wrote {len(images)} images + manifest.tsv to {args.out}")
    return 0


def _cmd_train(args) -> int:
    file_values = parse_config_file(args.config) if args.config else {}
    defaults = dict(_NETWORK_DEFAULTS, **_TRAIN_DEFAULTS)
    types = dict(_NETWORK_KEYS, **_TRAIN_KEYS)
    flags = {k: getattr(args, k) for k in defaults}
    resolved = _resolve(defaults, file_values, flags, types)
    _echo_config(resolved)
    net_cfg = _network_config(resolved)
    train_cfg = TrainConfig(total_iters=int(resolved["iters"]), lr0=float(resolved["lr0"]),
                            eta_min=float(resolved["eta_min"]),
                            weight_decay=float(resolved["weight_decay"]),
                            batch=int(resolved["batch"]), crop=int(resolved["crop"]),
                            seed=int(resolved["seed"]),
                            checkpoint_every=int(resolved["checkpoint_every"]))
    pairs = _load_pairs(args.data, float(resolved["sigma"]))
    os.makedirs(args.out, exist_ok=True)
    model = build(net_cfg, seed=train_cfg.seed)
    ckpt_path = os.path.join(args.out, "checkpoint.bin")

    def sink(rec):
        if rec.iteration % 100 == 0 or rec.iteration == train_cfg.total_iters - 1:
            print(f"iter {rec.iteration}: lr={rec.lr:.3e} loss={rec.loss:.4f}")

    records = train_loop(model, pairs, train_cfg, log_sink=sink,
                         checkpoint_path=ckpt_path)
    write_loss_log(os.path.join(args.out, "loss_log.tsv"), records)
    save_loss_curve(records, os.path.join(args.out, "loss_curve.png"))
    print(f"wrote checkpoint.bin, loss_log.tsv, loss_curve.png to {args.out}")
    return 0


def _cmd_denoise(args) -> int:
    _echo_config({"ckpt": args.ckpt, "in": args.input, "out": args.out})
    model, _, _, _ = load_checkpoint(args.ckpt)
    img = load_pgm(args.input)
    out = model(img)
    out.data = np.clip(out.data, 0.0, 1.0)
    save_pgm(out, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_eval(args) -> int:
    _echo_config({"ckpt": args.ckpt, "data": args.data, "out": args.out,
                  "sigma": args.sigma})
    model, _, _, _ = load_checkpoint(args.ckpt)
    pairs = _load_pairs(args.data, args.sigma)
    report = evaluate(model, pairs, args.sigma)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    with open(os.path.join(args.out, "report.kv"), "w", encoding="utf-8") as fh:
        fh.write(report.to_kv())
    save_eval_figure(report, os.path.join(args.out, "report.png"))
    print(report.to_text(), end="")
    if args.runtime:
        print(f"median 256x256 forward: {measure_runtime_ms(model):.2f} ms")
    print(f"wrote report.txt, report.kv, report.png to {args.out}")
    return 0


def _cmd_gradcheck(args) -> int:
    _echo_config({"seed": args.seed, "mode": args.mode, "max_coords": args.max_coords})
    modes = ("f32", "f64") if args.mode == "both" else (args.mode,)
    all_ok = True
    for mode in modes:
        results = gradcheck_all(args.seed, mode=mode, max_coords=args.max_coords)
        print(f"-- {mode} (tolerance {MODES[mode]['tol']:g}) --")
        for r in results:
            status = "PASS" if r.passed else "FAIL"
            print(f"{status}  {r.name:<34} max_rel_err={r.max_rel_err:.3e}")
            all_ok = all_ok and r.passed
    return 0 if all_ok else 2


def _cmd_macs(args) -> int:
    file_values = parse_config_file(args.config) if args.config else {}
    flags = {k: getattr(args, k) for k in _NETWORK_DEFAULTS}
    resolved = _resolve(dict(_NETWORK_DEFAULTS), file_values, flags, _NETWORK_KEYS)
    resolved["size"] = args.size
    _echo_config(resolved)
    cfg = _network_config(resolved)
    total, rows = count_macs(cfg, args.size, args.size)
    print(f"{'block':<16} {'macs':>16}")
    for name, macs in rows:
        print(f"{name:<16} {macs:>16}")
    print(f"{'total':<16} {total:>16}  ({total / 1e9:.2f}G)")
    return 0


def _cmd_ablate(args) -> int:
    grids = tuple(g for g in args.grids.split(",") if g)
    for g in grids:
        if g not in ("modules", "kinds", "freq"):
            raise ConfigError(f"unknown grid {g!r}")
    _echo_config({"out": args.out, "iters": args.iters, "sigma": args.sigma,
                  "seed": args.seed, "width": args.width,
                  "image_size": args.image_size, "grids": ",".join(grids)})
    base = NetworkConfig(width=args.width, enc_blocks=(1, 1), mid_blocks=1,
                         dec_blocks=(1, 1))
    train_cfg = TrainConfig(total_iters=args.iters, crop=min(args.image_size, 48),
                            batch=2, seed=args.seed, checkpoint_every=0)
    rows = run_ablation(base, train_cfg, sigma=args.sigma, seed=args.seed,
                        image_size=args.image_size, grids=grids)
    os.makedirs(args.out, exist_ok=True)
    tsv = rows_to_tsv(rows)
    with open(os.path.join(args.out, "ablation.tsv"), "w", encoding="utf-8") as fh:
        fh.write(tsv)
    save_ablation_figure([r.__dict__ for r in rows],
                         os.path.join(args.out, "ablation.png"))
    print(tsv, end="")
    print(f"wrote ablation.tsv, ablation.png to {args.out}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "denoise": _cmd_denoise,
    "eval": _cmd_eval,
    "gradcheck": _cmd_gradcheck,
    "macs": _cmd_macs,
    "ablate": _cmd_ablate,
}


def run_cli(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, UsageError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ShapeError, FormatError, NumericError, CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
