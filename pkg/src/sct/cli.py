"""Command-line interface: run one trial, sweep rates, or emit the
three-way comparison artifacts."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from typing import List, Optional

from .config import load_config
from .experiments import (run_fig5_comparison, run_rd_sweep, write_comparison,
                          write_sweep_csv)
from .pipeline import run_trial


def _parse_rates(text: str) -> List[float]:
    try:
        rates = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad rate list {text!r}") from None
    if not rates or any(r <= 0 for r in rates):
        raise argparse.ArgumentTypeError("rates must be positive numbers")
    return rates


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sct",
        description="Semantic coded transmission simulator: semantics-guided "
                    "source-channel coding of images over noisy OFDM "
                    "channels.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a single trial and print metrics")
    run_p.add_argument("--config", required=True, help="key = value file")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override trial.seed")

    sweep_p = sub.add_parser("sweep", help="rate sweep over all chains")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--rates", type=_parse_rates,
                         default=[0.05, 0.1, 0.2, 0.4],
                         help="comma-separated rate list")
    sweep_p.add_argument("--trials", type=int, default=100)
    sweep_p.add_argument("--out", required=True, help="output CSV path")

    fig5_p = sub.add_parser(
        "fig5", help="baseline vs semantic comparison images + CSV")
    fig5_p.add_argument("--config", required=True)
    fig5_p.add_argument("--out-dir", required=True)
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    result = run_trial(cfg)
    rep = result.report
    print(f"chain = {cfg.chain}")
    print(f"mode = {rep.mode if rep.mode is not None else 'na'}")
    print(f"psnr = {rep.psnr:.4f}")
    print(f"mse = {rep.mse:.6g}")
    print(f"weighted_mse = {rep.weighted_mse:.6g}")
    for label in sorted(rep.per_label_psnr):
        print(f"per_label_psnr.{label} = {rep.per_label_psnr[label]:.4f}")
    print(f"mask_fraction = {rep.mask_fraction:.6g}")
    print(f"symbols_used = {rep.symbols_used}")
    print(f"side_info_symbols = {rep.side_info_symbols}")
    print(f"budget = {result.budget}")
    print(f"flags = {','.join(rep.flags) if rep.flags else 'none'}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    rows = run_rd_sweep(cfg, args.rates, args.trials)
    write_sweep_csv(rows, args.out)
    print(f"wrote {args.out}")
    from .figures import save_rd_figure
    png = os.path.splitext(args.out)[0] + ".png"
    save_rd_figure(rows, png)
    print(f"wrote {png}")
    return 0


def _cmd_fig5(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    result = run_fig5_comparison(cfg)
    paths = write_comparison(result, args.out_dir)
    from .figures import save_comparison_panel
    png = os.path.join(args.out_dir, "comparison.png")
    save_comparison_panel(result, png)
    paths.append(png)
    for path in paths:
        print(f"wrote {path}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "sweep": _cmd_sweep, "fig5": _cmd_fig5}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
