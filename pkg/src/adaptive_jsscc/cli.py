"""Command line entry point: ``ajsscc {train,eval,ablate,report}``.

The output root is ``--out`` if given, else ``$AJSSCC_OUT``, else the
config's ``out_dir``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .checkpoint import code_version, load_checkpoint, read_metadata
from .config import VARIANTS, ExperimentConfig, apply_variant, preset_config
from .errors import ConfigError, FingerprintError
from .evaluation import (
    EvalReport,
    degradation,
    format_table,
    load_models,
    memory_report,
    plot_ratio_sweep,
    plot_snr_sweep,
    ratio_table,
    read_csv,
    sweep_ratio,
    sweep_snr,
)
from .imaging import ImageFolder
from .training import train_run

logger = logging.getLogger("adaptive_jsscc")

OUT_ENV = "AJSSCC_OUT"


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.load(args.config, preset=args.preset)
    else:
        cfg = preset_config(args.preset or "desk")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    out = args.out or os.environ.get(OUT_ENV)
    if out:
        changes["out_dir"] = out
    return cfg.replace(**changes) if changes else cfg


def _stamp(report: EvalReport, cfg: ExperimentConfig | None) -> EvalReport:
    report.meta["code_version"] = code_version()
    if cfg is not None:
        report.meta["config_hash"] = cfg.config_hash()
        report.meta["seed"] = cfg.seed
    for row in report.rows:
        row["config_hash"] = report.meta.get("config_hash", "")
        row["code_version"] = report.meta["code_version"]
    return report


def _write_report(report: EvalReport, out: Path, stem: str) -> None:
    report.to_csv(out / f"{stem}.csv")
    report.to_json(out / f"{stem}.json")


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    out = Path(cfg.out_dir)
    result = train_run(cfg, out)
    print(f"trained {cfg.variant}: best validation PSNR {result.best_val_psnr:.2f} dB -> {result.checkpoint}")
    return 0


def _load_images(path: str | None, cfg: ExperimentConfig):
    if not path:
        raise ConfigError("no evaluation dataset given (--data or test_dir)")
    return ImageFolder(path, cfg.model.image_size, cfg.grayscale).tensor()


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    checkpoints = {}
    for spec in args.checkpoint:
        name, _, path = spec.rpartition("=")
        checkpoints[name or Path(path).parent.name or Path(path).stem] = path
    if args.config:
        for name, path in checkpoints.items():
            if Path(path).exists() and read_metadata(path)["fingerprint"] != cfg.model.fingerprint():
                raise FingerprintError(f"checkpoint {name} ({path}) does not match the configured model")
    models = load_models(checkpoints)
    if not models:
        raise ConfigError("none of the given checkpoints could be loaded")
    images = _load_images(args.data or cfg.test_dir, cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset = Path(args.data or cfg.test_dir).name
    snr_grid = args.snr_grid or cfg.snr_grid
    ratio_grid = args.ratio_grid or cfg.ratio_grid

    snr_rep = _stamp(sweep_snr(models, snr_grid, images, cfg.eval_ratio, cfg.seed, dataset), cfg)
    _write_report(snr_rep, out, "snr_sweep")
    plot_snr_sweep(out / "snr_sweep.csv", out / "snr_sweep.png")
    ratio_rep = _stamp(sweep_ratio(models, ratio_grid, images, cfg.eval_snr, cfg.seed, dataset), cfg)
    _write_report(ratio_rep, out, "ratio_sweep")
    plot_ratio_sweep(out / "ratio_sweep.csv", out / "ratio_sweep.png")
    table = ratio_table(ratio_rep)
    EvalReport(rows=table).to_csv(out / "ratio_table.csv")
    print(format_table(table))
    if args.memory:
        zoos = {name: [name] for name in models}
        mem = memory_report(zoos, checkpoints, snr_rep)
        EvalReport(rows=mem).to_csv(out / "memory.csv")
        print(format_table(mem))
    return 0


def _train_variant(cfg: ExperimentConfig, out: Path) -> Path:
    ckpt = out / "best.safetensors"
    if ckpt.exists() and read_metadata(ckpt).get("config_hash") == cfg.config_hash():
        logger.info("using cached checkpoint %s", ckpt)
        return ckpt
    return train_run(cfg, out).checkpoint


def cmd_ablate(args: argparse.Namespace) -> int:
    base = _resolve_config(args)
    root = Path(base.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    checkpoints, cfgs = {}, {}
    for variant in VARIANTS:
        vcfg = apply_variant(base, variant)
        cfgs[variant] = vcfg
        checkpoints[variant] = _train_variant(vcfg, root / variant)
    models = {name: load_checkpoint(path) for name, path in checkpoints.items()}
    images = _load_images(args.data or base.test_dir, base)
    dataset = Path(args.data or base.test_dir).name
    snr_rep = _stamp(sweep_snr(models, base.snr_grid, images, base.eval_ratio, base.seed, dataset), base)
    _write_report(snr_rep, root, "snr_sweep")
    drops = degradation(snr_rep)
    rows = []
    for variant in VARIANTS:
        vals = snr_rep.select(variant=variant)
        counterpart = {"Adaptive-JSSCC": "Adaptive-JSCC", "JSSCC": "JSCC"}.get(variant)
        mean_psnr = float(np.mean([r["psnr"] for r in vals]))
        delta = ""
        if counterpart:
            delta = mean_psnr - float(np.mean([r["psnr"] for r in snr_rep.select(variant=counterpart)]))
        rows.append({
            "variant": variant,
            "semantic": cfgs[variant].model.semantic,
            "acam": cfgs[variant].model.use_acam,
            "train_snr": "uniform[%g,%g]" % (base.snr_low, base.snr_high)
            if cfgs[variant].fixed_snr is None else "%g" % cfgs[variant].fixed_snr,
            "mean_psnr": mean_psnr,
            "mean_ssim": float(np.mean([r["ssim"] for r in vals])),
            "worst_drop": drops[variant],
            "semantic_vs_uniform_delta": delta,
        })
    report = _stamp(EvalReport(rows=rows, meta={"sweep": "ablation"}), base)
    _write_report(report, root, "ablation")
    plot_snr_sweep(root / "snr_sweep.csv", root / "snr_sweep.png")
    print(format_table(rows))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    root = Path(args.out or os.environ.get(OUT_ENV) or ".")
    done = False
    for stem, plot in (("snr_sweep", plot_snr_sweep), ("ratio_sweep", plot_ratio_sweep)):
        csv_path = root / f"{stem}.csv"
        if csv_path.exists():
            plot(csv_path, root / f"{stem}.png")
            print(f"regenerated {root / (stem + '.png')}")
            done = True
    for stem in ("ratio_table", "ablation", "memory"):
        if (root / f"{stem}.csv").exists():
            print(format_table(read_csv(root / f"{stem}.csv")))
            done = True
    if not done:
        raise ConfigError(f"no report CSVs found in {root}")
    return 0


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ajsscc", description="Train, evaluate and compare the adaptive JSSCC simulator.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="flat JSON config file")
        p.add_argument("--preset", choices=("full", "desk"))
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or config out_dir)")

    p = sub.add_parser("train", help="train one variant")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="SNR and ratio sweeps for trained checkpoints")
    common(p)
    p.add_argument("--checkpoint", action="append", required=True, help="[name=]path, repeatable")
    p.add_argument("--data", help="evaluation image directory")
    p.add_argument("--snr-grid", type=_floats)
    p.add_argument("--ratio-grid", type=_floats)
    p.add_argument("--memory", action="store_true", help="also emit the memory table")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train/load the four ablation variants and compare them")
    common(p)
    p.add_argument("--data", help="evaluation image directory")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="regenerate plots and tables from report CSVs")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FingerprintError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
