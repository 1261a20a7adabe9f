"""End-to-end training with randomized SNR and sampling ratio.

Every source of randomness in an epoch is derived from ``(seed, epoch)``, so a
run interrupted at an epoch boundary resumes to exactly the parameters an
uninterrupted run would have produced.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
import torch

from .checkpoint import code_version, save_checkpoint
from .config import ExperimentConfig, apply_variant
from .errors import ConfigError, TrainingError
from .imaging import ImageFolder
from .metrics import batch_psnr
from .pipeline import AdaptiveJSSCC

logger = logging.getLogger(__name__)

LOG_FIELDS = ("epoch", "lr", "loss", "train_psnr", "val_psnr", "best_val_psnr")


def set_deterministic(seed: int) -> None:
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)


def draw_conditions(cfg: ExperimentConfig, generator: torch.Generator) -> tuple[float, float, int]:
    """Sample ``(snr_db, ratio, q)`` for one batch."""
    u = torch.rand((), generator=generator, dtype=torch.float64).item()
    if cfg.fixed_snr is not None:
        mu = float(cfg.fixed_snr)
    else:
        mu = cfg.snr_low + (cfg.snr_high - cfg.snr_low) * u
    n = cfg.model.n
    if cfg.ratio is not None:
        return mu, float(cfg.ratio), int(round(cfg.ratio * n))
    q = int(torch.randint(cfg.q_min, cfg.q_upper + 1, (), generator=generator).item())
    return mu, q / n, q


def batch_loss(s: torch.Tensor, s_hat: torch.Tensor, blocks: int, n: int) -> torch.Tensor:
    """Squared error summed over the batch, divided by ``l * N * N_b``."""
    return (s_hat - s).square().sum() / (blocks * n * s.shape[0])


def train_step(
    model: AdaptiveJSSCC,
    batch: torch.Tensor,
    cfg: ExperimentConfig,
    optimizer: torch.optim.Optimizer | None,
    generator: torch.Generator,
    dump_dir: str | Path | None = None,
) -> tuple[float, float]:
    """One optimizer step on all trainable parameters. Returns ``(loss, psnr)``."""
    mu, ratio, q = draw_conditions(cfg, generator)
    out = model(batch, ratio, mu, generator=generator)
    loss = batch_loss(batch, out.s_hat, model.cfg.blocks, model.cfg.n)
    if not torch.isfinite(loss):
        msg = f"non-finite loss {loss.item()} at snr={mu:.3f} dB, q={q}"
        if dump_dir is not None:
            path = Path(dump_dir) / "nonfinite_dump.pt"
            torch.save({"batch": batch, "snr_db": mu, "q": q, "ratio": ratio}, path)
            msg += f"; inputs dumped to {path}"
        raise TrainingError(msg)
    if optimizer is not None:
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        optimizer.step()
    psnr = float(np.mean(batch_psnr(batch, out.s_hat)))
    return float(loss.item()), psnr


def epoch_batches(folder: ImageFolder, cfg: ExperimentConfig, epoch: int) -> Iterator[torch.Tensor]:
    steps = cfg.steps_per_epoch
    n_pass = 0
    produced = 0
    while True:
        sub_epoch = epoch * 10_000 + n_pass
        got = 0
        for b in folder.batches(cfg.batch_size, augment=cfg.augment, seed=cfg.seed, epoch=sub_epoch,
                                shuffle=True, drop_last=len(folder) >= cfg.batch_size):
            yield b.data
            produced += 1
            got += 1
            if steps is not None and produced >= steps:
                return
        if steps is None or got == 0:
            return
        n_pass += 1


@torch.no_grad()
def validate(model: AdaptiveJSSCC, images: torch.Tensor, cfg: ExperimentConfig) -> float:
    model.eval()
    mu = cfg.fixed_snr if cfg.fixed_snr is not None else 0.5 * (cfg.snr_low + cfg.snr_high)
    out = model(images, cfg.val_ratio, mu, seed=cfg.seed + 1)
    model.train()
    return float(np.mean(batch_psnr(images, out.s_hat)))


@dataclass
class RunResult:
    checkpoint: Path
    last_checkpoint: Path
    log: list[dict]
    best_val_psnr: float


def _write_logs(out: Path, rows: list[dict]) -> None:
    with open(out / "log.jsonl", "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    with open(out / "log.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LOG_FIELDS)
        w.writeheader()
        w.writerows(rows)


def build_model(cfg: ExperimentConfig) -> AdaptiveJSSCC:
    torch.manual_seed(cfg.seed)
    return AdaptiveJSSCC(cfg.model)


def build_ablation(variant: str, cfg: ExperimentConfig, train_snr: float = 19.0) -> tuple[AdaptiveJSSCC, ExperimentConfig]:
    """Model and training config for one of the four named variants."""
    vcfg = apply_variant(cfg, variant, train_snr)
    return build_model(vcfg), vcfg


def train_run(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    resume: bool = True,
    stop_after: int | None = None,
    train_images: ImageFolder | None = None,
) -> RunResult:
    """Train for ``cfg.epochs`` epochs, keeping the best-validation checkpoint.

    ``stop_after`` ends this invocation after that many epochs in total
    (used to simulate an interrupted run); a later call resumes from
    ``last.pt`` in ``out_dir``.
    """
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.deterministic:
        set_deterministic(cfg.seed)
    folder = train_images
    if folder is None:
        if cfg.train_dir is None:
            raise ConfigError("train_dir is not set")
        folder = ImageFolder(cfg.train_dir, cfg.model.image_size, cfg.grayscale)
    if cfg.val_dir:
        val_images = ImageFolder(cfg.val_dir, cfg.model.image_size, cfg.grayscale).tensor()
    else:
        val_images = folder.tensor()[: cfg.val_images]

    cfg.save(out / "config.json")
    model = build_model(cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr_at(0))
    rows: list[dict] = []
    best = -math.inf
    start_epoch = 0
    last_path = out / "last.pt"
    best_path = out / "best.safetensors"
    if resume and last_path.exists():
        state = torch.load(last_path, weights_only=False)
        if state["config_hash"] != cfg.config_hash():
            raise ConfigError(f"{last_path} belongs to a different configuration")
        model.load_state_dict(state["model"])
        optimizer.load_state_dict(state["optimizer"])
        rows, best, start_epoch = state["log"], state["best"], state["epoch"] + 1
        logger.info("resuming %s at epoch %d", out, start_epoch)

    meta = {"seed": str(cfg.seed), "config_hash": cfg.config_hash(), "variant": cfg.variant}
    end_epoch = cfg.epochs if stop_after is None else min(cfg.epochs, stop_after)
    model.train()
    for epoch in range(start_epoch, end_epoch):
        lr = cfg.lr_at(epoch)
        for group in optimizer.param_groups:
            group["lr"] = lr
        gen = torch.Generator().manual_seed(int(np.random.SeedSequence([cfg.seed, epoch]).generate_state(1)[0]))
        losses, psnrs = [], []
        for batch in epoch_batches(folder, cfg, epoch):
            loss, p = train_step(model, batch, cfg, optimizer, gen, dump_dir=out)
            losses.append(loss)
            psnrs.append(p)
        val = validate(model, val_images, cfg)
        if val > best:
            best = val
            save_checkpoint(best_path, model, **meta, epoch=str(epoch), val_psnr=repr(val))
        row = {
            "epoch": epoch,
            "lr": lr,
            "loss": float(np.mean(losses)) if losses else float("nan"),
            "train_psnr": float(np.mean(psnrs)) if psnrs else float("nan"),
            "val_psnr": val,
            "best_val_psnr": best,
        }
        rows.append(row)
        logger.info("epoch %d lr %.1e loss %.5f train %.2f dB val %.2f dB", epoch, lr, row["loss"], row["train_psnr"], val)
        torch.save(
            {"model": model.state_dict(), "optimizer": optimizer.state_dict(), "epoch": epoch,
             "best": best, "log": rows, "config_hash": cfg.config_hash(), "code_version": code_version()},
            last_path,
        )
        _write_logs(out, rows)

    if not best_path.exists():
        save_checkpoint(best_path, model, **meta, epoch="-1", val_psnr="nan")
    final_path = out / "final.safetensors"
    save_checkpoint(final_path, model, **meta, epoch=str(end_epoch - 1))
    return RunResult(checkpoint=best_path, last_checkpoint=final_path, log=rows, best_val_psnr=best)
