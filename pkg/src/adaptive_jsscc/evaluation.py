"""SNR and sampling-ratio sweeps, semantic-vs-uniform comparisons, memory accounting."""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import torch

from .checkpoint import checkpoint_megabytes, load_checkpoint
from .errors import ConfigError
from .metrics import batch_psnr, batch_ssim
from .pipeline import AdaptiveJSSCC

logger = logging.getLogger(__name__)

TABLE_RATIOS = (0.01, 0.04, 0.10, 0.30, 0.40, 0.50)
MEMORY_SNR_GRID = (0.0, 5.0, 10.0, 15.0, 20.0)


@dataclass
class EvalReport:
    rows: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def extend(self, other: "EvalReport") -> "EvalReport":
        self.rows.extend(other.rows)
        self.meta.update(other.meta)
        return self

    def select(self, **match) -> list[dict]:
        return [r for r in self.rows if all(r.get(k) == v for k, v in match.items())]

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        fields: list[str] = []
        for row in self.rows:
            fields += [k for k in row if k not in fields]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            w.writerows(self.rows)
        return path

    def to_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps({"meta": self.meta, "rows": self.rows}, indent=2, sort_keys=True) + "\n")
        return path


@torch.no_grad()
def evaluate(
    model: AdaptiveJSSCC,
    images: torch.Tensor,
    ratio: float,
    snr_db: float,
    seed: int = 0,
    noiseless: bool = False,
    batch_size: int = 16,
) -> tuple[float, float]:
    """Mean PSNR (dB) and SSIM over ``images`` at one operating point."""
    model.eval()
    psnrs, ssims = [], []
    for i, start in enumerate(range(0, images.shape[0], batch_size)):
        s = images[start : start + batch_size]
        out = model(s, ratio, snr_db, seed=seed + i, noiseless=noiseless)
        psnrs.append(batch_psnr(s, out.s_hat))
        ssims.append(batch_ssim(s, out.s_hat))
    return float(np.concatenate(psnrs).mean()), float(np.concatenate(ssims).mean())


def _row(model: AdaptiveJSSCC, dataset: str, variant: str, ratio: float, snr: float, seed: int,
         psnr: float, ssim: float) -> dict:
    return {
        "dataset": dataset,
        "variant": variant,
        "ratio": ratio,
        "snr_db": snr,
        "cbr": str(model.cfg.encoder.achieved_cbr),
        "psnr": psnr,
        "ssim": ssim,
        "seed": seed,
        "fingerprint": model.cfg.fingerprint(),
    }


def load_models(checkpoints: Mapping[str, str | Path]) -> dict[str, AdaptiveJSSCC]:
    """Load named checkpoints, skipping (with a warning) any that are missing."""
    models = {}
    for name, path in checkpoints.items():
        if not Path(path).exists():
            warnings.warn(f"checkpoint for {name} not found at {path}; skipped", stacklevel=2)
            continue
        models[name] = load_checkpoint(path)
    return models


def sweep_snr(
    models: Mapping[str, AdaptiveJSSCC],
    snr_grid: Sequence[float],
    images: torch.Tensor,
    ratio: float = 0.5,
    seed: int = 0,
    dataset: str = "test",
    noiseless: bool = False,
) -> EvalReport:
    report = EvalReport(meta={"sweep": "snr", "snr_grid": list(snr_grid), "ratio": ratio, "seed": seed})
    for name, model in models.items():
        for snr in snr_grid:
            p, s = evaluate(model, images, ratio, snr, seed=seed, noiseless=noiseless)
            report.rows.append(_row(model, dataset, name, ratio, float(snr), seed, p, s))
    return report


def degradation(report: EvalReport) -> dict[str, float]:
    """Worst-case drop per variant: ``max over the grid of (best PSNR - PSNR)``."""
    out: dict[str, float] = {}
    for name in dict.fromkeys(r["variant"] for r in report.rows):
        vals = np.array([r["psnr"] for r in report.select(variant=name)])
        out[name] = float(vals.max() - vals.min())
    return out


def sweep_ratio(
    models: Mapping[str, AdaptiveJSSCC],
    ratio_grid: Sequence[float],
    images: torch.Tensor,
    snr_db: float = 15.0,
    seed: int = 0,
    dataset: str = "test",
) -> EvalReport:
    report = EvalReport(meta={"sweep": "ratio", "ratio_grid": list(ratio_grid), "snr_db": snr_db, "seed": seed})
    for name, model in models.items():
        for r in ratio_grid:
            try:
                p, s = evaluate(model, images, r, snr_db, seed=seed)
            except ConfigError as exc:
                warnings.warn(f"ratio {r} skipped for {name}: {exc}", stacklevel=2)
                continue
            report.rows.append(_row(model, dataset, name, float(r), float(snr_db), seed, p, s))
    return report


def ratio_table(report: EvalReport) -> list[dict]:
    """Rows shaped like a (testset, method, r=...) table of ``PSNR/SSIM`` cells."""
    table = []
    keys = dict.fromkeys((r["dataset"], r["variant"]) for r in report.rows)
    for dataset, variant in keys:
        row = {"testset": dataset, "method": variant}
        for r in report.select(dataset=dataset, variant=variant):
            row[f"r={r['ratio']:.2f}"] = f"{r['psnr']:.2f}/{r['ssim']:.4f}"
        table.append(row)
    return table


def format_table(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(dict.fromkeys(k for r in rows for k in r))
    widths = [max(len(c), *(len(str(r.get(c, ""))) for r in rows)) for c in cols]
    line = "  ".join(c.ljust(w) for c, w in zip(cols, widths))
    body = ["  ".join(str(r.get(c, "")).ljust(w) for c, w in zip(cols, widths)) for r in rows]
    return "\n".join([line, "-" * len(line), *body])


def compare_allocation(
    model: AdaptiveJSSCC, uniform_model: AdaptiveJSSCC, images: torch.Tensor,
    ratio: float, snr_db: float, seed: int = 0,
) -> dict[str, float]:
    """Mean PSNR of a semantic-allocation model against a uniform one, and the gap."""
    sem, _ = evaluate(model, images, ratio, snr_db, seed)
    uni, _ = evaluate(uniform_model, images, ratio, snr_db, seed)
    return {"semantic_psnr": sem, "uniform_psnr": uni, "delta": sem - uni}


def memory_report(
    zoos: Mapping[str, Iterable[str]],
    checkpoints: Mapping[str, str | Path],
    snr_report: EvalReport,
) -> list[dict]:
    """Storage and best-average PSNR for each model set.

    ``zoos`` maps a set name (e.g. ``"JSSCC-2"``) to member names. A set's size
    is the sum of its members' checkpoint files; its PSNR is the average over
    the SNR grid of the best member at each SNR.
    """
    rows = []
    for zoo, members in zoos.items():
        members = list(members)
        mb = sum(checkpoint_megabytes(checkpoints[m]) for m in members)
        snrs = sorted({r["snr_db"] for r in snr_report.rows if r["variant"] in members})
        best = [max(r["psnr"] for r in snr_report.select(snr_db=snr) if r["variant"] in members) for snr in snrs]
        rows.append({"models": zoo, "members": len(members), "megabytes": mb,
                     "psnr": float(np.mean(best)) if best else float("nan")})
    return rows


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_snr_sweep(csv_path: str | Path, png_path: str | Path) -> Path:
    """Render PSNR-vs-SNR curves from a sweep CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name in dict.fromkeys(r["variant"] for r in rows):
        pts = sorted((float(r["snr_db"]), float(r["psnr"])) for r in rows if r["variant"] == name)
        ax.plot(*zip(*pts), marker="o", label=name)
    ax.set_xlabel("test SNR (dB)")
    ax.set_ylabel("PSNR (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(png_path, metadata={"Software": None})
    plt.close(fig)
    return Path(png_path)


def plot_ratio_sweep(csv_path: str | Path, png_path: str | Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name in dict.fromkeys(r["variant"] for r in rows):
        pts = sorted((float(r["ratio"]), float(r["psnr"])) for r in rows if r["variant"] == name)
        ax.plot(*zip(*pts), marker="s", label=name)
    ax.set_xlabel("sampling ratio r")
    ax.set_ylabel("PSNR (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(png_path, metadata={"Software": None})
    plt.close(fig)
    return Path(png_path)
