"""Experiment configuration: one flat key/value mapping, stored as JSON.

Model architecture keys (see :class:`ModelConfig`) sit at the top level next
to the training and evaluation keys; unknown keys are rejected by name.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .pipeline import ModelConfig

VARIANTS = ("Adaptive-JSSCC", "Adaptive-JSCC", "JSSCC", "JSCC")


@dataclass
class ExperimentConfig:
    preset: str = "desk"
    variant: str = "Adaptive-JSSCC"
    train_dir: str | None = None
    val_dir: str | None = None
    test_dir: str | None = None
    out_dir: str = "runs"
    epochs: int = 30
    lr_schedule: list[list[float]] = field(default_factory=lambda: [[0, 1e-3], [20, 1e-4], [26, 1e-5]])
    batch_size: int = 8
    steps_per_epoch: int | None = 20
    snr_low: float = 0.0
    snr_high: float = 20.0
    fixed_snr: float | None = None
    ratio: float | None = None
    q_min: int = 1
    q_max: int | None = None
    seed: int = 0
    augment: bool = True
    grayscale: bool = True
    deterministic: bool = True
    val_images: int = 8
    val_ratio: float = 0.5
    snr_grid: list[float] = field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0])
    ratio_grid: list[float] = field(default_factory=lambda: [0.01, 0.04, 0.10, 0.30, 0.40, 0.50])
    eval_snr: float = 15.0
    eval_ratio: float = 0.5
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.snr_low > self.snr_high:
            raise ConfigError(f"snr_low {self.snr_low} exceeds snr_high {self.snr_high}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")

    @property
    def q_upper(self) -> int:
        return self.model.n if self.q_max is None else self.q_max

    def lr_at(self, epoch: int) -> float:
        rate = self.lr_schedule[0][1]
        for start, lr in self.lr_schedule:
            if epoch >= start:
                rate = lr
        return float(rate)

    def to_flat(self) -> dict[str, Any]:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "model"}
        d.update(self.model.to_dict())
        return d

    @classmethod
    def from_flat(cls, flat: dict[str, Any]) -> "ExperimentConfig":
        own = {f.name for f in dataclasses.fields(cls)} - {"model"}
        model_keys = {f.name for f in dataclasses.fields(ModelConfig)}
        unknown = set(flat) - own - model_keys
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        model = ModelConfig(**{k: v for k, v in flat.items() if k in model_keys})
        return cls(model=model, **{k: v for k, v in flat.items() if k in own})

    def replace(self, **changes: Any) -> "ExperimentConfig":
        flat = self.to_flat()
        flat.update(changes)
        return ExperimentConfig.from_flat(flat)

    def config_hash(self) -> str:
        """Hash of everything that affects results; the output location does not."""
        flat = {k: v for k, v in self.to_flat().items() if k != "out_dir"}
        blob = json.dumps(flat, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_flat(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path, **overrides: Any) -> "ExperimentConfig":
        flat = json.loads(Path(path).read_text())
        preset = overrides.pop("preset", None) or flat.get("preset")
        base = preset_config(preset).to_flat() if preset else {}
        base.update(flat)
        base.update({k: v for k, v in overrides.items() if v is not None})
        if preset:
            base["preset"] = preset
        return cls.from_flat(base)


def preset_config(name: str) -> ExperimentConfig:
    if name == "full":
        return ExperimentConfig(
            preset="full",
            epochs=300,
            lr_schedule=[[0, 1e-4], [200, 1e-5], [260, 1e-6]],
            batch_size=16,
            steps_per_epoch=None,
            snr_low=0.0,
            snr_high=20.0,
            q_min=1,
            model=ModelConfig(
                image_size=128,
                block_size=32,
                codec_widths=(32, 64),
                cbr="1/8",
                scan_width=16,
                extract_width=16,
                extract_channels=8,
                prox_width=32,
                n_iter=11,
            ),
        )
    if name == "desk":
        return ExperimentConfig(preset="desk")
    raise ConfigError(f"unknown preset {name!r}; expected 'full' or 'desk'")


def apply_variant(cfg: ExperimentConfig, variant: str, train_snr: float = 19.0) -> ExperimentConfig:
    """Switch the ablation knobs of ``cfg`` to one of the four named models.

    Fixed-SNR variants keep ``cfg.fixed_snr`` when set, else use ``train_snr``.
    """
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    adaptive = variant.startswith("Adaptive")
    semantic = variant.endswith("JSSCC")
    fixed = None if adaptive else (cfg.fixed_snr if cfg.fixed_snr is not None else train_snr)
    return cfg.replace(variant=variant, semantic=semantic, use_acam=adaptive, fixed_snr=fixed)
