"""End-to-end forward pass: sample -> encode -> AWGN -> decode -> reconstruct."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import torch
import torch.nn as nn

from .channel import awgn, normalize_power
from .codec import Decoder, Encoder, EncoderConfig
from .errors import ConfigError
from .imaging import check_geometry, fold, unfold
from .reconstruction import Reconstructor
from .sampling import (
    BaseMatrix,
    SamplingPlan,
    ScanningNetwork,
    align,
    allocate,
    measure,
    row_mask,
    total_budget,
    uniform_saliency,
)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture knobs. Everything here is part of the checkpoint fingerprint."""

    in_channels: int = 1
    image_size: int = 64
    block_size: int = 16
    codec_widths: tuple[int, ...] = (16, 32)
    cbr: str = "1/4"
    scan_width: int = 8
    scan_depth: int = 2
    extract_channels: int = 4
    extract_width: int = 8
    extract_depth: int = 2
    prox_width: int = 16
    prox_depth: int = 3
    n_iter: int = 11
    rho_init: float = 0.5
    semantic: bool = True
    use_acam: bool = True
    matrix_seed: int = 0
    ste_temperature: float = 2.0
    saliency_grad: bool = True
    per_image_power: bool = False

    def __post_init__(self) -> None:
        check_geometry(self.image_size, self.image_size, self.block_size)
        object.__setattr__(self, "codec_widths", tuple(self.codec_widths))

    @property
    def n(self) -> int:
        return self.block_size * self.block_size

    @property
    def blocks(self) -> int:
        g = self.image_size // self.block_size
        return g * g

    @property
    def encoder(self) -> EncoderConfig:
        return EncoderConfig(
            in_channels=self.in_channels,
            height=self.image_size,
            width=self.image_size,
            widths=self.codec_widths,
            cbr=Fraction(self.cbr),
            use_acam=self.use_acam,
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["codec_widths"] = list(self.codec_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config key(s): {sorted(unknown)}")
        return cls(**d)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class PipelineOutput:
    s_hat: torch.Tensor
    plans: list[SamplingPlan] | None = None
    saliency: torch.Tensor | None = None
    x: torch.Tensor | None = None
    z: torch.Tensor | None = None
    z_hat: torch.Tensor | None = None
    x_hat: torch.Tensor | None = None
    ratio_map: torch.Tensor | None = None


class AdaptiveJSSCC(nn.Module):
    """The full transceiver. ``semantic`` and ``use_acam`` in the config select
    the ablation variant."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.base = BaseMatrix(cfg.n, seed=cfg.matrix_seed)
        self.scanner = (
            ScanningNetwork(cfg.in_channels, cfg.scan_width, cfg.scan_depth, cfg.use_acam)
            if cfg.semantic
            else None
        )
        enc_cfg = cfg.encoder
        self.encoder = Encoder(enc_cfg)
        self.decoder = Decoder(enc_cfg)
        self.reconstructor = Reconstructor(
            cfg.in_channels,
            n_iter=cfg.n_iter,
            extract_channels=cfg.extract_channels,
            extract_width=cfg.extract_width,
            extract_depth=cfg.extract_depth,
            prox_width=cfg.prox_width,
            prox_depth=cfg.prox_depth,
            use_acam=cfg.use_acam,
            rho_init=cfg.rho_init,
        )

    @property
    def k(self) -> int:
        return self.cfg.encoder.k

    def saliency(self, s: torch.Tensor, mu: float | torch.Tensor) -> torch.Tensor:
        b = s.shape[0]
        g = self.cfg.image_size // self.cfg.block_size
        if self.scanner is None:
            return torch.full((b, g, g), 1.0 / (g * g), dtype=s.dtype)
        return self.scanner(s, mu, self.cfg.block_size)

    def plan(self, saliency: torch.Tensor, ratio: float) -> list[SamplingPlan]:
        m = saliency.detach().cpu().double().numpy()
        if self.scanner is None:
            return [allocate(uniform_saliency(m.shape[1:]), ratio, self.cfg.n) for _ in m]
        return [allocate(mi, ratio, self.cfg.n) for mi in m]

    def forward(
        self,
        s: torch.Tensor,
        ratio: float,
        mu: float | torch.Tensor,
        seed: int | None = None,
        generator: torch.Generator | None = None,
        noiseless: bool = False,
        keep_intermediates: bool = False,
        dither: float = 0.0,
    ) -> PipelineOutput:
        cfg = self.cfg
        bs, n = cfg.block_size, cfg.n
        if s.shape[1:] != (cfg.in_channels, cfg.image_size, cfg.image_size):
            raise ConfigError(f"pipeline built for {cfg.in_channels}x{cfg.image_size}^2 images, got {tuple(s.shape)}")
        if generator is None:
            generator = torch.Generator().manual_seed(0 if seed is None else int(seed))
        A = self.base.A.to(s.dtype)

        # transmitter: semantic sampling
        sal = self.saliency(s, mu)
        plans = self.plan(sal, ratio)
        q = torch.from_numpy(np.stack([p.q.reshape(-1) for p in plans]))
        q_soft = None
        if self.scanner is not None and cfg.saliency_grad and torch.is_grad_enabled():
            q_soft = sal.flatten(1) * total_budget(ratio, n, cfg.blocks)
        mask = row_mask(q, n, q_soft, cfg.ste_temperature).to(s.dtype)
        blocks = unfold(s, bs)
        coeff = measure(blocks.blocks, A, mask)
        x = fold(type(blocks)(align(coeff, A), bs, blocks.grid))

        # channel coding
        sym = normalize_power(self.encoder(x, mu), per_image=cfg.per_image_power)
        z_hat = sym.z if noiseless else awgn(sym, mu, generator=generator)
        x_hat = self.decoder(z_hat, mu)

        # receiver
        ratio_map = (q.to(s.dtype) / n).reshape(-1, *blocks.grid)
        s_hat = self.reconstructor(x_hat, ratio_map, mu, A, mask, bs, dither=dither, generator=generator)

        if not keep_intermediates:
            return PipelineOutput(s_hat=s_hat)
        return PipelineOutput(
            s_hat=s_hat, plans=plans, saliency=sal, x=x, z=sym.z, z_hat=z_hat, x_hat=x_hat, ratio_map=ratio_map
        )
