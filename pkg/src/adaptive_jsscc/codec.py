"""Joint semantic-channel encoder/decoder.

Residual (transposed) convolutional stages halve/double the resolution, each
followed by an ACAM. The encoder's last convolution emits ``2 * c_out`` real
channels that are paired into ``c_out`` complex channels, so the number of
complex channel symbols per image is ``k = c_out * (H / 2^s) * (W / 2^s)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import torch
import torch.nn as nn

from .acam import make_acam
from .errors import ConfigError, GeometryError


@dataclass(frozen=True)
class EncoderConfig:
    in_channels: int
    height: int
    width: int
    widths: tuple[int, ...] = (32, 64)
    cbr: Fraction | float | str = Fraction(1, 12)
    use_acam: bool = True

    @property
    def stages(self) -> int:
        return len(self.widths)

    @property
    def latent_hw(self) -> tuple[int, int]:
        f = 2**self.stages
        if self.height % f or self.width % f:
            raise GeometryError(f"{self.height}x{self.width} not divisible by 2^{self.stages}")
        return self.height // f, self.width // f

    @property
    def source_dim(self) -> int:
        return self.in_channels * self.height * self.width

    @property
    def latent_channels(self) -> int:
        h, w = self.latent_hw
        target = Fraction(self.cbr).limit_denominator(10_000)
        c_out = target * self.source_dim / (h * w)
        if c_out.denominator != 1 or c_out < 1:
            raise ConfigError(
                f"CBR {target} is not reachable with integer latent channels for "
                f"{self.in_channels}x{self.height}x{self.width} and {self.stages} stages"
            )
        return int(c_out)

    @property
    def k(self) -> int:
        h, w = self.latent_hw
        return self.latent_channels * h * w

    @property
    def achieved_cbr(self) -> Fraction:
        return Fraction(self.k, self.source_dim)


class RCM(nn.Module):
    """Residual conv block: ``act(conv path) + skip``; the skip projects on shape change."""

    def __init__(self, cin: int, cout: int, stride: int = 2):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(cin, cout, 3, stride=stride, padding=1),
            nn.PReLU(),
            nn.Conv2d(cout, cout, 3, padding=1),
        )
        self.act = nn.PReLU()
        if stride == 1 and cin == cout:
            self.skip: nn.Module = nn.Identity()
        else:
            self.skip = nn.Conv2d(cin, cout, 1, stride=stride)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.act(self.body(x)) + self.skip(x)


class RTCM(nn.Module):
    """Residual transposed-conv block with 2x upsampling."""

    def __init__(self, cin: int, cout: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.ConvTranspose2d(cin, cout, 4, stride=2, padding=1),
            nn.PReLU(),
            nn.Conv2d(cout, cout, 3, padding=1),
        )
        self.act = nn.PReLU()
        self.skip = nn.Sequential(nn.Upsample(scale_factor=2, mode="nearest"), nn.Conv2d(cin, cout, 1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.act(self.body(x)) + self.skip(x)


class Encoder(nn.Module):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.c_out = cfg.latent_channels
        self.stages = nn.ModuleList()
        self.acams = nn.ModuleList()
        ch = cfg.in_channels
        for w in cfg.widths:
            self.stages.append(RCM(ch, w, stride=2))
            self.acams.append(make_acam(w, cfg.use_acam))
            ch = w
        self.out = nn.Conv2d(ch, 2 * self.c_out, 3, padding=1)

    def forward(self, x: torch.Tensor, mu: float | torch.Tensor) -> torch.Tensor:
        """Aligned samples ``(b, C, H, W)`` -> raw complex symbols ``(b, k)`` (not yet normalized)."""
        if not torch.isfinite(torch.as_tensor(mu)).all():
            raise ValueError(f"SNR must be finite, got {mu}")
        t = x
        for stage, acam in zip(self.stages, self.acams):
            t = acam(stage(t), mu)
        t = self.out(t)
        b, _, h, w = t.shape
        t = t.reshape(b, 2, self.c_out * h * w)
        return torch.complex(t[:, 0], t[:, 1])


class Decoder(nn.Module):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.c_out = cfg.latent_channels
        self.latent_hw = cfg.latent_hw
        widths = list(reversed(cfg.widths))
        self.inp = nn.Sequential(nn.Conv2d(2 * self.c_out, widths[0], 3, padding=1), nn.PReLU())
        self.stages = nn.ModuleList()
        self.acams = nn.ModuleList()
        ch = widths[0]
        for w in widths[1:] + [widths[-1]]:
            self.stages.append(RTCM(ch, w))
            self.acams.append(make_acam(w, cfg.use_acam))
            ch = w
        self.out = nn.Conv2d(ch, cfg.in_channels, 3, padding=1)

    def forward(self, z_hat: torch.Tensor, mu: float | torch.Tensor) -> torch.Tensor:
        """Received symbols ``(b, k)`` -> image-shaped estimate in [0, 1]."""
        h, w = self.latent_hw
        k = self.c_out * h * w
        if z_hat.ndim != 2 or z_hat.shape[1] != k:
            raise GeometryError(f"decoder expects (batch, {k}) symbols, got {tuple(z_hat.shape)}")
        t = torch.stack([z_hat.real, z_hat.imag], dim=1).reshape(-1, 2 * self.c_out, h, w)
        t = self.inp(t)
        for stage, acam in zip(self.stages, self.acams):
            t = acam(stage(t), mu)
        return torch.sigmoid(self.out(t))
