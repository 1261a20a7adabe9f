"""SNR-conditioned channel attention.

Features are pooled per channel, the SNR (in dB) is prepended, and a two-layer
MLP (PReLU then sigmoid) produces one scale factor per channel.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn

from .errors import GeometryError


def snr_column(mu: float | torch.Tensor, batch: int, like: torch.Tensor) -> torch.Tensor:
    """Broadcast a scalar or per-sample SNR to shape ``(batch, 1)``."""
    mu_t = torch.as_tensor(mu, dtype=like.dtype, device=like.device)
    if not torch.isfinite(mu_t).all():
        raise ValueError(f"SNR must be finite, got {mu}")
    if mu_t.ndim == 0:
        return mu_t.expand(batch, 1)
    return mu_t.reshape(-1, 1).expand(batch, 1)


class ACAM(nn.Module):
    """Attention-based channel adaptive module.

    Args:
        channels: channel count ``C`` of the features being scaled.
        hidden: width of the bottleneck; defaults to ``max(4, ceil(C / 2))``.
    """

    def __init__(self, channels: int, hidden: int | None = None):
        super().__init__()
        self.channels = channels
        self.hidden = hidden or max(4, math.ceil(channels / 2))
        self.fc1 = nn.Linear(channels + 1, self.hidden)
        self.act = nn.PReLU(num_parameters=1)
        self.fc2 = nn.Linear(self.hidden, channels)

    def scale_factors(self, feats: torch.Tensor, mu: float | torch.Tensor) -> torch.Tensor:
        if feats.shape[1] != self.channels:
            raise GeometryError(f"ACAM built for {self.channels} channels, got {feats.shape[1]}")
        pooled = feats.flatten(2).mean(dim=2)
        joint = torch.cat([snr_column(mu, feats.shape[0], feats), pooled], dim=1)
        return torch.sigmoid(self.fc2(self.act(self.fc1(joint))))

    def forward(self, feats: torch.Tensor, mu: float | torch.Tensor) -> torch.Tensor:
        kappa = self.scale_factors(feats, mu)
        return feats * kappa.reshape(*kappa.shape, *([1] * (feats.ndim - 2)))


class NoACAM(nn.Module):
    """Drop-in for ablations without channel adaptation; ignores the SNR entirely."""

    def forward(self, feats: torch.Tensor, mu: float | torch.Tensor) -> torch.Tensor:
        return feats


def make_acam(channels: int, enabled: bool) -> nn.Module:
    return ACAM(channels) if enabled else NoACAM()
