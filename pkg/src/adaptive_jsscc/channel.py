"""AWGN channel with unit-power symbols.

SNR is signal power over noise power with the signal normalized to unit mean
power, so the complex noise variance is ``10 ** (-snr_db / 10)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

NOISELESS_SNR_DB = 200.0


@dataclass
class ChannelSymbols:
    z: torch.Tensor  # complex, (batch, k)
    power: torch.Tensor  # mean |z|^2 after normalization; 0 for an all-zero input


def normalize_power(z_raw: torch.Tensor, per_image: bool = False) -> ChannelSymbols:
    """Scale symbols to unit mean power, over the whole batch or per image."""
    if z_raw.ndim == 1:
        z_raw = z_raw.unsqueeze(0)
    energy = z_raw.real.square() + z_raw.imag.square()
    dims = tuple(range(1, z_raw.ndim)) if per_image else tuple(range(z_raw.ndim))
    mean_power = energy.mean(dim=dims, keepdim=True)
    safe = torch.where(mean_power > 0, mean_power, torch.ones_like(mean_power))
    scale = torch.where(mean_power > 0, safe.rsqrt(), torch.zeros_like(mean_power))
    z = z_raw * scale
    power = (z.real.square() + z.imag.square()).mean()
    return ChannelSymbols(z=z, power=power.detach())


def noise_variance(snr_db: float | torch.Tensor) -> torch.Tensor:
    return torch.pow(10.0, -torch.as_tensor(snr_db, dtype=torch.float64) / 10.0)


def awgn(
    z: ChannelSymbols | torch.Tensor,
    snr_db: float | torch.Tensor,
    seed: int | None = None,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Add circularly-symmetric complex Gaussian noise.

    ``snr_db`` is a scalar or one value per batch row. The noise draw depends
    only on the seed (or generator state) and the symbol shape, never on ``z``.
    """
    sym = z.z if isinstance(z, ChannelSymbols) else z
    snr = torch.as_tensor(snr_db, dtype=torch.float64)
    if snr.ndim == 0 and float(snr) >= NOISELESS_SNR_DB:
        return sym
    if generator is None:
        generator = torch.Generator().manual_seed(0 if seed is None else int(seed))
    real_dtype = sym.real.dtype
    draw = torch.randn((2, *sym.shape), generator=generator, dtype=torch.float64)
    var = noise_variance(snr)
    var = torch.where(snr >= NOISELESS_SNR_DB, torch.zeros_like(var), var)
    if var.ndim:
        var = var.reshape(-1, *([1] * (sym.ndim - 1)))
    std = torch.sqrt(var / 2.0)
    noise = torch.complex((draw[0] * std).to(real_dtype), (draw[1] * std).to(real_dtype))
    return sym + noise
