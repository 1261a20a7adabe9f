"""Power normalization and AWGN: measured SNR against the nominal value."""

import math

import torch

from adaptive_jsscc.channel import awgn, normalize_power

g = torch.Generator().manual_seed(0)
z = torch.complex(torch.randn(100_000, generator=g), torch.randn(100_000, generator=g)) * 4.2
sym = normalize_power(z.to(torch.complex128))
print("mean power after normalization:", sym.power.item())

for snr in (0, 5, 10, 15, 20):
    noise = awgn(sym, snr, seed=snr) - sym.z
    measured = 10 * math.log10(sym.z.abs().square().mean().item() / noise.abs().square().mean().item())
    print(f"nominal {snr:5.1f} dB   measured {measured:7.3f} dB")
