"""The channel encoder/decoder and how ACAM reacts to the SNR.

Prints the code length for a few bandwidth ratios and the spread of the
attention factors of one encoder stage as the SNR changes.
"""

import torch

from adaptive_jsscc.channel import awgn, normalize_power
from adaptive_jsscc.codec import Decoder, Encoder, EncoderConfig

torch.manual_seed(0)
for cbr in ("1/16", "1/8", "1/4"):
    cfg = EncoderConfig(1, 64, 64, (16, 32), cbr)
    print(f"cbr {cbr:>5}: k = {cfg.k} complex symbols for {cfg.source_dim} pixels")

cfg = EncoderConfig(1, 64, 64, (16, 32), "1/4")
enc, dec = Encoder(cfg), Decoder(cfg)
x = torch.rand(2, 1, 64, 64)
feats = enc.stages[0](x)
for snr in (0.0, 10.0, 20.0):
    kappa = enc.acams[0].scale_factors(feats, snr)
    print(f"SNR {snr:4.1f} dB: attention factors mean {kappa.mean():.4f}, range [{kappa.min():.4f}, {kappa.max():.4f}]")

with torch.no_grad():
    sym = normalize_power(enc(x, 10.0))
    out = dec(awgn(sym, 10.0, seed=1), 10.0)
print("decoded", tuple(out.shape), "in", (float(out.min()), float(out.max())))
