import math

import pytest
import torch

from adaptive_jsscc.channel import awgn, noise_variance, normalize_power

K = 100_000


def _symbols(seed=0):
    g = torch.Generator().manual_seed(seed)
    return torch.complex(torch.randn(4, K // 4, generator=g), torch.randn(4, K // 4, generator=g)) * 3.7


def test_unit_power_input_unchanged():
    z = torch.tensor([2, 0, 0, 0], dtype=torch.complex64)
    sym = normalize_power(z)
    assert torch.allclose(sym.z, z.unsqueeze(0))
    assert abs(sym.power.item() - 1.0) < 1e-7


def test_zero_input_flagged():
    sym = normalize_power(torch.zeros(2, 8, dtype=torch.complex64))
    assert torch.count_nonzero(sym.z) == 0
    assert sym.power.item() == 0.0


def test_random_input_normalized():
    sym = normalize_power(_symbols().to(torch.complex128))
    assert abs(sym.power.item() - 1.0) < 1e-6


def test_per_image_normalization():
    z = _symbols().to(torch.complex128)
    z[0] *= 10
    sym = normalize_power(z, per_image=True)
    per_row = (sym.z.abs() ** 2).mean(dim=1)
    assert torch.allclose(per_row, torch.ones(4, dtype=torch.float64), atol=1e-9)


def test_noiseless_short_circuit():
    sym = normalize_power(_symbols())
    assert torch.equal(awgn(sym, 200.0, seed=1), sym.z)


@pytest.mark.parametrize("snr", [0.0, 10.0, 20.0])
def test_empirical_snr(snr):
    sym = normalize_power(_symbols().to(torch.complex128))
    noise = awgn(sym, snr, seed=11) - sym.z
    measured = 10 * math.log10(sym.z.abs().square().sum().item() / noise.abs().square().sum().item())
    assert abs(measured - snr) < 0.1


def test_noise_moments_within_three_sigma():
    snr = 5.0
    var = noise_variance(snr).item()
    z = torch.zeros(K, dtype=torch.complex128)
    n = awgn(z, snr, seed=4)
    for part in (n.real, n.imag):
        mean_se = math.sqrt(var / 2 / K)
        assert abs(part.mean().item()) < 3 * mean_se
        # variance estimator std for Gaussian data: sigma^2 sqrt(2/K)
        assert abs(part.var().item() - var / 2) < 3 * (var / 2) * math.sqrt(2 / K)


def test_noise_reproducible_and_independent_of_signal():
    a = awgn(torch.zeros(64, dtype=torch.complex64), 3.0, seed=9)
    b = awgn(torch.ones(64, dtype=torch.complex64), 3.0, seed=9) - 1
    assert torch.allclose(a, b, atol=1e-6)
    assert torch.equal(a, awgn(torch.zeros(64, dtype=torch.complex64), 3.0, seed=9))


def test_per_row_snr():
    z = torch.zeros(2, K // 2, dtype=torch.complex128)
    n = awgn(z, torch.tensor([0.0, 20.0]), seed=2)
    p = n.abs().square().mean(dim=1)
    assert abs(p[0].item() - 1.0) < 0.03
    assert abs(p[1].item() - 0.01) < 0.0003
