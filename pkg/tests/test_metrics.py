import math

import numpy as np
import pytest
from skimage.metrics import peak_signal_noise_ratio, structural_similarity

from adaptive_jsscc.errors import GeometryError
from adaptive_jsscc.metrics import PSNR_CAP_DB, batch_psnr, batch_ssim, psnr, ssim


def test_psnr_closed_form():
    s = np.zeros((8, 8))
    assert abs(psnr(s, s + 0.5) - 10 * math.log10(4)) < 1e-6
    assert abs(psnr(s, s + 0.5) - 6.0206) < 1e-4


def test_identical_images_are_capped():
    s = np.random.default_rng(0).random((16, 16))
    assert psnr(s, s) == PSNR_CAP_DB


def test_psnr_matches_independent_implementation(rng):
    s = rng.random((3, 32, 32))
    t = np.clip(s + 0.05 * rng.standard_normal(s.shape), 0, 1)
    assert abs(psnr(s, t) - peak_signal_noise_ratio(s, t, data_range=1.0)) < 1e-9


@pytest.mark.parametrize("shape", [(11, 11), (32, 40), (64, 64)])
def test_ssim_matches_independent_implementation(rng, shape):
    s = rng.random(shape)
    t = np.clip(s + 0.1 * rng.standard_normal(shape), 0, 1)
    ref = structural_similarity(s, t, data_range=1.0, gaussian_weights=True, sigma=1.5,
                                use_sample_covariance=False)
    assert abs(ssim(s, t) - ref) < 1e-6


def test_ssim_of_identical_images_is_one(rng):
    s = rng.random((20, 20))
    assert abs(ssim(s, s) - 1.0) < 1e-12


def test_inverted_binary_image_is_negative():
    s = np.zeros((32, 32))
    s[::2] = 1.0
    assert ssim(s, 1.0 - s) < 0


def test_tiny_image_rejected():
    with pytest.raises(GeometryError):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)))


def test_shape_mismatch_rejected():
    with pytest.raises(GeometryError):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))


def test_batch_metrics_are_per_image(rng):
    s = rng.random((3, 1, 16, 16))
    t = s.copy()
    t[1] = 1 - t[1]
    p, q = batch_psnr(s, t), batch_ssim(s, t)
    assert p.shape == q.shape == (3,)
    assert p[0] == PSNR_CAP_DB and p[1] < 20
    assert q[1] < q[0]
