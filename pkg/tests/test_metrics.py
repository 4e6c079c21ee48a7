import numpy as np
import pytest

from binoise.metrics import PSNR_CAP_DB, mse, psnr, ssim


def test_mse_identical_zero():
    a = np.random.default_rng(0).uniform(-1, 1, (3, 8, 8))
    assert mse(a, a) == 0.0


def test_mse_constant_offset():
    a = np.full((4, 4), 0.5)
    assert mse(a, a + 0.1) == pytest.approx(0.01, rel=1e-12)


def test_mse_symmetric():
    g = np.random.default_rng(1)
    a, b = g.uniform(-1, 1, (2, 6, 6))
    assert mse(a, b) == mse(b, a)


def test_mse_shape_mismatch():
    with pytest.raises(ValueError):
        mse(np.zeros((2, 2)), np.zeros((3, 3)))


def test_psnr_fixture_20db():
    a = np.full((8, 8), 0.2)
    assert psnr(a, a + 0.1, peak=1.0) == pytest.approx(20.0, abs=1e-9)


def test_psnr_identical_capped():
    a = np.ones((4, 4))
    assert psnr(a, a) == PSNR_CAP_DB == 100.0


def test_psnr_peak_doubling_adds_6db():
    g = np.random.default_rng(2)
    a, b = g.uniform(-1, 1, (2, 8, 8))
    assert psnr(a, b, peak=2.0) - psnr(a, b, peak=1.0) == pytest.approx(20 * np.log10(2), abs=1e-9)


def test_psnr_monotone_in_mse():
    a = np.zeros((8, 8))
    values = [psnr(a, a + off, peak=1.0) for off in (0.01, 0.02, 0.05, 0.1, 0.2)]
    assert all(x > y for x, y in zip(values, values[1:]))


def test_psnr_rejects_bad_peak():
    with pytest.raises(ValueError):
        psnr(np.zeros(4), np.zeros(4), peak=0.0)


def test_ssim_identical_is_one():
    g = np.random.default_rng(3)
    a = g.uniform(-1, 1, (3, 16, 16))
    assert ssim(a, a) == 1.0


def test_ssim_anticorrelated_negative():
    # near-zero window means keep the luminance term positive, so the
    # negative covariance of a vs -a drives the score below zero
    i, j = np.mgrid[0:16, 0:16]
    a = 0.5 * (-1.0) ** (i + j)
    assert ssim(a, -a, data_range=2.0) < 0.0


def test_ssim_constant_offset_between_zero_and_one():
    g = np.random.default_rng(5)
    a = g.uniform(0.2, 0.8, (16, 16))
    s = ssim(a, a + 0.1, data_range=1.0)
    assert 0.0 < s < 1.0


def test_ssim_single_window_hand_formula():
    # one 7x7 window: compare against a direct evaluation of the formula
    g = np.random.default_rng(123)
    a = g.uniform(0.1, 0.9, (7, 7))
    b = a * 0.8 + 0.05
    L = 1.0
    c1, c2 = (0.01 * L) ** 2, (0.03 * L) ** 2
    mu_a, mu_b = a.mean(), b.mean()
    va, vb = a.var(), b.var()
    cov = ((a - mu_a) * (b - mu_b)).mean()
    expect = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a**2 + mu_b**2 + c1) * (va + vb + c2))
    assert ssim(a, b, data_range=L) == pytest.approx(expect, rel=1e-9)


def test_ssim_channel_averaging():
    g = np.random.default_rng(6)
    a = g.uniform(-1, 1, (3, 10, 10))
    b = g.uniform(-1, 1, (3, 10, 10))
    per_channel = [ssim(a[c], b[c]) for c in range(3)]
    assert ssim(a, b) == pytest.approx(np.mean(per_channel), rel=1e-12)


def test_ssim_errors():
    with pytest.raises(ValueError):
        ssim(np.zeros((5, 5)), np.zeros((5, 5)))  # smaller than window
    with pytest.raises(ValueError):
        ssim(np.zeros((8, 8)), np.zeros((8, 9)))
    with pytest.raises(ValueError):
        ssim(np.zeros((2, 3, 8, 8)), np.zeros((2, 3, 8, 8)))
