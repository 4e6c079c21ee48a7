"""Reference image-quality metrics: MSE, PSNR, SSIM.

SSIM uses a uniform 7x7 window over valid positions (the toy images are only
16x16, so the usual 11x11 Gaussian window would leave almost no support) with
the standard stabilizer constants C1 = (0.01·L)², C2 = (0.03·L)². Channels
are averaged.
"""

from __future__ import annotations

import numpy as np

# identical images would give infinite PSNR; reports use a finite, sortable cap
PSNR_CAP_DB = 100.0


def _check_shapes(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _check_shapes(a, b)
    d = a - b
    return float(np.mean(d * d))


def psnr(a, b, peak: float = 2.0) -> float:
    """10·log10(peak² / mse) in dB, capped at PSNR_CAP_DB for identical inputs."""
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    err = mse(a, b)
    if err == 0.0:
        return PSNR_CAP_DB
    return min(float(10.0 * np.log10(peak * peak / err)), PSNR_CAP_DB)


def _windows(x: np.ndarray, win: int) -> np.ndarray:
    # (H, W) -> (nH, nW, win, win) valid sliding windows
    v = np.lib.stride_tricks.sliding_window_view(x, (win, win))
    return v


def ssim(a, b, data_range: float = 2.0, win: int = 7) -> float:
    """Mean structural similarity over valid windows; channels averaged.

    Accepts (H, W) or (C, H, W) arrays.
    """
    a, b = _check_shapes(a, b)
    if a.ndim == 2:
        a = a[None]
        b = b[None]
    if a.ndim != 3:
        raise ValueError(f"expected (H, W) or (C, H, W), got shape {a.shape}")
    h, w = a.shape[-2:]
    if h < win or w < win:
        raise ValueError(f"image {h}x{w} smaller than {win}x{win} window")
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    vals = []
    for ca, cb in zip(a, b):
        wa = _windows(ca, win).reshape(-1, win * win)
        wb = _windows(cb, win).reshape(-1, win * win)
        mu_a = wa.mean(axis=1)
        mu_b = wb.mean(axis=1)
        var_a = wa.var(axis=1)
        var_b = wb.var(axis=1)
        cov = (wa * wb).mean(axis=1) - mu_a * mu_b
        num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
        den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))
