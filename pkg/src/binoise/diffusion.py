"""Stochastic process primitives shared by every sampler and loss.

Arrays are plain numpy ndarrays; the leading axis may be a batch dimension.
The timestep argument is either a single int (applied to the whole array) or
an integer array matching the leading axis, in which case coefficients are
gathered per element. All functions are pure given explicit noise arrays.
"""

from __future__ import annotations

import numpy as np

from .schedule import VarianceSchedule

DEFAULT_VALUE_RANGE = (-1.0, 1.0)


def _coeff(table: np.ndarray, t, ndim: int):
    """Gather a schedule coefficient for scalar or per-element t, shaped to broadcast."""
    c = table[np.asarray(t) - 1]
    if c.ndim == 0:
        return float(c)
    # per-element t: align with the leading (batch) axis
    return c.reshape(c.shape + (1,) * (ndim - 1))


def _check_t(schedule: VarianceSchedule, t):
    t = np.asarray(t)
    if not np.issubdtype(t.dtype, np.integer):
        raise TypeError(f"timestep must be integer, got dtype {t.dtype}")
    if np.any(t < 1) or np.any(t > schedule.T):
        raise ValueError(f"timestep {t} outside [1, {schedule.T}]")


def _check_shapes(a, b, what: str):
    if np.shape(a) != np.shape(b):
        raise ValueError(f"shape mismatch in {what}: {np.shape(a)} vs {np.shape(b)}")


def forward_sample(y0: np.ndarray, t, eps: np.ndarray, schedule: VarianceSchedule) -> np.ndarray:
    """Closed-form noising: y_t = √ᾱ_t·y0 + √(1−ᾱ_t)·ε."""
    _check_t(schedule, t)
    _check_shapes(y0, eps, "forward_sample")
    ab = _coeff(schedule.alpha_bars, t, np.ndim(y0))
    return np.sqrt(ab) * y0 + np.sqrt(1.0 - ab) * eps


def forward_step(y_prev: np.ndarray, t, eps: np.ndarray, schedule: VarianceSchedule) -> np.ndarray:
    """Single noising step: y_t = √α_t·y_{t−1} + √β_t·ε."""
    _check_t(schedule, t)
    _check_shapes(y_prev, eps, "forward_step")
    a = _coeff(schedule.alphas, t, np.ndim(y_prev))
    b = _coeff(schedule.betas, t, np.ndim(y_prev))
    return np.sqrt(a) * y_prev + np.sqrt(b) * eps


def predict_x0(
    y_t: np.ndarray,
    eps_hat: np.ndarray,
    t,
    schedule: VarianceSchedule,
    clamp: bool = False,
    value_range=DEFAULT_VALUE_RANGE,
) -> np.ndarray:
    """Implicit clean estimate: ỹ_0 = (y_t − √(1−ᾱ_t)·ε̂) / √ᾱ_t.

    Clamping clips elementwise to value_range; it stabilizes sampling but
    breaks the exact algebraic inverse of forward_sample, so it is off by
    default and enabled explicitly by samplers.
    """
    _check_t(schedule, t)
    _check_shapes(y_t, eps_hat, "predict_x0")
    ab = _coeff(schedule.alpha_bars, t, np.ndim(y_t))
    x0 = (y_t - np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(ab)
    if clamp:
        x0 = np.clip(x0, value_range[0], value_range[1])
    return x0


def reverse_step(y_t: np.ndarray, eps_hat: np.ndarray, z, t, schedule: VarianceSchedule) -> np.ndarray:
    """One denoising update.

    y_{t−1} = (1/√α_t)·(y_t − ((1−α_t)/√(1−ᾱ_t))·ε̂) + σ_t·z, with z forced
    to zero at t = 1 so the final output is deterministic given ε̂.

    Only supports a scalar t (samplers step one timestep at a time).
    """
    _check_t(schedule, t)
    _check_shapes(y_t, eps_hat, "reverse_step")
    beta, alpha, alpha_bar, sigma = schedule.lookup(int(t))
    mean = (y_t - (1.0 - alpha) / np.sqrt(1.0 - alpha_bar) * eps_hat) / np.sqrt(alpha)
    if int(t) == 1 or np.isscalar(z) and z == 0:
        return mean
    _check_shapes(y_t, z, "reverse_step noise")
    return mean + sigma * z
