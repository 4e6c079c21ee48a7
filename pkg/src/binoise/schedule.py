"""Diffusion variance schedule: β_t, α_t = 1−β_t, ᾱ_t = ∏ α_s, σ_t = √β_t.

Timesteps are 1-indexed (t = 1..T). Coefficients are stored in float64 and
the arrays are frozen after construction; a schedule can be shared freely
across concurrent samplers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class Coeffs(NamedTuple):
    beta: float
    alpha: float
    alpha_bar: float
    sigma: float


@dataclass(frozen=True)
class VarianceSchedule:
    betas: np.ndarray
    alphas: np.ndarray = field(init=False)
    alpha_bars: np.ndarray = field(init=False)
    sigmas: np.ndarray = field(init=False)

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size < 1:
            raise ValueError("betas must be a non-empty 1-D array")
        if np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise ValueError("every beta must lie strictly inside (0, 1)")
        alphas = 1.0 - betas
        alpha_bars = np.cumprod(alphas)
        sigmas = np.sqrt(betas)
        for arr in (betas, alphas, alpha_bars, sigmas):
            arr.setflags(write=False)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "alpha_bars", alpha_bars)
        object.__setattr__(self, "sigmas", sigmas)

    @property
    def T(self) -> int:
        return self.betas.size

    def lookup(self, t: int) -> Coeffs:
        """Coefficients at timestep t ∈ [1, T]. Out-of-range t is an error."""
        i = self._index(t)
        return Coeffs(
            float(self.betas[i]),
            float(self.alphas[i]),
            float(self.alpha_bars[i]),
            float(self.sigmas[i]),
        )

    def _index(self, t):
        """Map 1-indexed timestep(s) to array index, validating range."""
        t = np.asarray(t)
        if not np.issubdtype(t.dtype, np.integer):
            raise TypeError(f"timestep must be integer, got dtype {t.dtype}")
        if np.any(t < 1) or np.any(t > self.T):
            raise ValueError(f"timestep {t} outside [1, {self.T}]")
        return t - 1


def build_linear_schedule(T: int, beta_start: float, beta_end: float) -> VarianceSchedule:
    """Linearly spaced betas from beta_start to beta_end inclusive over T steps."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got [{beta_start}, {beta_end}]")
    return VarianceSchedule(np.linspace(beta_start, beta_end, T))


def default_schedule(T: int = 100) -> VarianceSchedule:
    """Default linear schedule: the 1000-step [1e-4, 0.02] range rescaled to T steps.

    Rescaling keeps the total noise budget (sum of betas) roughly constant, so
    ᾱ_T stays near zero even for short schedules.
    """
    scale = 1000.0 / T
    return build_linear_schedule(T, 1e-4 * scale, 0.02 * scale)
