"""Noise-prediction interface ε̂ = model(y_t, t, condition?) and closed-form oracles.

The Gaussian oracle is the exact Bayes-optimal noise predictor when the clean
data is N(mu, σ0²·I); it lets every sampler be verified without any training.
Trainable networks live in `nets`.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from .schedule import VarianceSchedule


class Denoiser(ABC):
    """Predicts the noise content of y_t at timestep t."""

    is_conditional: bool = False

    @abstractmethod
    def __call__(self, y_t: np.ndarray, t: int, condition: np.ndarray | None = None) -> np.ndarray:
        ...

    @property
    def n_params(self) -> int:
        return 0


class GaussianOracleDenoiser(Denoiser):
    """Exact posterior-expected noise for clean data ~ N(mu, sigma0_sq·I).

    With y_t = √ᾱ·y0 + √(1−ᾱ)·ε, Gaussian conditioning gives
        E[y0|y_t] = mu + (√ᾱ·σ0² / (ᾱ·σ0² + 1−ᾱ)) · (y_t − √ᾱ·mu)
    and the implied noise estimate is (y_t − √ᾱ·E[y0|y_t]) / √(1−ᾱ).
    """

    is_conditional = False

    def __init__(self, mu, sigma0_sq: float, schedule: VarianceSchedule):
        if sigma0_sq <= 0.0:
            raise ValueError(f"sigma0_sq must be positive, got {sigma0_sq}")
        self.mu = np.asarray(mu, dtype=np.float64)
        self.sigma0_sq = float(sigma0_sq)
        self.schedule = schedule

    def posterior_mean(self, y_t: np.ndarray, t: int) -> np.ndarray:
        _, _, ab, _ = self.schedule.lookup(int(t))
        gain = np.sqrt(ab) * self.sigma0_sq / (ab * self.sigma0_sq + 1.0 - ab)
        return self.mu + gain * (y_t - np.sqrt(ab) * self.mu)

    def __call__(self, y_t, t, condition=None):
        if condition is not None:
            raise ValueError("unconditional denoiser does not accept a condition")
        _, _, ab, _ = self.schedule.lookup(int(t))
        return (y_t - np.sqrt(ab) * self.posterior_mean(y_t, t)) / np.sqrt(1.0 - ab)


class IgnoreConditionView(Denoiser):
    """Presents an unconditional denoiser through the conditional interface.

    The condition argument is required by the interface but has no effect;
    useful for verifying that conditional sampling machinery collapses to the
    unconditional law when the model carries no conditional information.
    """

    is_conditional = True

    def __init__(self, base: Denoiser):
        if base.is_conditional:
            raise ValueError("base denoiser is already conditional")
        self.base = base

    def __call__(self, y_t, t, condition=None):
        return self.base(y_t, t)

    @property
    def n_params(self) -> int:
        return self.base.n_params


def as_conditional(base: Denoiser) -> IgnoreConditionView:
    return IgnoreConditionView(base)
