"""Sampler zoo: plain ancestral, conditional, low-pass projection, bi-noising.

Every sampler is a pure function of (model weights, condition, spec.seed):
all stochastic draws come from a stream derived from spec.seed, in a fixed
order, so reruns are bit-identical. The `shape` argument is the shape of one
sample or a batch of samples (leading batch axis); models are evaluated once
per timestep on the whole batch.

Bi-noising runs, at each timestep t = T..1:
  1. conditional noise estimate ε̂_c on the current iterate;
  2. implicit clean prediction ỹ_0 from ε̂_c (optionally clamped);
  3. re-noising of ỹ_0 back to level t with a fresh Gaussian draw;
  4. an unconditional reverse step on the re-noised iterate.
The unconditional model thereby corrects the conditional model's prediction
toward the natural-image distribution at every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import rng
from .denoiser import Denoiser
from .diffusion import DEFAULT_VALUE_RANGE, forward_sample, predict_x0, reverse_step
from .schedule import VarianceSchedule

MODES = ("plain", "conditional", "cdp", "binoising", "binoising_null")


@dataclass
class SamplerSpec:
    mode: str
    schedule: VarianceSchedule
    seed: int
    clamp_x0: bool = True
    value_range: tuple = DEFAULT_VALUE_RANGE
    cdp_downsample_factor: int | None = None
    # bi-noising is applied at timesteps binoise_until <= t <= binoise_from;
    # outside that window the step falls back to a plain conditional update.
    binoise_from: int | None = None
    binoise_until: int = 1
    # distinguishes parallel runs sharing one base seed (e.g. per-sample fan-out)
    stream_id: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown sampler mode {self.mode!r}; expected one of {MODES}")
        if self.mode == "cdp":
            f = self.cdp_downsample_factor
            if f is None or int(f) < 1:
                raise ValueError("cdp mode requires a positive cdp_downsample_factor")
        elif self.cdp_downsample_factor is not None:
            raise ValueError(f"cdp_downsample_factor is only valid in cdp mode, not {self.mode!r}")


class TraceStep(NamedTuple):
    t: int
    y_t: np.ndarray
    x0_pred: np.ndarray | None


@dataclass
class TraceRecord:
    """Observational per-timestep capture; never affects sampled values."""

    steps: list = field(default_factory=list)

    def add(self, t: int, y_t: np.ndarray, x0_pred: np.ndarray | None = None):
        self.steps.append(
            TraceStep(int(t), np.array(y_t, copy=True), None if x0_pred is None else np.array(x0_pred, copy=True))
        )


def _sampler_rng(spec: SamplerSpec) -> np.random.Generator:
    return rng.stream(spec.seed, "sampler", spec.stream_id)


def _require_unconditional(model: Denoiser, role: str = "model"):
    if model.is_conditional:
        raise ValueError(f"{role} must be unconditional for this sampler")


def _require_conditional(model: Denoiser, role: str = "model"):
    if not model.is_conditional:
        raise ValueError(f"{role} must be conditional for this sampler")


def sample_plain(model: Denoiser, spec: SamplerSpec, shape, trace: TraceRecord | None = None) -> np.ndarray:
    """Unconditional ancestral sampling from pure noise."""
    _require_unconditional(model)
    g = _sampler_rng(spec)
    y = g.standard_normal(shape)
    for t in range(spec.schedule.T, 0, -1):
        eps_hat = model(y, t)
        z = g.standard_normal(shape) if t > 1 else 0
        if trace is not None:
            trace.add(t, y, predict_x0(y, eps_hat, t, spec.schedule))
        y = reverse_step(y, eps_hat, z, t, spec.schedule)
    return y


def sample_conditional(model: Denoiser, x0: np.ndarray, spec: SamplerSpec, shape, trace: TraceRecord | None = None) -> np.ndarray:
    """Ancestral sampling with the condition fed to the model at every step."""
    _require_conditional(model)
    g = _sampler_rng(spec)
    y = g.standard_normal(shape)
    for t in range(spec.schedule.T, 0, -1):
        eps_hat = model(y, t, x0)
        z = g.standard_normal(shape) if t > 1 else 0
        if trace is not None:
            trace.add(t, y, predict_x0(y, eps_hat, t, spec.schedule))
        y = reverse_step(y, eps_hat, z, t, spec.schedule)
    return y


def lowpass_project(img: np.ndarray, factor: int) -> np.ndarray:
    """Box-downsample the trailing two axes by `factor`, then nearest-upsample back.

    A linear idempotent projection onto the per-block-mean subspace.
    """
    factor = int(factor)
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return np.asarray(img, dtype=np.float64).copy()
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[-2], img.shape[-1]
    if h % factor or w % factor:
        raise ValueError(f"spatial dims ({h}, {w}) not divisible by factor {factor}")
    lead = img.shape[:-2]
    blocks = img.reshape(lead + (h // factor, factor, w // factor, factor))
    means = blocks.mean(axis=(-3, -1))
    up = np.repeat(np.repeat(means, factor, axis=-2), factor, axis=-1)
    return up


def sample_cdp(model: Denoiser, x0: np.ndarray, spec: SamplerSpec, shape, trace: TraceRecord | None = None) -> np.ndarray:
    """Steer a pretrained unconditional model by replacing low-frequency content.

    Each step takes the plain reverse step, then swaps in the low-pass band of
    the (matched-noise-level) condition; at the final step the condition is
    injected un-noised, which pins the output's low-pass band to the
    condition's exactly.
    """
    _require_unconditional(model)
    if spec.cdp_downsample_factor is None:
        raise ValueError("cdp sampling requires cdp_downsample_factor")
    f = int(spec.cdp_downsample_factor)
    g = _sampler_rng(spec)
    y = g.standard_normal(shape)
    for t in range(spec.schedule.T, 0, -1):
        eps_hat = model(y, t)
        z = g.standard_normal(shape) if t > 1 else 0
        if trace is not None:
            trace.add(t, y, predict_x0(y, eps_hat, t, spec.schedule))
        y_hat = reverse_step(y, eps_hat, z, t, spec.schedule)
        if t > 1:
            eps_c = g.standard_normal(shape)
            x_noised = forward_sample(np.broadcast_to(x0, y_hat.shape), t - 1, eps_c, spec.schedule)
        else:
            x_noised = np.broadcast_to(x0, y_hat.shape)
        y = y_hat + lowpass_project(x_noised, f) - lowpass_project(y_hat, f)
    return y


def sample_binoising(cond: Denoiser, uncond: Denoiser, x0: np.ndarray, spec: SamplerSpec, shape, trace: TraceRecord | None = None) -> np.ndarray:
    """Bi-noising sampling with separate conditional and unconditional models."""
    _require_conditional(cond, "cond")
    _require_unconditional(uncond, "uncond")
    g = _sampler_rng(spec)
    y = g.standard_normal(shape)
    t_hi = spec.schedule.T if spec.binoise_from is None else min(spec.binoise_from, spec.schedule.T)
    t_lo = spec.binoise_until
    for t in range(spec.schedule.T, 0, -1):
        eps_c = cond(y, t, x0)
        if t_lo <= t <= t_hi:
            x0_pred = predict_x0(y, eps_c, t, spec.schedule, clamp=spec.clamp_x0, value_range=spec.value_range)
            renoise = g.standard_normal(shape)
            y_re = forward_sample(x0_pred, t, renoise, spec.schedule)
            eps_u = uncond(y_re, t)
            z = g.standard_normal(shape) if t > 1 else 0
            if trace is not None:
                trace.add(t, y, x0_pred)
            y = reverse_step(y_re, eps_u, z, t, spec.schedule)
        else:
            z = g.standard_normal(shape) if t > 1 else 0
            if trace is not None:
                trace.add(t, y, predict_x0(y, eps_c, t, spec.schedule))
            y = reverse_step(y, eps_c, z, t, spec.schedule)
    return y


def sample_binoising_null(cond: Denoiser, x0: np.ndarray, spec: SamplerSpec, shape, trace: TraceRecord | None = None) -> np.ndarray:
    """Bi-noising with the unconditional role played by the same net via null token."""
    from .nets import with_null_token

    _require_conditional(cond, "cond")
    return sample_binoising(cond, with_null_token(cond), x0, spec, shape, trace=trace)
