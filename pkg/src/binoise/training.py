"""Losses, Adam optimizer, training loop, and EMA weight fusion.

The denoising loss is the usual squared error between drawn and predicted
noise. The correction term compares the net's predictions on the noised
degraded input and the noised clean target (same noise draw, same timestep),
weighted by α_t; it penalizes the net for seeing degradation content as
noise. The total objective is L = L_simple + λ_corr·L_corr with λ_corr
defaulting to 0.001.

Weight fusion pulls the current weights toward a pretrained unconditional
model after every iteration: W' = α·θ + (1−α)·W_r.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .diffusion import forward_sample
from .nets import TinyNet
from .schedule import VarianceSchedule


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    steps: int = 1000
    seed: int = 0
    lambda_corr: float = 0.001
    corr_enabled: bool = False
    ema_alpha: float = 0.999
    # probability of replacing the condition with the null token per element;
    # > 0 teaches a conditional net its unconditional (null-token) behavior
    null_token_prob: float = 0.0

    def __post_init__(self):
        if self.learning_rate < 0 or not np.isfinite(self.learning_rate):
            raise ValueError(f"learning_rate must be non-negative and finite, got {self.learning_rate}")
        if self.batch_size < 1 or self.steps < 1:
            raise ValueError("batch_size and steps must be positive")
        if self.lambda_corr < 0:
            raise ValueError(f"lambda_corr must be >= 0, got {self.lambda_corr}")
        if not 0.0 <= self.ema_alpha <= 1.0:
            raise ValueError(f"ema_alpha must lie in [0, 1], got {self.ema_alpha}")
        if not 0.0 <= self.null_token_prob <= 1.0:
            raise ValueError(f"null_token_prob must lie in [0, 1], got {self.null_token_prob}")


@dataclass
class WeightVector:
    values: np.ndarray
    fingerprint: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, loss: float):
        super().__init__(f"non-finite loss {loss} at step {step}")
        self.step = step
        self.loss = loss


def _model_forward(model: TinyNet, y_t, t, x0, null_flag=0.0):
    # x0 doubles as the condition for conditional models; unconditional
    # models still train against (x0, y0) pairs but never see x0 as input
    if model.is_conditional:
        return model.forward(y_t, t, x0, null_flag=null_flag)
    return model.forward(y_t, t)


def loss_simple(model: TinyNet, x0, y0, t, eps, schedule: VarianceSchedule, null_flag=0.0):
    """Noise-prediction squared error; returns (loss, flat weight gradient)."""
    y_t = forward_sample(y0, t, eps, schedule)
    out, caches = _model_forward(model, y_t, t, x0, null_flag)
    r = out - eps
    loss = float(np.mean(r * r))
    grads = model.backward(2.0 * r / r.size, caches)
    return loss, grads


def loss_corr(model: TinyNet, x0, y0, t, eps, schedule: VarianceSchedule, null_flag=0.0):
    """Degradation-consistency penalty: α_t-weighted gap between the net's
    predictions on the noised degraded input and the noised clean target.

    Both branches use the same noise draw so the gap isolates the degradation
    content; gradients flow through both evaluations.
    """
    x_t = forward_sample(x0, t, eps, schedule)
    y_t = forward_sample(y0, t, eps, schedule)
    a = schedule.alphas[np.asarray(t) - 1]
    if np.ndim(a) > 0:
        a = a.reshape(a.shape + (1,) * (np.ndim(y_t) - 1))
    out_y, caches_y = _model_forward(model, y_t, t, x0, null_flag)
    out_x, caches_x = _model_forward(model, x_t, t, x0, null_flag)
    d = out_x - out_y
    loss = float(np.mean(a * d * d))
    g = 2.0 * a * d / d.size
    grads = model.backward(g, caches_x) - model.backward(g, caches_y)
    return loss, grads


def loss_final(model: TinyNet, x0, y0, t, eps, schedule: VarianceSchedule, cfg: TrainConfig, null_flag=0.0):
    """L_simple + λ_corr·L_corr. With λ_corr = 0 this is exactly loss_simple.

    Returns (total, l_simple, l_corr, grads).
    """
    ls, gs = loss_simple(model, x0, y0, t, eps, schedule, null_flag)
    lam = cfg.lambda_corr if cfg.corr_enabled else 0.0
    if lam == 0.0:
        return ls, ls, 0.0, gs
    lc, gc = loss_corr(model, x0, y0, t, eps, schedule, null_flag)
    return ls + lam * lc, ls, lc, gs + lam * gc


def ema_fuse(theta: WeightVector, w_r: WeightVector, alpha: float) -> WeightVector:
    """W' = α·θ + (1−α)·W_r, elementwise; only between identical architectures."""
    if theta.fingerprint != w_r.fingerprint:
        raise ValueError("cannot fuse weights of different architectures")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if theta.values.shape != w_r.values.shape:
        raise ValueError("weight length mismatch")
    if alpha == 1.0:
        return WeightVector(theta.values.copy(), theta.fingerprint)
    if alpha == 0.0:
        return WeightVector(w_r.values.copy(), theta.fingerprint)
    return WeightVector(alpha * theta.values + (1.0 - alpha) * w_r.values, theta.fingerprint)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n))


def adam_step(weights, grads, state: AdamState, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update with bias correction; returns (new_weights, new_state)."""
    grads = np.asarray(grads)
    if grads.shape != np.shape(weights):
        raise ValueError("gradient/weight shape mismatch")
    if not np.all(np.isfinite(grads)):
        raise ValueError("non-finite gradients")
    t = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * grads
    v = beta2 * state.v + (1.0 - beta2) * grads * grads
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    return weights - lr * m_hat / (np.sqrt(v_hat) + eps), AdamState(m, v, t)


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainResult:
    weights: WeightVector
    loss_curve: list = field(default_factory=list)  # rows (step, l_simple, l_corr, l_final)


def train(model: TinyNet, dataset, cfg: TrainConfig, schedule: VarianceSchedule, pretrained: WeightVector | None = None) -> TrainResult:
    """Minibatch Adam on L_final; optional EMA fusion toward pretrained weights.

    `dataset` provides paired arrays dataset.x0 (degraded / condition) and
    dataset.y0 (clean target), leading axis indexing samples. Timesteps are
    drawn uniformly from [1, T] per batch element. Fully deterministic for a
    fixed cfg.seed.
    """
    if pretrained is not None and pretrained.fingerprint != model.fingerprint:
        raise ValueError("pretrained weights do not match the model architecture")
    x0_all = np.asarray(dataset.x0, dtype=np.float64)
    y0_all = np.asarray(dataset.y0, dtype=np.float64)
    n = y0_all.shape[0]
    g = rng.stream(cfg.seed, "train")
    weights = model.get_weights()
    state = AdamState.zeros(weights.size)
    curve = []
    for step in range(cfg.steps):
        idx = g.integers(0, n, size=cfg.batch_size)
        t = g.integers(1, schedule.T + 1, size=cfg.batch_size)
        y0 = y0_all[idx]
        eps = g.standard_normal(y0.shape)
        if model.is_conditional:
            x0 = x0_all[idx]
            null_flag = 0.0
            if cfg.null_token_prob > 0.0:
                flags = (g.random(cfg.batch_size) < cfg.null_token_prob).astype(np.float64)
                x0 = x0 * (1.0 - flags.reshape((-1,) + (1,) * (x0.ndim - 1)))
                null_flag = flags
        else:
            x0 = None
            null_flag = 0.0
        total, ls, lc, grads = loss_final(model, x0, y0, t, eps, schedule, cfg, null_flag)
        if not np.isfinite(total):
            raise TrainingDiverged(step, total)
        weights, state = adam_step(weights, grads, state, cfg.learning_rate)
        if pretrained is not None:
            weights = ema_fuse(WeightVector(weights, model.fingerprint), pretrained, cfg.ema_alpha).values
        model.set_weights(weights)
        curve.append((step, ls, lc, total))
    return TrainResult(WeightVector(weights, model.fingerprint), curve)
