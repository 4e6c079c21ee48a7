"""Tiny trainable denoising networks with hand-written backpropagation.

Two architectures, both exposing the Denoiser interface plus explicit
forward/backward passes over a flat weight vector:

  - an MLP for flat-vector data (input = [y_t, condition?, time embedding]);
  - a small stack of 3x3 same-padding convolutions for CHW image data, with
    the time embedding broadcast as constant extra input channels.

Timestep conditioning uses a fixed sinusoidal embedding. Conditional nets
carry one extra embedding slot: a binary null flag that marks the reserved
"no condition" token, so an all-zeros condition image with flag 0 is
distinguishable from the null token (flag 1, zeroed condition).

Both architectures add a learned input gate: a per-timestep scalar
coefficient (a linear readout of the time embedding) multiplying the noisy
input, added to the stack's output. The ideal noise estimate is dominated
by a √(1−ᾱ_t)·y_t term that saturating hidden layers represent poorly; the
gate carries it directly and leaves the stack the nonlinear residual.

All weights and activations are float64; forward and backward are
deterministic for fixed weights and inputs.
"""

from __future__ import annotations

import json

import numpy as np

from .denoiser import Denoiser

# ---------------------------------------------------------------------------
# layers


class Dense:
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        scale = np.sqrt(1.0 / in_dim)
        self.W = rng.normal(0.0, scale, size=(out_dim, in_dim))
        self.b = np.zeros(out_dim)

    @property
    def params(self):
        return [self.W, self.b]

    def forward(self, x):
        return x @ self.W.T + self.b, x

    def backward(self, dy, cache):
        x = cache
        dx = dy @ self.W
        return dx, [dy.T @ x, dy.sum(axis=0)]


class Tanh:
    params: list = []

    def forward(self, x):
        y = np.tanh(x)
        return y, y

    def backward(self, dy, cache):
        return dy * (1.0 - cache * cache), []


class Conv2d:
    """3x3 (or k x k, odd k) convolution with same padding, via im2col."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int, rng: np.random.Generator):
        if kernel % 2 != 1:
            raise ValueError("kernel size must be odd for same padding")
        fan_in = in_ch * kernel * kernel
        self.W = rng.normal(0.0, np.sqrt(1.0 / fan_in), size=(out_ch, in_ch, kernel, kernel))
        self.b = np.zeros(out_ch)
        self.kernel = kernel

    @property
    def params(self):
        return [self.W, self.b]

    def _wmat(self):
        # flat patch layout is (i, j, c); align the weight matrix with it
        out_ch = self.W.shape[0]
        return self.W.transpose(0, 2, 3, 1).reshape(out_ch, -1)

    def _im2col(self, x):
        """(N, C, H, W) -> (N*H*W, k*k*C) patch matrix, rows in NHW order."""
        k = self.kernel
        p = k // 2
        n, c, h, w = x.shape
        xp = np.pad(x.transpose(0, 2, 3, 1), ((0, 0), (p, p), (p, p), (0, 0)))
        cols = np.empty((n, h, w, k * k * c))
        for i in range(k):
            for j in range(k):
                cols[..., (i * k + j) * c : (i * k + j + 1) * c] = xp[:, i : i + h, j : j + w, :]
        return cols.reshape(n * h * w, k * k * c)

    def forward(self, x):
        n, c, h, w = x.shape
        cols = self._im2col(x)
        out_ch = self.W.shape[0]
        y = cols @ self._wmat().T + self.b
        return y.reshape(n, h, w, out_ch).transpose(0, 3, 1, 2), (cols, (n, c, h, w))

    def backward(self, dy, cache):
        cols, (n, c, h, w) = cache
        k = self.kernel
        p = k // 2
        out_ch = dy.shape[1]
        dyf = np.ascontiguousarray(dy.transpose(0, 2, 3, 1)).reshape(n * h * w, out_ch)
        dW = (dyf.T @ cols).reshape(out_ch, k, k, c).transpose(0, 3, 1, 2)
        db = dyf.sum(axis=0)
        dcols = (dyf @ self._wmat()).reshape(n, h, w, k, k, c)
        dxp = np.zeros((n, h + 2 * p, w + 2 * p, c))
        for i in range(k):
            for j in range(k):
                dxp[:, i : i + h, j : j + w, :] += dcols[:, :, :, i, j, :]
        return dxp[:, p : p + h, p : p + w, :].transpose(0, 3, 1, 2), [dW, db]


# ---------------------------------------------------------------------------
# timestep embedding


def sinusoidal_embedding(t, dim: int) -> np.ndarray:
    """Fixed sin/cos features of the integer timestep, shape (..., dim)."""
    if dim < 2 or dim % 2 != 0:
        raise ValueError("embedding dim must be even and >= 2")
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half - 1, 1))
    angles = np.asarray(t, dtype=np.float64)[..., None] * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)


# ---------------------------------------------------------------------------
# network


class TinyNet(Denoiser):
    """A small denoising network described by an `arch` dict.

    arch keys:
      kind: "mlp" | "conv"
      data_shape: shape of one sample (e.g. [8] or [3, 16, 16])
      conditional: bool (condition has the same shape as the data)
      temb_dim: sinusoidal embedding width
      hidden: list of hidden layer widths (mlp)
      channels: list of hidden channel counts (conv)
      kernel: conv kernel size (conv)
    """

    def __init__(self, arch: dict, seed: int = 0):
        from . import rng as _rng

        self.arch = dict(arch)
        self.data_shape = tuple(int(d) for d in arch["data_shape"])
        self.is_conditional = bool(arch["conditional"])
        self.temb_dim = int(arch.get("temb_dim", 8))
        # conditional nets get one extra embedding slot: the null-token flag
        self.emb_width = self.temb_dim + (1 if self.is_conditional else 0)
        self.kind = arch["kind"]
        g = _rng.stream(seed, "net-init")

        if self.kind == "mlp":
            d = int(np.prod(self.data_shape))
            in_dim = d * (2 if self.is_conditional else 1) + self.emb_width
            self.layers = []
            prev = in_dim
            for width in arch.get("hidden", [256, 256]):
                self.layers.append(Dense(prev, int(width), g))
                self.layers.append(Tanh())
                prev = int(width)
            self.layers.append(Dense(prev, d, g))
        elif self.kind == "conv":
            if len(self.data_shape) != 3:
                raise ValueError("conv nets need CHW data_shape")
            c = self.data_shape[0]
            kernel = int(arch.get("kernel", 3))
            in_ch = c * (2 if self.is_conditional else 1) + self.emb_width
            self.layers = []
            prev = in_ch
            for ch in arch.get("channels", [16, 16]):
                self.layers.append(Conv2d(prev, int(ch), kernel, g))
                self.layers.append(Tanh())
                prev = int(ch)
            self.layers.append(Conv2d(prev, c, kernel, g))
        else:
            raise ValueError(f"unknown net kind {self.kind!r}")

        self.y_gate = bool(arch.get("y_gate", True))
        if self.y_gate:
            # coefficient starts at 0.5 with no timestep dependence
            self.gate_w = np.zeros(self.emb_width)
            self.gate_b = np.array([0.5])

    # -- weight plumbing ----------------------------------------------------

    @property
    def fingerprint(self) -> str:
        return json.dumps(self.arch, sort_keys=True, separators=(",", ":"))

    def _all_params(self):
        params = [p for layer in self.layers for p in layer.params]
        if self.y_gate:
            params += [self.gate_w, self.gate_b]
        return params

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self._all_params())

    def get_weights(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self._all_params()])

    def set_weights(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} weights, got {flat.shape}")
        i = 0
        for p in self._all_params():
            p[...] = flat[i : i + p.size].reshape(p.shape)
            i += p.size

    # -- forward / backward -------------------------------------------------

    def _assemble(self, y, t, condition, null_flag):
        """Stack network inputs; returns (x, batched) with x always batched."""
        y = np.asarray(y, dtype=np.float64)
        batched = y.ndim == len(self.data_shape) + 1
        if not batched:
            if y.shape != self.data_shape:
                raise ValueError(f"input shape {y.shape} != data shape {self.data_shape}")
            y = y[None]
        elif y.shape[1:] != self.data_shape:
            raise ValueError(f"input shape {y.shape[1:]} != data shape {self.data_shape}")
        n = y.shape[0]

        if self.is_conditional:
            if condition is None:
                raise ValueError("conditional net called without a condition")
            condition = np.asarray(condition, dtype=np.float64)
            if condition.ndim == len(self.data_shape):
                condition = np.broadcast_to(condition[None], y.shape)
            if condition.shape != y.shape:
                raise ValueError(f"condition shape {condition.shape} incompatible with {y.shape}")
        elif condition is not None:
            raise ValueError("unconditional net does not accept a condition")

        tt = np.broadcast_to(np.asarray(t, dtype=np.float64), (n,))
        emb = sinusoidal_embedding(tt, self.temb_dim)
        if self.is_conditional:
            flag = np.broadcast_to(np.asarray(null_flag, dtype=np.float64), (n,))
            emb = np.concatenate([emb, flag[:, None]], axis=-1)

        if self.kind == "mlp":
            parts = [y.reshape(n, -1)]
            if self.is_conditional:
                parts.append(condition.reshape(n, -1))
            parts.append(emb)
            x = np.concatenate(parts, axis=-1)
        else:
            _, h, w = self.data_shape
            parts = [y]
            if self.is_conditional:
                parts.append(condition)
            parts.append(np.broadcast_to(emb[:, :, None, None], (n, self.emb_width, h, w)))
            x = np.concatenate(parts, axis=1)
        return x, y, emb, batched

    def forward(self, y, t, condition=None, null_flag=0.0):
        """Full forward pass; returns (eps_hat, caches) for a later backward."""
        x, y_b, emb, batched = self._assemble(y, t, condition, null_flag)
        layer_caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            layer_caches.append(cache)
        out = x.reshape((x.shape[0],) + self.data_shape)
        if self.y_gate:
            coef = emb @ self.gate_w + self.gate_b
            out = out + coef.reshape((-1,) + (1,) * len(self.data_shape)) * y_b
        caches = (layer_caches, y_b, emb)
        if not batched:
            out = out[0]
        return out, caches

    def backward(self, dout, caches) -> np.ndarray:
        """Gradient of a scalar loss w.r.t. the flat weight vector.

        dout is the loss gradient w.r.t. the forward output, batched.
        """
        layer_caches, y_b, emb = caches
        n = dout.shape[0] if dout.ndim == len(self.data_shape) + 1 else 1
        dy = np.asarray(dout, dtype=np.float64).reshape(n, *self.data_shape)
        gate_grads = []
        if self.y_gate:
            dcoef = (dy * y_b).reshape(n, -1).sum(axis=1)
            gate_grads = [emb.T @ dcoef, np.array([dcoef.sum()])]
        if self.kind == "mlp":
            dy = dy.reshape(n, -1)
        grads = []
        for layer, cache in zip(reversed(self.layers), reversed(layer_caches)):
            dy, pgrads = layer.backward(dy, cache)
            grads.extend(reversed(pgrads))
        return np.concatenate([g.ravel() for g in reversed(grads)] + gate_grads)

    def __call__(self, y_t, t, condition=None):
        out, _ = self.forward(y_t, t, condition)
        return out


class NullTokenView(Denoiser):
    """Unconditional view of a conditional net via the reserved null token.

    Shares the wrapped net's weights; calls it with a zeroed condition and the
    null flag raised.
    """

    is_conditional = False

    def __init__(self, net: TinyNet):
        if not net.is_conditional:
            raise ValueError("null-token view requires a conditional net")
        self.net = net

    def __call__(self, y_t, t, condition=None):
        if condition is not None:
            raise ValueError("unconditional denoiser does not accept a condition")
        y = np.asarray(y_t)
        null_cond = np.zeros(y.shape if y.ndim > len(self.net.data_shape) else self.net.data_shape)
        out, _ = self.net.forward(y_t, t, null_cond, null_flag=1.0)
        return out

    @property
    def n_params(self) -> int:
        # weights are shared, not duplicated
        return 0


def with_null_token(net: TinyNet) -> NullTokenView:
    return NullTokenView(net)


def make_mlp(data_shape, conditional: bool, hidden=(256, 256), temb_dim: int = 8, seed: int = 0) -> TinyNet:
    arch = {
        "kind": "mlp",
        "data_shape": list(np.atleast_1d(data_shape).astype(int)) if np.isscalar(data_shape) else list(data_shape),
        "conditional": bool(conditional),
        "hidden": list(hidden),
        "temb_dim": int(temb_dim),
    }
    return TinyNet(arch, seed=seed)


def make_conv(data_shape=(3, 16, 16), conditional: bool = False, channels=(16, 16), temb_dim: int = 8, kernel: int = 3, seed: int = 0) -> TinyNet:
    arch = {
        "kind": "conv",
        "data_shape": list(data_shape),
        "conditional": bool(conditional),
        "channels": list(channels),
        "temb_dim": int(temb_dim),
        "kernel": int(kernel),
    }
    return TinyNet(arch, seed=seed)
