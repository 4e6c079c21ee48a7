"""Procedural toy datasets and degradation operators.

Images are CHW float arrays in [-1, 1], default 3x16x16. The generator draws
a soft background gradient and a few random axis-aligned rectangles and
filled circles per image. Degradations mirror common restoration tasks:

  grayscale    - per-pixel channel mean, replicated back to 3 channels
                 (colorization condition)
  downsample   - box-downsample by an integer factor, nearest-upsample back
                 (super-resolution condition)
  rain_streaks - additive bright diagonal line segments, clipped to range
                 (deraining condition)

Everything is reproducible from explicit seeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .guidance import lowpass_project

KINDS = ("grayscale", "downsample", "rain_streaks")


@dataclass
class DegradationOp:
    kind: str
    factor: int = 2                 # downsample only
    streak_count: int = 6           # rain only
    streak_intensity: float = 0.8   # rain only
    streak_length: int = 10         # rain only
    seed: int = 0                   # rain only (streak placement)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown degradation {self.kind!r}; expected one of {KINDS}")
        if self.kind == "downsample" and self.factor < 1:
            raise ValueError("downsample factor must be >= 1")
        if self.kind == "rain_streaks" and self.streak_count < 0:
            raise ValueError("streak_count must be >= 0")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "factor": self.factor,
            "streak_count": self.streak_count,
            "streak_intensity": self.streak_intensity,
            "streak_length": self.streak_length,
            "seed": self.seed,
        }


@dataclass
class ToyDatasetSpec:
    count: int
    seed: int = 0
    size: int = 16
    channels: int = 3

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"count must be positive, got {self.count}")
        if self.size < 8:
            raise ValueError("size must be at least 8")


@dataclass
class PairedDataset:
    x0: np.ndarray  # degraded / condition, (N, C, H, W)
    y0: np.ndarray  # clean target, (N, C, H, W)

    def __len__(self):
        return self.y0.shape[0]


# ---------------------------------------------------------------------------
# generation


def _draw_image(g: np.random.Generator, size: int) -> np.ndarray:
    """One random image: gradient background + 2..4 colored shapes, in [-1, 1]."""
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    img = np.empty((3, size, size))
    for c in range(3):
        a, b, o = g.uniform(-0.6, 0.6, size=3)
        img[c] = o + a * xx + b * yy
    for _ in range(g.integers(2, 5)):
        color = g.uniform(-1.0, 1.0, size=3)
        if g.random() < 0.5:
            x0s, y0s = g.integers(0, size - 4, size=2)
            wdt, hgt = g.integers(3, max(4, size // 2), size=2)
            mask = np.zeros((size, size), dtype=bool)
            mask[y0s : y0s + hgt, x0s : x0s + wdt] = True
        else:
            cx, cy = g.uniform(2, size - 3, size=2)
            r = g.uniform(2, size / 3)
            mask = (xx * (size - 1) - cx) ** 2 + (yy * (size - 1) - cy) ** 2 <= r * r
        img[:, mask] = color[:, None]
    return np.clip(img, -1.0, 1.0)


def gen_images(spec: ToyDatasetSpec) -> np.ndarray:
    g = rng.stream(spec.seed, "toy-images")
    return np.stack([_draw_image(g, spec.size) for _ in range(spec.count)])


def _rain_mask(g: np.random.Generator, size: int, op: DegradationOp) -> np.ndarray:
    mask = np.zeros((size, size))
    for _ in range(op.streak_count):
        x = g.uniform(0, size - 1)
        y = g.uniform(0, size - 1)
        angle = g.uniform(np.deg2rad(50), np.deg2rad(80))
        dx, dy = np.cos(angle), np.sin(angle)
        for s in range(op.streak_length):
            xi, yi = int(round(x + s * dx)), int(round(y + s * dy))
            if 0 <= xi < size and 0 <= yi < size:
                mask[yi, xi] = 1.0
    return mask


def degrade(op: DegradationOp, y0: np.ndarray) -> np.ndarray:
    """Apply a degradation to one image (C, H, W) or a batch (N, C, H, W)."""
    y0 = np.asarray(y0, dtype=np.float64)
    if y0.ndim == 3:
        return degrade(op, y0[None])[0]
    if y0.ndim != 4:
        raise ValueError(f"expected (C, H, W) or (N, C, H, W), got {y0.shape}")
    if op.kind == "grayscale":
        gray = y0.mean(axis=1, keepdims=True)
        return np.broadcast_to(gray, y0.shape).copy()
    if op.kind == "downsample":
        return lowpass_project(y0, op.factor)
    # rain_streaks: per-image placement from (op.seed, index)
    out = y0.copy()
    size = y0.shape[-1]
    for i in range(y0.shape[0]):
        g = rng.stream(op.seed, "rain", i)
        mask = _rain_mask(g, size, op)
        out[i] = np.clip(out[i] + op.streak_intensity * mask[None], -1.0, 1.0)
    return out


def gen_dataset(spec: ToyDatasetSpec, op: DegradationOp) -> PairedDataset:
    y0 = gen_images(spec)
    return PairedDataset(x0=degrade(op, y0), y0=y0)


def split_dataset(ds: PairedDataset, n_test: int) -> tuple[PairedDataset, PairedDataset]:
    """Deterministic disjoint split: last n_test samples become the test set."""
    if not 0 < n_test < len(ds):
        raise ValueError(f"n_test must be in (0, {len(ds)}), got {n_test}")
    n_train = len(ds) - n_test
    train = PairedDataset(ds.x0[:n_train], ds.y0[:n_train])
    test = PairedDataset(ds.x0[n_train:], ds.y0[n_train:])
    return train, test


def op_for_task(task: str, seed: int = 0) -> DegradationOp:
    """Canonical degradation per named restoration task."""
    if task == "colorize":
        return DegradationOp("grayscale")
    if task == "superres":
        return DegradationOp("downsample", factor=4)
    if task == "derain":
        return DegradationOp("rain_streaks", seed=seed)
    raise ValueError(f"unknown task {task!r}; expected colorize, superres, or derain")
