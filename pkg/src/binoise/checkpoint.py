"""Binary checkpoint format for trained networks.

Layout (little-endian):

    8 bytes   magic  b"BNDIFF01"
    u32       header length
    header    canonical JSON: format version, architecture, dtype, schedule
              parameters, training config snapshot, step count
    payload   weights, flat, in the declared dtype
    u64       FNV-1a hash of the payload

Canonical JSON (sorted keys, no whitespace) plus the fixed binary layout
makes save -> load -> save byte-identical, which the CLI reproducibility
contract asserts.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .nets import TinyNet
from .schedule import VarianceSchedule, build_linear_schedule
from .training import WeightVector

MAGIC = b"BNDIFF01"
FORMAT_VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    arch: dict
    weights: np.ndarray
    schedule_params: dict  # {"kind": "linear", "T": ..., "beta_start": ..., "beta_end": ...}
    train_config: dict = field(default_factory=dict)
    step_count: int = 0
    dtype: str = "float64"

    @property
    def fingerprint(self) -> str:
        return json.dumps(self.arch, sort_keys=True, separators=(",", ":"))

    def build_schedule(self) -> VarianceSchedule:
        p = self.schedule_params
        if p.get("kind", "linear") != "linear":
            raise CheckpointError(f"unsupported schedule kind {p.get('kind')!r}")
        return build_linear_schedule(int(p["T"]), float(p["beta_start"]), float(p["beta_end"]))

    def build_model(self) -> TinyNet:
        net = TinyNet(self.arch, seed=0)
        net.set_weights(np.asarray(self.weights, dtype=np.float64))
        return net

    def weight_vector(self) -> WeightVector:
        return WeightVector(np.asarray(self.weights, dtype=np.float64), self.fingerprint)


def schedule_params(T: int, beta_start: float, beta_end: float) -> dict:
    return {"kind": "linear", "T": int(T), "beta_start": float(beta_start), "beta_end": float(beta_end)}


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    weights = np.asarray(ckpt.weights, dtype=ckpt.dtype)
    header = {
        "format_version": FORMAT_VERSION,
        "arch": ckpt.arch,
        "dtype": ckpt.dtype,
        "n_weights": int(weights.size),
        "schedule": ckpt.schedule_params,
        "train_config": ckpt.train_config,
        "step_count": int(ckpt.step_count),
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = weights.astype("<" + np.dtype(ckpt.dtype).str[1:]).tobytes()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(head)))
        f.write(head)
        f.write(payload)
        f.write(struct.pack("<Q", fnv1a64(payload)))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != MAGIC:
        raise CheckpointError(f"bad magic {data[:8]!r}")
    (head_len,) = struct.unpack_from("<I", data, 8)
    head_end = 12 + head_len
    try:
        header = json.loads(data[12:head_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt header: {e}") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported format version {header.get('format_version')}")
    dtype = np.dtype(header["dtype"])
    n = int(header["n_weights"])
    payload_end = head_end + n * dtype.itemsize
    payload = data[head_end:payload_end]
    if len(payload) != n * dtype.itemsize:
        raise CheckpointError("truncated weight payload")
    (stored_hash,) = struct.unpack_from("<Q", data, payload_end)
    if fnv1a64(payload) != stored_hash:
        raise CheckpointError("payload checksum mismatch")
    weights = np.frombuffer(payload, dtype="<" + dtype.str[1:]).astype(np.float64)
    return Checkpoint(
        arch=header["arch"],
        weights=weights,
        schedule_params=header["schedule"],
        train_config=header.get("train_config", {}),
        step_count=header.get("step_count", 0),
        dtype=header["dtype"],
    )
