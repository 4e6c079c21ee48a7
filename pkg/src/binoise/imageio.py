"""Binary PPM (3-channel) / PGM (1-channel) image files, 8-bit.

The value range maps linearly onto codes 0..255 with round-half-up, so the
range endpoints hit codes 0 and 255 exactly. Reading inverts each code to
the midpoint of its bin (code / 255 of the range), bounding the write-read
roundtrip error by half a quantization step. These formats are trivially
byte-diffable, which the reproducibility contract relies on.
"""

from __future__ import annotations

import numpy as np

from .diffusion import DEFAULT_VALUE_RANGE


class ImageFormatError(ValueError):
    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


def write_image(path, img: np.ndarray, value_range=DEFAULT_VALUE_RANGE) -> None:
    """Write (H, W) as PGM or (C=1|3, H, W) as PGM/PPM."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[None]
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise ValueError(f"expected (H, W) or (1|3, H, W), got shape {img.shape}")
    lo, hi = value_range
    if np.any(img < lo - 1e-12) or np.any(img > hi + 1e-12):
        raise ValueError(f"image values outside declared range [{lo}, {hi}]")
    u = (img - lo) / (hi - lo)
    codes = np.floor(u * 255.0 + 0.5).clip(0, 255).astype(np.uint8)
    c, h, w = codes.shape
    magic = b"P5" if c == 1 else b"P6"
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n255\n" % (w, h))
        # PPM interleaves channels per pixel: HWC order
        f.write(codes.transpose(1, 2, 0).tobytes())


def read_image(path, value_range=DEFAULT_VALUE_RANGE) -> np.ndarray:
    """Read a binary PGM/PPM written by write_image; returns (C, H, W) floats."""
    with open(path, "rb") as f:
        data = f.read()
    pos = 0

    def token():
        nonlocal pos
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            return token()
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("unexpected end of header", offset=start)
        return data[start:pos]

    magic = token()
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"unsupported magic {magic!r}", offset=0)
    channels = 1 if magic == b"P5" else 3
    try:
        w, h, maxval = int(token()), int(token()), int(token())
    except ValueError as e:
        raise ImageFormatError(f"malformed header: {e}", offset=pos) from None
    if maxval != 255:
        raise ImageFormatError(f"only maxval 255 supported, got {maxval}", offset=pos)
    pos += 1  # single whitespace after maxval
    expected = w * h * channels
    payload = data[pos : pos + expected]
    if len(payload) != expected:
        raise ImageFormatError(
            f"truncated payload: expected {expected} bytes, got {len(payload)}", offset=pos + len(payload)
        )
    codes = np.frombuffer(payload, dtype=np.uint8).reshape(h, w, channels)
    lo, hi = value_range
    return lo + (hi - lo) * codes.transpose(2, 0, 1).astype(np.float64) / 255.0
