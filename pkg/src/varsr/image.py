"""Grayscale images, neighbor access and PGM file IO.

Images are plain 2D ``float64`` numpy arrays indexed ``[y, x]`` with
intensities nominally in ``[0, 1]``.  Files are converted at the boundary:
a sample ``v`` of a PGM with maxval ``M`` becomes ``v / M``.

All finite differences and neighbor lookups in this package use replicate
(Neumann) boundary handling: coordinates outside the grid are clamped to the
nearest valid pixel.
"""

from __future__ import annotations

import os
from typing import Sequence

import numpy as np

# (dx, dy) offsets, in the fixed order shared by every module and by the
# VWF1 weight dump.  Index 0 here is neighbor 1.
OFFSETS: tuple[tuple[int, int], ...] = (
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
)


class PGMError(ValueError):
    """Base class for malformed or unsupported PGM input."""


class PGMUnsupportedError(PGMError):
    """Magic number is not P2 or P5."""


class PGMHeaderError(PGMError):
    """Header is malformed (bad tokens, zero size, maxval out of range)."""


class PGMTruncatedError(PGMError):
    """Pixel data ends before width * height samples were read."""


def as_image(data) -> np.ndarray:
    """Validate ``data`` as an image and return it as a float64 array."""
    img = np.ascontiguousarray(data, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"image must be a non-empty 2D array, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return img


def neighbor_value(img: np.ndarray, x: int, y: int, i: int) -> float:
    """Return ``u((x, y) + delta_i)`` for neighbor index ``i`` in 1..8."""
    h, w = img.shape
    if not (0 <= x < w and 0 <= y < h):
        raise IndexError(f"pixel ({x}, {y}) outside {w}x{h} image")
    if not 1 <= i <= 8:
        raise IndexError(f"neighbor index must be in 1..8, got {i}")
    dx, dy = OFFSETS[i - 1]
    xx = min(max(x + dx, 0), w - 1)
    yy = min(max(y + dy, 0), h - 1)
    return float(img[yy, xx])


def shifted(img: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Array whose pixel (x, y) holds ``img`` at the clamped (x+dx, y+dy)."""
    h, w = img.shape
    cols = np.clip(np.arange(w) + dx, 0, w - 1)
    rows = np.clip(np.arange(h) + dy, 0, h - 1)
    return img[np.ix_(rows, cols)]


def neighbor_stack(img: np.ndarray) -> np.ndarray:
    """All eight neighbor images, shape ``(8, h, w)``, in ``OFFSETS`` order."""
    h, w = img.shape
    rows = np.clip(np.arange(-1, h + 1), 0, h - 1)
    cols = np.clip(np.arange(-1, w + 1), 0, w - 1)
    p = img[rows][:, cols]  # edge-replicated border of width 1
    out = np.empty((8, h, w), dtype=p.dtype)
    for i, (dx, dy) in enumerate(OFFSETS):
        out[i] = p[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    return out


def neighbor_sum(terms: Sequence[np.ndarray]) -> np.ndarray:
    """Sum eight per-neighbor terms in a fixed balanced order.

    Each inner addition pairs an offset with its transpose mirror, so the
    result is exactly transpose-equivariant, and eight equal terms add up
    without rounding.
    """
    t = terms
    return ((t[0] + t[7]) + (t[2] + t[5])) + ((t[1] + t[3]) + (t[4] + t[6]))


def downsample_block(img: np.ndarray, z: int) -> np.ndarray:
    """Average non-overlapping ``z x z`` blocks."""
    img = as_image(img)
    if z < 2:
        raise ValueError(f"zoom factor must be >= 2, got {z}")
    h, w = img.shape
    if h % z or w % z:
        raise ValueError(f"image size {w}x{h} is not divisible by zoom factor {z}")
    blocks = img.reshape(h // z, z, w // z, z)
    # Offsetting by the block minimum keeps constant blocks exact.
    base = blocks.min(axis=(1, 3), keepdims=True)
    return (base + (blocks - base).mean(axis=(1, 3), keepdims=True))[:, 0, :, 0]


# --- PGM -------------------------------------------------------------------


def _read_header(buf: bytes) -> tuple[bytes, list[int], int]:
    """Parse magic, width, height and maxval; return (magic, fields, offset)."""
    magic = buf[:2]
    if magic not in (b"P2", b"P5"):
        raise PGMUnsupportedError(f"unsupported magic number {magic!r}")
    pos = 2
    fields: list[int] = []
    n = len(buf)
    while len(fields) < 3:
        if pos >= n:
            raise PGMHeaderError("header ends before width, height and maxval")
        c = buf[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            end = buf.find(b"\n", pos)
            pos = n if end < 0 else end + 1
        else:
            start = pos
            while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
                pos += 1
            token = buf[start:pos]
            if not token.isdigit():
                raise PGMHeaderError(f"bad header token {token!r}")
            fields.append(int(token))
    if pos >= n or not buf[pos : pos + 1].isspace():
        if magic == b"P5":
            raise PGMHeaderError("missing whitespace after maxval")
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PGMHeaderError(f"invalid size {width}x{height}")
    if not 1 <= maxval <= 65535:
        raise PGMHeaderError(f"maxval {maxval} outside 1..65535")
    return magic, fields, pos + 1


def load_pgm(path: str | os.PathLike) -> np.ndarray:
    """Read a P2 or P5 PGM file into a ``[0, 1]`` image."""
    with open(path, "rb") as f:
        buf = f.read()
    magic, (width, height, maxval), offset = _read_header(buf)
    count = width * height
    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = count * dtype.itemsize
        if len(buf) - offset < need:
            raise PGMTruncatedError(
                f"expected {need} bytes of pixel data, found {len(buf) - offset}"
            )
        samples = np.frombuffer(buf, dtype=dtype, count=count, offset=offset)
    else:
        tokens = buf[offset:].split()
        if len(tokens) < count:
            raise PGMTruncatedError(f"expected {count} samples, found {len(tokens)}")
        try:
            samples = np.array([int(t) for t in tokens[:count]], dtype=np.int64)
        except ValueError as exc:
            raise PGMHeaderError(f"non-integer sample in P2 data: {exc}") from None
    if samples.max() > maxval or samples.min() < 0:
        raise PGMHeaderError("sample value exceeds maxval")
    return samples.reshape(height, width).astype(np.float64) / maxval


def quantize(img: np.ndarray, maxval: int) -> np.ndarray:
    """Clamp to [0, 1], scale and round half away from zero."""
    return np.floor(np.clip(img, 0.0, 1.0) * maxval + 0.5).astype(np.int64)


def save_pgm(img: np.ndarray, path: str | os.PathLike, maxval: int = 255) -> None:
    """Write ``img`` as a binary P5 PGM (16-bit big-endian when maxval=65535)."""
    if maxval not in (255, 65535):
        raise ValueError(f"maxval must be 255 or 65535, got {maxval}")
    img = as_image(img)
    h, w = img.shape
    q = quantize(img, maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n%d\n" % (w, h, maxval))
        f.write(q.astype(dtype).tobytes())
