"""Grayscale raster and binary mask types, PGM I/O, and basic pixel ops.

Images are single-band 8-bit grayscale throughout the package. The only
file format read or written is PGM: both the ASCII (P2) and binary (P5)
variants are accepted on input, output is always canonical P5 with
maxval 255. Masks travel as PGM with foreground stored as 255.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class PgmError(ValueError):
    """Malformed or unsupported PGM content."""


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Raster:
    """A width x height grid of gray values in [0, 255], row-major."""

    values: np.ndarray  # uint8, shape (height, width)

    def __post_init__(self):
        a = np.asarray(self.values)
        if a.ndim != 2 or a.size == 0:
            raise ValueError("raster must be a non-empty 2-D array")
        if a.dtype != np.uint8:
            if not np.issubdtype(a.dtype, np.integer):
                raise ValueError("raster values must be integers")
            if a.min() < 0 or a.max() > 255:
                raise ValueError("raster values must lie in [0, 255]")
            a = a.astype(np.uint8)
        object.__setattr__(self, "values", _as_readonly(a))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_flat(cls, width: int, height: int, flat) -> "Raster":
        a = np.asarray(flat).reshape(height, width)
        return cls(a)

    def same_as(self, other: "Raster") -> bool:
        return self.values.shape == other.values.shape and bool(
            np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class Mask:
    """Binary foreground/background grid with the same layout as Raster."""

    bits: np.ndarray  # bool, shape (height, width)

    def __post_init__(self):
        a = np.asarray(self.bits)
        if a.ndim != 2 or a.size == 0:
            raise ValueError("mask must be a non-empty 2-D array")
        if a.dtype != np.bool_:
            if not np.issubdtype(a.dtype, np.integer):
                raise ValueError("mask bits must be 0/1 integers or booleans")
            if a.min() < 0 or a.max() > 1:
                raise ValueError("mask bits must be 0 or 1")
            a = a.astype(bool)
        object.__setattr__(self, "bits", _as_readonly(a))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def foreground_count(self) -> int:
        return int(self.bits.sum())

    def same_as(self, other: "Mask") -> bool:
        return self.bits.shape == other.bits.shape and bool(
            np.array_equal(self.bits, other.bits)
        )


@dataclass(frozen=True)
class Window:
    """Square pixel window with an odd side, so it has a center pixel."""

    x0: int
    y0: int
    size: int

    def __post_init__(self):
        if self.size < 1 or self.size % 2 == 0:
            raise ValueError(f"window size must be odd and >= 1, got {self.size}")

    def in_bounds(self, width: int, height: int) -> bool:
        return (
            0 <= self.x0
            and 0 <= self.y0
            and self.x0 + self.size <= width
            and self.y0 + self.size <= height
        )


# ---------------------------------------------------------------------------
# PGM I/O
# ---------------------------------------------------------------------------

_WHITESPACE = b" \t\n\r\x0b\x0c"


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PgmError("truncated PGM header")
    return data[start:pos], pos


def _header_int(data: bytes, pos: int, what: str) -> tuple[int, int]:
    tok, pos = _next_token(data, pos)
    try:
        return int(tok), pos
    except ValueError:
        raise PgmError(f"invalid {what} in PGM header: {tok!r}") from None


def load_raster(path) -> Raster:
    """Read a P2 (ASCII) or P5 (binary) PGM with maxval <= 255.

    Values are stored as read; a maxval below 255 is not rescaled.
    """
    data = Path(path).read_bytes()
    magic, pos = _next_token(data, 0)
    if magic not in (b"P2", b"P5"):
        raise PgmError(f"not a PGM file (magic {magic!r})")
    width, pos = _header_int(data, pos, "width")
    height, pos = _header_int(data, pos, "height")
    maxval, pos = _header_int(data, pos, "maxval")
    if width < 1 or height < 1:
        raise PgmError(f"invalid PGM dimensions {width}x{height}")
    if maxval > 255:
        raise PgmError(f"unsupported maxval {maxval} (must be <= 255)")
    if maxval < 1:
        raise PgmError(f"invalid maxval {maxval}")
    count = width * height
    if magic == b"P5":
        if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
            raise PgmError("missing whitespace before P5 pixel data")
        pos += 1
        raw = data[pos : pos + count]
        if len(raw) < count:
            raise PgmError("truncated P5 pixel data")
        values = np.frombuffer(raw, dtype=np.uint8, count=count)
    else:
        try:
            fields = data[pos:].split()
            values = np.array([int(t) for t in fields[:count]], dtype=np.int64)
        except ValueError as exc:
            raise PgmError(f"invalid P2 pixel data: {exc}") from None
        if values.size < count:
            raise PgmError("truncated P2 pixel data")
    values = values.reshape(height, width)
    if values.size and int(values.max()) > maxval:
        raise PgmError("pixel value exceeds declared maxval")
    return Raster(values)


def save_raster(r: Raster, path) -> None:
    """Write canonical binary PGM: ``P5\\n<w> <h>\\n255\\n`` + row-major bytes."""
    header = f"P5\n{r.width} {r.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + r.values.tobytes())


def mask_to_raster(m: Mask) -> Raster:
    return Raster(m.bits.astype(np.uint8) * 255)


def raster_to_mask(r: Raster, threshold: int = 128) -> Mask:
    """Foreground where value >= threshold (masks are saved as {0, 255})."""
    return Mask(r.values >= threshold)


def save_mask(m: Mask, path) -> None:
    save_raster(mask_to_raster(m), path)


def load_mask(path) -> Mask:
    return raster_to_mask(load_raster(path))


# ---------------------------------------------------------------------------
# Pixel operations
# ---------------------------------------------------------------------------


def _nearest_rank(sorted_values: np.ndarray, pct: float) -> int:
    """Nearest-rank quantile of a sorted multiset; pct=0 gives the minimum."""
    n = sorted_values.size
    rank = max(1, math.ceil(pct * n))
    return int(sorted_values[min(rank, n) - 1])


def histogram_stretch(r: Raster, low_pct: float, high_pct: float) -> Raster:
    """Contrast adjustment mapping the low/high quantiles to 0 and 255.

    Gray levels between the two quantiles are mapped linearly and values
    outside are clamped. If the two quantiles coincide (for example a
    constant raster) the input is returned unchanged.
    """
    if not (0.0 <= low_pct < 0.5):
        raise ValueError(f"low_pct must be in [0, 0.5), got {low_pct}")
    if not (0.5 < high_pct <= 1.0):
        raise ValueError(f"high_pct must be in (0.5, 1], got {high_pct}")
    ordered = np.sort(r.values, axis=None)
    lo = _nearest_rank(ordered, low_pct)
    hi = _nearest_rank(ordered, high_pct)
    if hi <= lo:
        return Raster(r.values.copy())
    scaled = (r.values.astype(np.float64) - lo) * (255.0 / (hi - lo))
    return Raster(np.clip(np.rint(scaled), 0, 255).astype(np.uint8))


def flatten_window(r: Raster, w: Window) -> np.ndarray:
    """Row-major window pixels divided by 255; length is size squared."""
    if not w.in_bounds(r.width, r.height):
        raise ValueError(
            f"window {w.size}x{w.size}@({w.x0},{w.y0}) out of bounds "
            f"for {r.width}x{r.height} raster"
        )
    patch = r.values[w.y0 : w.y0 + w.size, w.x0 : w.x0 + w.size]
    return patch.astype(np.float64).ravel() / 255.0
