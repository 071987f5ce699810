"""Edge detection and binary morphology used ahead of classification.

Canny runs the classic four stages: Gaussian smoothing, Sobel gradients,
non-maximum suppression with the gradient direction quantized to four
bins, and two-threshold hysteresis with 8-connected linking. Smoothing
and gradients replicate the border pixel; morphology treats everything
outside the mask as background.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .raster import Mask, Raster

_TAN_22_5 = math.tan(math.pi / 8.0)


@dataclass(frozen=True, eq=False)
class StructuringElement:
    """Odd-sided binary footprint; the center bit must be set."""

    bits: np.ndarray  # bool, shape (side, side)

    def __post_init__(self):
        a = np.asarray(self.bits).astype(bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("structuring element must be square")
        side = a.shape[0]
        if side % 2 == 0:
            raise ValueError("structuring element side must be odd")
        if not a[side // 2, side // 2]:
            raise ValueError("structuring element center bit must be set")
        a = np.ascontiguousarray(a)
        a.setflags(write=False)
        object.__setattr__(self, "bits", a)

    @property
    def side(self) -> int:
        return self.bits.shape[0]

    @classmethod
    def full(cls, side: int) -> "StructuringElement":
        return cls(np.ones((side, side), dtype=bool))


@dataclass(frozen=True)
class CannyParams:
    sigma: float
    low_thr: float
    high_thr: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not (0 < self.low_thr < self.high_thr):
            raise ValueError("thresholds must satisfy 0 < low_thr < high_thr")


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sampled 1-D Gaussian, radius ceil(3*sigma), renormalized to sum 1."""
    radius = math.ceil(3.0 * sigma)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def _convolve_rows(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    r = kernel.size // 2
    padded = np.pad(img, ((0, 0), (r, r)), mode="edge")
    out = np.zeros_like(img)
    for i, kv in enumerate(kernel):
        out += kv * padded[:, i : i + img.shape[1]]
    return out


def _smooth(img: np.ndarray, sigma: float) -> np.ndarray:
    k = gaussian_kernel(sigma)
    return _convolve_rows(_convolve_rows(img, k).T, k).T


def _sobel(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    padded = np.pad(img, 1, mode="edge")
    h, w = img.shape

    def sh(dy, dx):
        return padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    gx = (
        (sh(-1, 1) + 2.0 * sh(0, 1) + sh(1, 1))
        - (sh(-1, -1) + 2.0 * sh(0, -1) + sh(1, -1))
    )
    gy = (
        (sh(1, -1) + 2.0 * sh(1, 0) + sh(1, 1))
        - (sh(-1, -1) + 2.0 * sh(-1, 0) + sh(-1, 1))
    )
    return gx, gy


def _shift_zero(img: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Neighbor value at (x+dx, y+dy), zero outside the image."""
    padded = np.pad(img, 1, mode="constant")
    h, w = img.shape
    return padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]


def canny(r: Raster, p: CannyParams) -> Mask:
    """Edge mask of the raster; requires at least a 3x3 image.

    A pixel survives non-maximum suppression when its gradient magnitude
    is >= both neighbors along the quantized gradient direction, so exact
    plateau ties keep both pixels. Hysteresis seeds at magnitude >=
    high_thr and keeps weak pixels (>= low_thr) that connect to a seed
    through an 8-connected chain of weak pixels.
    """
    if r.width < 3 or r.height < 3:
        raise ValueError(f"canny needs at least a 3x3 raster, got {r.width}x{r.height}")
    smoothed = _smooth(r.values.astype(np.float64), p.sigma)
    gx, gy = _sobel(smoothed)
    mag = np.sqrt(gx * gx + gy * gy)

    ax = np.abs(gx)
    ay = np.abs(gy)
    horiz = ay < _TAN_22_5 * ax  # gradient mostly along x: compare x-neighbors
    vert = ax < _TAN_22_5 * ay
    diag = ~(horiz | vert) & (mag > 0)
    diag_main = diag & (gx * gy > 0)

    keep = np.zeros(mag.shape, dtype=bool)
    for sel, (dy, dx) in (
        (horiz, (0, 1)),
        (vert, (1, 0)),
        (diag_main, (1, 1)),
        (diag & ~diag_main, (1, -1)),
    ):
        n1 = _shift_zero(mag, dy, dx)
        n2 = _shift_zero(mag, -dy, -dx)
        keep |= sel & (mag >= n1) & (mag >= n2)
    nms = np.where(keep, mag, 0.0)

    strong = nms >= p.high_thr
    weak = nms >= p.low_thr
    edges = strong.copy()
    queue = deque(zip(*np.nonzero(strong)))
    h, w = edges.shape
    while queue:
        y, x = queue.popleft()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and weak[ny, nx] and not edges[ny, nx]:
                    edges[ny, nx] = True
                    queue.append((ny, nx))
    return Mask(edges)


def _apply_se(m: Mask, se: StructuringElement, all_of: bool) -> np.ndarray:
    h, w = m.bits.shape
    r = se.side // 2
    padded = np.pad(m.bits, r, mode="constant", constant_values=False)
    acc = np.ones((h, w), dtype=bool) if all_of else np.zeros((h, w), dtype=bool)
    for dy in range(se.side):
        for dx in range(se.side):
            if not se.bits[dy, dx]:
                continue
            view = padded[dy : dy + h, dx : dx + w]
            acc = acc & view if all_of else acc | view
    return acc


def erode(m: Mask, se: StructuringElement) -> Mask:
    """Keep a pixel only when the whole footprint sits on foreground."""
    return Mask(_apply_se(m, se, all_of=True))


def dilate(m: Mask, se: StructuringElement) -> Mask:
    """Set a pixel when any footprint bit covers a foreground pixel."""
    return Mask(_apply_se(m, se, all_of=False))


def opening(m: Mask, se: StructuringElement) -> Mask:
    """Erosion followed by dilation; removes specks smaller than the footprint."""
    return dilate(erode(m, se), se)
