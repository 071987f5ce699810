"""Gray-level co-occurrence matrices and the 13 Haralick texture statistics.

The statistics follow Haralick, Shanmugam & Dinstein (1973), indexed from
gray level 0: energy (angular second moment), correlation, inertia
(contrast), entropy, inverse difference moment, sum average, sum variance,
sum entropy, difference average, difference variance, difference entropy,
and the two information measures of correlation. All logarithms are base
2 with 0*log(0) taken as 0. Sum variance is the variance of the (i+j)
distribution about the sum average (the common reading of the original
f7). Degenerate inputs stay finite: correlation is 0 when either marginal
variance vanishes, and the first information measure is 0 when both
marginal entropies are 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import Raster, Window

FEATURE_NAMES = (
    "energy",
    "correlation",
    "inertia",
    "entropy",
    "inverse_difference_moment",
    "sum_average",
    "sum_variance",
    "sum_entropy",
    "difference_average",
    "difference_variance",
    "difference_entropy",
    "imc1",
    "imc2",
)


@dataclass(frozen=True, eq=False)
class GlcmMatrix:
    """Normalized co-occurrence matrix for one pixel offset."""

    levels: int
    cells: np.ndarray  # float64, shape (levels, levels), sums to 1
    offset: tuple[int, int]
    symmetric: bool

    def __post_init__(self):
        cells = np.ascontiguousarray(np.asarray(self.cells, dtype=np.float64))
        if cells.shape != (self.levels, self.levels):
            raise ValueError("GLCM cells must be a levels x levels matrix")
        if self.levels < 2:
            raise ValueError("GLCM needs at least 2 gray levels")
        if (cells < 0).any():
            raise ValueError("GLCM cells must be non-negative")
        if abs(cells.sum() - 1.0) > 1e-9:
            raise ValueError("GLCM cells must sum to 1")
        if self.symmetric and not np.array_equal(cells, cells.T):
            raise ValueError("symmetric GLCM must equal its transpose")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)


@dataclass(frozen=True)
class HaralickVector:
    energy: float
    correlation: float
    inertia: float
    entropy: float
    inverse_difference_moment: float
    sum_average: float
    sum_variance: float
    sum_entropy: float
    difference_average: float
    difference_variance: float
    difference_entropy: float
    imc1: float
    imc2: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES])


def quantize(values: np.ndarray, levels: int) -> np.ndarray:
    """Map gray values in [0, 255] to levels via floor(v * levels / 256)."""
    return (values.astype(np.int64) * levels) // 256


def compute_glcm(
    r: Raster,
    offset: tuple[int, int],
    levels: int = 8,
    symmetric: bool = True,
    window: Window | None = None,
) -> GlcmMatrix:
    """Co-occurrence matrix of (quantized) pixel pairs at the given offset.

    Pairs are pixel positions p inside the region with p+offset also
    inside; a symmetric matrix counts each pair in both orders. With
    ``window=None`` the whole raster is the region.
    """
    dx, dy = offset
    if (dx, dy) == (0, 0):
        raise ValueError("GLCM offset must be non-zero")
    if levels < 2:
        raise ValueError("GLCM needs at least 2 gray levels")
    if window is None:
        region = r.values
    else:
        if not window.in_bounds(r.width, r.height):
            raise ValueError("GLCM window out of raster bounds")
        region = r.values[
            window.y0 : window.y0 + window.size, window.x0 : window.x0 + window.size
        ]
    h, w = region.shape
    if w <= abs(dx) or h <= abs(dy):
        raise ValueError(
            f"region {w}x{h} holds no pixel pair for offset ({dx},{dy})"
        )
    q = quantize(region, levels)
    ax, ay = max(0, -dx), max(0, -dy)
    a = q[ay : h - max(0, dy), ax : w - max(0, dx)]
    b = q[ay + dy : h - max(0, dy) + dy, ax + dx : w - max(0, dx) + dx]
    codes = (a * levels + b).ravel()
    counts = np.bincount(codes, minlength=levels * levels).reshape(levels, levels)
    if symmetric:
        counts = counts + counts.T
    return GlcmMatrix(levels, counts / counts.sum(), (dx, dy), symmetric)


def _plogp(p: np.ndarray) -> np.ndarray:
    return np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)


def haralick_features_array(probs: np.ndarray) -> np.ndarray:
    """All 13 statistics for a batch of GLCMs, shape (n, L, L) -> (n, 13).

    Column order matches FEATURE_NAMES.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim == 2:
        p = p[None, :, :]
    n, levels, _ = p.shape
    i = np.arange(levels, dtype=np.float64)

    px = p.sum(axis=2)  # (n, L)
    py = p.sum(axis=1)
    mu_x = px @ i
    mu_y = py @ i
    var_x = ((i[None, :] - mu_x[:, None]) ** 2 * px).sum(axis=1)
    var_y = ((i[None, :] - mu_y[:, None]) ** 2 * py).sum(axis=1)

    energy = (p * p).sum(axis=(1, 2))
    diff_sq = (i[:, None] - i[None, :]) ** 2
    inertia = (p * diff_sq).sum(axis=(1, 2))
    idm = (p / (1.0 + diff_sq)).sum(axis=(1, 2))
    entropy = -_plogp(p).sum(axis=(1, 2))

    cross = (p * (i[:, None] * i[None, :])).sum(axis=(1, 2))
    sigma = np.sqrt(var_x * var_y)
    correlation = np.where(sigma > 0, (cross - mu_x * mu_y) / np.where(sigma > 0, sigma, 1.0), 0.0)

    # distributions of i+j and |i-j|
    sum_idx = (i[:, None] + i[None, :]).astype(np.intp).ravel()
    diff_idx = np.abs(i[:, None] - i[None, :]).astype(np.intp).ravel()
    flat = p.reshape(n, levels * levels)
    p_sum = np.zeros((n, 2 * levels - 1))
    p_diff = np.zeros((n, levels))
    np.add.at(p_sum, (slice(None), sum_idx), flat)
    np.add.at(p_diff, (slice(None), diff_idx), flat)

    ks = np.arange(2 * levels - 1, dtype=np.float64)
    kd = np.arange(levels, dtype=np.float64)
    sum_average = p_sum @ ks
    sum_variance = ((ks[None, :] - sum_average[:, None]) ** 2 * p_sum).sum(axis=1)
    sum_entropy = -_plogp(p_sum).sum(axis=1)
    difference_average = p_diff @ kd
    difference_variance = ((kd[None, :] - difference_average[:, None]) ** 2 * p_diff).sum(axis=1)
    difference_entropy = -_plogp(p_diff).sum(axis=1)

    hx = -_plogp(px).sum(axis=1)
    hy = -_plogp(py).sum(axis=1)
    hxy1 = hx + hy  # -sum_ij p_ij*log(px_i*py_j) collapses to HX+HY
    outer = px[:, :, None] * py[:, None, :]
    hxy2 = -_plogp(outer).sum(axis=(1, 2))
    hmax = np.maximum(hx, hy)
    imc1 = np.where(hmax > 0, (entropy - hxy1) / np.where(hmax > 0, hmax, 1.0), 0.0)
    imc2 = np.sqrt(np.maximum(0.0, 1.0 - np.exp(-2.0 * (hxy2 - entropy))))

    return np.stack(
        [
            energy,
            correlation,
            inertia,
            entropy,
            idm,
            sum_average,
            sum_variance,
            sum_entropy,
            difference_average,
            difference_variance,
            difference_entropy,
            imc1,
            imc2,
        ],
        axis=1,
    )


def haralick_features(g: GlcmMatrix) -> HaralickVector:
    row = haralick_features_array(g.cells[None, :, :])[0]
    return HaralickVector(*(float(v) for v in row))


def glcm_window_counts(
    quantized: np.ndarray,
    window_size: int,
    offset: tuple[int, int],
    symmetric: bool,
    levels: int,
) -> np.ndarray:
    """Pair counts for every window position of an image at once.

    Returns int32 of shape (H - s + 1, W - s + 1, levels**2) where entry
    [y0, x0, i*levels + j] is the count that compute_glcm would produce
    (before normalization) for the window with top-left (x0, y0). Uses one
    summed-area table per pair code, so cost is O(levels^2 * H * W).
    """
    dx, dy = offset
    if (dx, dy) == (0, 0):
        raise ValueError("GLCM offset must be non-zero")
    h, w = quantized.shape
    s = window_size
    if s > w or s > h or s <= abs(dx) or s <= abs(dy):
        raise ValueError("window too small for image or offset")
    ax, ay = max(0, -dx), max(0, -dy)
    # code image on pair anchors: anchor p pairs with p+offset
    code = np.full((h, w), -1, dtype=np.int32)
    a = quantized[ay : h - max(0, dy), ax : w - max(0, dx)]
    b = quantized[ay + dy : h - max(0, dy) + dy, ax + dx : w - max(0, dx) + dx]
    code[ay : h - max(0, dy), ax : w - max(0, dx)] = a * levels + b

    out_h, out_w = h - s + 1, w - s + 1
    box_h, box_w = s - abs(dy), s - abs(dx)
    counts = np.zeros((out_h, out_w, levels * levels), dtype=np.int32)
    sat = np.zeros((h + 1, w + 1), dtype=np.int64)
    for c in range(levels * levels):
        np.cumsum(np.cumsum(code == c, axis=0), axis=1, out=sat[1:, 1:])
        y0 = ay
        x0 = ax
        top = sat[y0 : y0 + out_h, x0 : x0 + out_w]
        bottom = sat[y0 + box_h : y0 + box_h + out_h, x0 + box_w : x0 + box_w + out_w]
        right = sat[y0 : y0 + out_h, x0 + box_w : x0 + box_w + out_w]
        below = sat[y0 + box_h : y0 + box_h + out_h, x0 : x0 + out_w]
        counts[:, :, c] = (bottom - right - below + top).astype(np.int32)
    if symmetric:
        perm = (
            np.arange(levels * levels).reshape(levels, levels).T.ravel()
        )
        counts = counts + counts[:, :, perm]
    return counts
