"""Self-organizing map for clustering accepted feature vectors.

Rectangular Kohonen grid, Gaussian neighborhood over Euclidean grid
distance, winner chosen by minimum Euclidean distance with ties going to
the lowest row-major unit index. Learning rate decays exponentially from
lr0 to lr0/100 and the radius from radius0 to 0.5 over the epochs, so
neither ever reaches zero mid-run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import SplitMix64


@dataclass(eq=False)
class SomGrid:
    rows: int
    cols: int
    dim: int
    codebook: np.ndarray  # (rows*cols, dim) float64, row-major units
    trained: bool = False

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.dim < 1:
            raise ValueError("SOM grid dimensions must be positive")
        cb = np.asarray(self.codebook, dtype=np.float64)
        if cb.shape != (self.rows * self.cols, self.dim):
            raise ValueError(
                f"codebook shape {cb.shape} does not match "
                f"{self.rows}x{self.cols} grid of dim {self.dim}"
            )
        if not np.isfinite(cb).all():
            raise ValueError("codebook entries must be finite")
        object.__setattr__(self, "codebook", cb)


@dataclass(frozen=True)
class SomConfig:
    epochs: int
    lr0: float = 0.5
    radius0: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not (0 < self.lr0 <= 1):
            raise ValueError("lr0 must be in (0, 1]")
        if self.radius0 <= 0:
            raise ValueError("radius0 must be positive")


def train_som(samples, rows: int, cols: int, cfg: SomConfig) -> SomGrid:
    """Fit a rows x cols codebook to the samples.

    The codebook starts as seeded uniform noise inside each dimension's
    sample range (unit by unit, dimension by dimension). Every epoch
    visits all samples in a fresh seeded shuffle and pulls each winner and
    its Gaussian neighborhood toward the sample.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("need a non-empty 2-D sample array")
    n, dim = x.shape
    if not np.isfinite(x).all():
        raise ValueError("samples must be finite")

    rng = SplitMix64(cfg.seed)
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    units = rows * cols
    codebook = np.empty((units, dim))
    for u in range(units):
        for d in range(dim):
            codebook[u, d] = rng.uniform(lo[d], hi[d])

    grid_r, grid_c = np.divmod(np.arange(units), cols)
    order = list(range(n))
    for epoch in range(cfg.epochs):
        t = epoch / (cfg.epochs - 1) if cfg.epochs > 1 else 0.0
        lr = cfg.lr0 * (0.01**t)
        radius = cfg.radius0 * ((0.5 / cfg.radius0) ** t) if cfg.radius0 > 0.5 else cfg.radius0
        rng.shuffle(order)
        for idx in order:
            v = x[idx]
            d2 = ((codebook - v) ** 2).sum(axis=1)
            bmu = int(np.argmin(d2))
            gd2 = (grid_r - grid_r[bmu]) ** 2 + (grid_c - grid_c[bmu]) ** 2
            h = np.exp(-gd2 / (2.0 * radius * radius))
            codebook += (lr * h)[:, None] * (v - codebook)
    return SomGrid(rows, cols, dim, codebook, trained=True)


def best_matching_unit(g: SomGrid, v) -> tuple[int, int, float]:
    """Grid cell whose codebook vector is nearest to v, with its distance."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size != g.dim:
        raise ValueError(f"vector has {v.size} values, codebook dim is {g.dim}")
    d2 = ((g.codebook - v) ** 2).sum(axis=1)
    bmu = int(np.argmin(d2))
    return bmu // g.cols, bmu % g.cols, float(np.sqrt(d2[bmu]))


def bmu_index(g: SomGrid, v) -> int:
    """Row-major index of the best matching unit."""
    r, c, _ = best_matching_unit(g, v)
    return r * g.cols + c
