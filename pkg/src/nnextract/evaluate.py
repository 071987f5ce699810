"""Accuracy assessment: confusion matrix, overall accuracy, Cohen's kappa,
and areal-extent comparison."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import Mask


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are reference (truth) classes, columns are predictions."""

    labels: tuple[str, ...]
    counts: np.ndarray  # (k, k) int64

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        k = len(self.labels)
        if k < 2 or c.shape != (k, k):
            raise ValueError("confusion matrix must be k x k with k >= 2 labels")
        if (c < 0).any():
            raise ValueError("confusion counts must be non-negative")
        if c.sum() < 1:
            raise ValueError("confusion matrix must contain at least one sample")
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class AccuracyReport:
    overall_accuracy: float
    kappa: float
    producer_accuracy: tuple[float, ...]  # per-class recall
    user_accuracy: tuple[float, ...]  # per-class precision


@dataclass(frozen=True)
class ArealComparison:
    feature_name: str
    reference_area: float  # km^2
    extracted_area: float  # km^2

    @property
    def relative_error(self) -> float:
        if self.reference_area > 0:
            return abs(self.extracted_area - self.reference_area) / self.reference_area
        return 0.0 if self.extracted_area == 0 else float("inf")


def _as_label_grid(x) -> np.ndarray:
    if isinstance(x, Mask):
        return x.bits.astype(np.int64)
    a = np.asarray(x)
    if not np.issubdtype(a.dtype, np.integer) and a.dtype != np.bool_:
        raise ValueError("label grids must be integer or boolean")
    return a.astype(np.int64)


def confusion_matrix(pred, truth, labels: tuple[str, ...] | None = None) -> ConfusionMatrix:
    """Cross-tabulate predicted against reference labels of equal shape.

    Masks compare as binary background/foreground. For integer grids the
    classes are the sorted values present in either input unless `labels`
    names them explicitly (index = class value).
    """
    p = _as_label_grid(pred)
    t = _as_label_grid(truth)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: predicted {p.shape} vs truth {t.shape}")
    if isinstance(pred, Mask) or isinstance(truth, Mask):
        values = np.array([0, 1])
        if labels is None:
            labels = ("background", "foreground")
    else:
        values = np.unique(np.concatenate([np.unique(t), np.unique(p)]))
        if values.size < 2:
            # a k=1 matrix is degenerate; pad with an unused class
            values = np.append(values, values.max() + 1)
        if labels is None:
            labels = tuple(str(v) for v in values)
    if len(labels) != values.size:
        raise ValueError(f"{len(labels)} labels given for {values.size} classes")
    k = values.size
    ti = np.searchsorted(values, t.ravel())
    pi = np.searchsorted(values, p.ravel())
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (ti, pi), 1)
    return ConfusionMatrix(tuple(labels), counts)


def overall_accuracy(cm: ConfusionMatrix) -> float:
    return float(np.trace(cm.counts)) / cm.n


def kappa(cm: ConfusionMatrix) -> float:
    """Chance-corrected agreement (p_o - p_e) / (1 - p_e).

    With all mass in a single cell p_e is 1 and the ratio is undefined;
    that degenerates to 1.0 for perfect agreement and 0.0 otherwise.
    """
    n = cm.n
    p_o = float(np.trace(cm.counts)) / n
    rows = cm.counts.sum(axis=1).astype(np.float64)
    cols = cm.counts.sum(axis=0).astype(np.float64)
    p_e = float((rows * cols).sum()) / (n * n)
    if p_e >= 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def accuracy_report(cm: ConfusionMatrix) -> AccuracyReport:
    rows = cm.counts.sum(axis=1).astype(np.float64)
    cols = cm.counts.sum(axis=0).astype(np.float64)
    diag = np.diag(cm.counts).astype(np.float64)
    producer = tuple(float(d / r) if r > 0 else 0.0 for d, r in zip(diag, rows))
    user = tuple(float(d / c) if c > 0 else 0.0 for d, c in zip(diag, cols))
    return AccuracyReport(overall_accuracy(cm), kappa(cm), producer, user)


def areal_extent(m: Mask, pixel_size_m: float) -> float:
    """Foreground area in km^2 for square pixels of the given side in meters."""
    if pixel_size_m <= 0:
        raise ValueError("pixel_size_m must be positive")
    return m.foreground_count * pixel_size_m * pixel_size_m / 1e6


def format_report(
    accuracy_rows: list[tuple[str, AccuracyReport]],
    areal_rows: list[ArealComparison] = (),
) -> str:
    """Fixed-width report: accuracy table plus optional areal comparison."""
    name_w = max([len("Methodology")] + [len(n) for n, _ in accuracy_rows])
    lines = [f"{'Methodology':<{name_w}}  {'Kappa':>6}  {'Overall Accuracy (%)':>20}"]
    for name, rep in accuracy_rows:
        oa_pct = rep.overall_accuracy * 100.0
        lines.append(f"{name:<{name_w}}  {rep.kappa:>6.2f}  {oa_pct:>20.2f}")
    if areal_rows:
        lines.append("")
        feat_w = max([len("Feature")] + [len(a.feature_name) for a in areal_rows])
        lines.append(
            f"{'Feature':<{feat_w}}  {'Reference Area (km2)':>20}  "
            f"{'Areal Extent (km2)':>18}  {'Relative Error':>14}"
        )
        for a in areal_rows:
            lines.append(
                f"{a.feature_name:<{feat_w}}  {a.reference_area:>20.2f}  "
                f"{a.extracted_area:>18.2f}  {a.relative_error:>14.4f}"
            )
    return "\n".join(lines) + "\n"


def format_report_csv(
    accuracy_rows: list[tuple[str, AccuracyReport]],
    areal_rows: list[ArealComparison] = (),
) -> str:
    """Delimited twin of format_report (one row kind per line)."""
    lines = ["kind,name,kappa,overall_accuracy_pct,reference_km2,extracted_km2,relative_error"]
    for name, rep in accuracy_rows:
        lines.append(f"accuracy,{name},{rep.kappa:.6f},{rep.overall_accuracy * 100.0:.6f},,,")
    for a in areal_rows:
        lines.append(
            f"areal,{a.feature_name},,,{a.reference_area:.6f},"
            f"{a.extracted_area:.6f},{a.relative_error:.6f}"
        )
    return "\n".join(lines) + "\n"
