"""Connected components, shape attributes, thinning, and gap bridging.

The thinning used for skeletons is the two-subiteration 3x3 scheme of
Zhang & Suen (1984): per pass, a foreground pixel p with 8-neighborhood
p2..p9 (clockwise from north) is flagged for deletion when

    2 <= B(p) <= 6,  A(p) == 1,
    subiteration 1: p2*p4*p6 == 0 and p4*p6*p8 == 0
    subiteration 2: p2*p4*p8 == 0 and p2*p6*p8 == 0

where B is the number of set neighbors and A the number of 0->1
transitions around the ring. Flags are applied simultaneously per
subiteration and passes repeat until nothing changes; endpoints (B == 1)
are never deleted. Thinning shortens blunt ends by about half the ribbon
width, so after convergence each endpoint is extended straight along its
outgoing direction through remaining foreground (stopping before it
would touch the skeleton anywhere else). The composite is idempotent: a
skeleton is a thinning fixed point and offers no room to extend.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .preprocess import StructuringElement, dilate
from .raster import Mask

# Digital perimeters make tiny blobs exceed the continuous compactness
# bound of 1, so the attribute is capped here.
COMPACTNESS_CAP = 1.2


@dataclass(eq=False)
class ObjectRecord:
    """One connected component and its shape attributes."""

    id: int
    pixels: np.ndarray  # (n, 2) int, (x, y) in scan order
    bbox: tuple[int, int, int, int]  # x0, y0, x1, y1 inclusive
    area: int
    perimeter: int
    centroid: tuple[float, float]
    elongation: float
    width: float
    compactness: float
    mean_intensity: float = field(default=0.0)


@dataclass(frozen=True)
class CurveModel:
    """Least-squares polynomial through planar points.

    ``axis`` names the parameter coordinate: "x" fits y = f(x), "y" fits
    x = f(y). Coefficients are in ascending-power order.
    """

    degree: int
    coefficients: tuple[float, ...]
    axis: str
    rms_residual: float


_N4 = ((1, 0), (-1, 0), (0, 1), (0, -1))
_N8 = _N4 + ((1, 1), (1, -1), (-1, 1), (-1, -1))


def label_components(m: Mask, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label map (0 = background, 1..n in scan order) and component count."""
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    neighbors = _N4 if connectivity == 4 else _N8
    bits = m.bits
    h, w = bits.shape
    labels = np.zeros((h, w), dtype=np.int32)
    current = 0
    for sy in range(h):
        row = bits[sy]
        for sx in range(w):
            if not row[sx] or labels[sy, sx]:
                continue
            current += 1
            queue = deque([(sx, sy)])
            labels[sy, sx] = current
            while queue:
                x, y = queue.popleft()
                for dx, dy in neighbors:
                    nx, ny = x + dx, y + dy
                    if 0 <= nx < w and 0 <= ny < h and bits[ny, nx] and not labels[ny, nx]:
                        labels[ny, nx] = current
                        queue.append((nx, ny))
    return labels, current


def _component_record(obj_id: int, xs: np.ndarray, ys: np.ndarray, bits: np.ndarray) -> ObjectRecord:
    h, w = bits.shape
    area = xs.size
    x0, x1 = int(xs.min()), int(xs.max())
    y0, y1 = int(ys.min()), int(ys.max())
    cx = float(xs.mean())
    cy = float(ys.mean())

    # boundary pixels: any 4-neighbor is background or outside
    boundary = 0
    for x, y in zip(xs, ys):
        for dx, dy in _N4:
            nx, ny = x + dx, y + dy
            if nx < 0 or ny < 0 or nx >= w or ny >= h or not bits[ny, nx]:
                boundary += 1
                break
    compactness = min(4.0 * math.pi * area / (boundary * boundary), COMPACTNESS_CAP)

    # Second-order central moments with a 1/12 unit-pixel correction so a
    # solid w x h rectangle gets elongation exactly max(w,h)/min(w,h).
    dxs = xs - cx
    dys = ys - cy
    mxx = float((dxs * dxs).mean()) + 1.0 / 12.0
    myy = float((dys * dys).mean()) + 1.0 / 12.0
    mxy = float((dxs * dys).mean())
    half_trace = (mxx + myy) / 2.0
    det = math.sqrt(max(0.0, ((mxx - myy) / 2.0) ** 2 + mxy * mxy))
    lam_max = half_trace + det
    lam_min = max(half_trace - det, 1e-12)
    elongation = math.sqrt(lam_max / lam_min)

    comp_bits = np.zeros((y1 - y0 + 3, x1 - x0 + 3), dtype=bool)
    comp_bits[ys - y0 + 1, xs - x0 + 1] = True
    skel_len = int(_extend_tips(_thin(comp_bits), comp_bits).sum())
    width = 2.0 * area / max(skel_len, 1)

    return ObjectRecord(
        id=obj_id,
        pixels=np.column_stack([xs, ys]).astype(np.int64),
        bbox=(x0, y0, x1, y1),
        area=int(area),
        perimeter=boundary,
        centroid=(cx, cy),
        elongation=elongation,
        width=width,
        compactness=compactness,
    )


def connected_components(m: Mask, connectivity: int = 8) -> list[ObjectRecord]:
    """Maximal connected foreground sets in scan order, attributes filled.

    mean_intensity stays at its default; callers that hold the source
    raster fill it in.
    """
    labels, count = label_components(m, connectivity)
    records = []
    for obj_id in range(1, count + 1):
        ys, xs = np.nonzero(labels == obj_id)
        records.append(_component_record(obj_id, xs, ys, m.bits))
    return records


# ---------------------------------------------------------------------------
# Thinning
# ---------------------------------------------------------------------------


def _neighbors_ring(bits: np.ndarray):
    p = np.pad(bits, 1, mode="constant").astype(np.uint8)
    h, w = bits.shape

    def sh(dy, dx):
        return p[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    # p2..p9 clockwise starting north
    return [sh(-1, 0), sh(-1, 1), sh(0, 1), sh(1, 1), sh(1, 0), sh(1, -1), sh(0, -1), sh(-1, -1)]


def _thin(bits: np.ndarray) -> np.ndarray:
    bits = bits.copy()
    while True:
        changed = False
        for phase in (0, 1):
            ring = _neighbors_ring(bits)
            b = sum(ring)
            a = sum(
                ((ring[i] == 0) & (ring[(i + 1) % 8] == 1)).astype(np.uint8)
                for i in range(8)
            )
            p2, _, p4, _, p6, _, p8, _ = ring
            if phase == 0:
                cond = (p2 * p4 * p6 == 0) & (p4 * p6 * p8 == 0)
            else:
                cond = (p2 * p4 * p8 == 0) & (p2 * p6 * p8 == 0)
            remove = bits & (b >= 2) & (b <= 6) & (a == 1) & cond
            if remove.any():
                bits[remove] = False
                changed = True
        if not changed:
            return bits


def _extend_tips(skel: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = skel.copy()
    h, w = out.shape
    ring = _neighbors_ring(skel)
    nsum = sum(r.astype(np.int32) for r in ring)
    ys, xs = np.nonzero(skel & (nsum == 1))
    offsets = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)]
    for x, y in zip(xs, ys):
        for (dx, dy), plane in zip(offsets, ring):
            if plane[y, x]:
                step = (-dx, -dy)  # away from the single neighbor
                break
        px, py = x + step[0], y + step[1]
        prev = (x, y)
        while 0 <= px < w and 0 <= py < h and mask[py, px] and not out[py, px]:
            touches_other = False
            for ddx, ddy in _N8:
                qx, qy = px + ddx, py + ddy
                if (qx, qy) != prev and 0 <= qx < w and 0 <= qy < h and out[qy, qx]:
                    touches_other = True
                    break
            if touches_other:
                break
            out[py, px] = True
            prev = (px, py)
            px += step[0]
            py += step[1]
    return out


def skeleton(m: Mask) -> Mask:
    """1-px-wide medial curve via the thinning scheme in the module docstring."""
    thinned = _thin(m.bits)
    return Mask(_extend_tips(thinned, m.bits))


def endpoints(skel: Mask) -> list[tuple[int, int]]:
    """Skeleton pixels with exactly one 8-neighbor, in scan order as (x, y)."""
    bits = skel.bits
    ring = _neighbors_ring(bits)
    nsum = sum(r.astype(np.int32) for r in ring)
    ys, xs = np.nonzero(bits & (nsum == 1))
    return [(int(x), int(y)) for x, y in zip(xs, ys)]


# ---------------------------------------------------------------------------
# Curve fitting
# ---------------------------------------------------------------------------


def fit_curve(points, degree: int) -> CurveModel:
    """Least-squares polynomial via the normal equations.

    The parameter coordinate is whichever of x or y takes more distinct
    values (x on ties); the points must not all share that coordinate.
    The normal equations are solved by LU factorization with partial
    pivoting.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an (n, 2) array-like")
    if not (1 <= degree <= 3):
        raise ValueError("degree must be between 1 and 3")
    n = pts.shape[0]
    if n < degree + 1:
        raise ValueError(f"need at least {degree + 1} points for degree {degree}, got {n}")

    distinct_x = np.unique(pts[:, 0]).size
    distinct_y = np.unique(pts[:, 1]).size
    axis = "x" if distinct_x >= distinct_y else "y"
    t, v = (pts[:, 0], pts[:, 1]) if axis == "x" else (pts[:, 1], pts[:, 0])
    if np.unique(t).size == 1:
        raise ValueError("points all share the parameter coordinate")

    vander = np.vander(t, degree + 1, increasing=True)
    lhs = vander.T @ vander
    rhs = vander.T @ v
    try:
        coeffs = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        raise ValueError("singular normal equations; points do not determine the curve")
    residuals = vander @ coeffs - v
    rms = float(np.sqrt(np.mean(residuals * residuals)))
    return CurveModel(degree, tuple(float(c) for c in coeffs), axis, rms)


def evaluate_curve(model: CurveModel, t: float) -> float:
    acc = 0.0
    for c in reversed(model.coefficients):
        acc = acc * t + c
    return acc


# ---------------------------------------------------------------------------
# Gap bridging
# ---------------------------------------------------------------------------


def _walk_skeleton(bits: np.ndarray, start: tuple[int, int], limit: int) -> list[tuple[int, int]]:
    """Up to `limit` skeleton pixels reachable from an endpoint, BFS order."""
    h, w = bits.shape
    seen = {start}
    queue = deque([start])
    out = []
    while queue and len(out) < limit:
        x, y = queue.popleft()
        out.append((x, y))
        for dx, dy in _N8:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and bits[ny, nx] and (nx, ny) not in seen:
                seen.add((nx, ny))
                queue.append((nx, ny))
    return out


def _draw_segment(canvas: np.ndarray, x0: int, y0: int, x1: int, y1: int) -> None:
    """Bresenham line, clipped to the canvas."""
    h, w = canvas.shape
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        if 0 <= x < w and 0 <= y < h:
            canvas[y, x] = True
        if x == x1 and y == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def _draw_curve(canvas: np.ndarray, model: CurveModel, p0, p1) -> None:
    """Rasterize the fitted polynomial between two endpoints, one step per
    parameter pixel, joining consecutive samples with line segments."""
    if model.axis == "x":
        t0, t1 = p0[0], p1[0]
    else:
        t0, t1 = p0[1], p1[1]
    if t0 == t1:
        _draw_segment(canvas, p0[0], p0[1], p1[0], p1[1])
        return
    step = 1 if t1 > t0 else -1
    prev = None
    for t in range(t0, t1 + step, step):
        v = int(round(evaluate_curve(model, float(t))))
        x, y = (t, v) if model.axis == "x" else (v, t)
        if prev is not None:
            _draw_segment(canvas, prev[0], prev[1], x, y)
        prev = (x, y)
    # force the true endpoints onto the path
    _draw_segment(canvas, prev[0], prev[1], p1[0], p1[1])
    h, w = canvas.shape
    if 0 <= p0[1] < h and 0 <= p0[0] < w:
        canvas[p0[1], p0[0]] = True


def bridge_gaps(m: Mask, max_gap: int, degree: int = 2, context_len: int = 10) -> Mask:
    """Join nearby breaks between components with curve-following strokes.

    Skeleton endpoints of different components closer than max_gap are
    paired greedily in ascending distance order (each endpoint bridges at
    most once). For every pair, a polynomial is fitted through the
    skeleton pixels trailing both endpoints and rasterized between them,
    then thickened to the local component width and unioned into the
    mask. Falls back to a straight stroke when the fit is degenerate.
    """
    if max_gap < 1:
        raise ValueError("max_gap must be at least 1")
    labels, count = label_components(m, 8)
    if count < 2:
        return Mask(m.bits.copy())
    skel = skeleton(m)
    ends = endpoints(skel)
    if not ends:
        return Mask(m.bits.copy())

    comp_width = {}
    for rec in connected_components(m, 8):
        comp_width[rec.id] = rec.width

    candidates = []
    for i in range(len(ends)):
        for j in range(i + 1, len(ends)):
            (x1, y1), (x2, y2) = ends[i], ends[j]
            c1 = int(labels[y1, x1])
            c2 = int(labels[y2, x2])
            if c1 == c2:
                continue
            dist = math.hypot(x2 - x1, y2 - y1)
            if dist <= max_gap:
                candidates.append((dist, i, j))
    if not candidates:
        return Mask(m.bits.copy())
    candidates.sort()

    out = m.bits.copy()
    used: set[int] = set()
    for _, i, j in candidates:
        if i in used or j in used:
            continue
        used.add(i)
        used.add(j)
        p0, p1 = ends[i], ends[j]
        context = _walk_skeleton(skel.bits, p0, context_len) + _walk_skeleton(
            skel.bits, p1, context_len
        )
        stroke = np.zeros_like(out)
        try:
            model = fit_curve(context, degree)
            _draw_curve(stroke, model, p0, p1)
        except ValueError:
            _draw_segment(stroke, p0[0], p0[1], p1[0], p1[1])
        w1 = comp_width.get(int(labels[p0[1], p0[0]]), 2.0)
        w2 = comp_width.get(int(labels[p1[1], p1[0]]), 2.0)
        ribbon = (w1 + w2) / 4.0  # component width attr is twice the ribbon width
        radius = int(round((ribbon - 1.0) / 2.0))
        if radius > 0:
            stroke = dilate(Mask(stroke), StructuringElement.full(2 * radius + 1)).bits
        out |= stroke
    return Mask(out)
