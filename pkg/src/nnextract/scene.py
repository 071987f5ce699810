"""Synthetic grayscale scenes with per-kind ground-truth masks.

Scene files are line-oriented ``key=value`` text. Global keys come first,
then one ``[element]`` block per feature::

    width=256
    height=256
    seed=7
    background_mean=60      # optional, default 60
    background_std=8        # optional, default 8

    [element]
    kind=road               # road | lake | park | building | vehicle
    x0=0
    y0=100
    x1=255
    y1=100
    width=5
    mean=200
    std=6
    gaps=80:5,180:6         # optional: center:length along the centerline

Roads are constant-width ribbons between (x0,y0) and (x1,y1); a gap
replaces a stretch of ribbon with dark "shadow" noise in the rendering
while the truth mask keeps the ribbon unbroken. Lakes are ellipses
(cx, cy, rx, ry); parks, buildings, and vehicles are rectangles
(x0, y0, w, h). Every element carries gray-texture keys mean and std.
All noise comes from the scene seed, so a spec renders byte-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .raster import Mask, Raster, histogram_stretch
from .rng import SplitMix64

KINDS = ("road", "lake", "park", "building", "vehicle")

SHADOW_MEAN = 5.0
SHADOW_STD = 2.0


class SceneSpecError(ValueError):
    pass


@dataclass(frozen=True)
class SceneElement:
    kind: str
    params: dict

    def get(self, key: str, default=None) -> float:
        if key in self.params:
            return self.params[key]
        if default is None:
            raise SceneSpecError(f"{self.kind} element missing key {key!r}")
        return default


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    seed: int
    background_mean: float = 60.0
    background_std: float = 8.0
    elements: tuple[SceneElement, ...] = field(default_factory=tuple)


def parse_scene_spec(text: str) -> SceneSpec:
    globals_: dict = {}
    elements: list[SceneElement] = []
    current: dict | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[element]":
            if current is not None:
                elements.append(_finish_element(current, lineno))
            current = {}
            continue
        if "=" not in line:
            raise SceneSpecError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        target = globals_ if current is None else current
        target[key] = value
    if current is not None:
        elements.append(_finish_element(current, -1))

    try:
        width = int(globals_.pop("width"))
        height = int(globals_.pop("height"))
        seed = int(globals_.pop("seed"))
    except KeyError as exc:
        raise SceneSpecError(f"scene spec missing global key {exc.args[0]!r}") from None
    bg_mean = float(globals_.pop("background_mean", 60.0))
    bg_std = float(globals_.pop("background_std", 8.0))
    if globals_:
        raise SceneSpecError(f"unknown global keys {sorted(globals_)}")
    return SceneSpec(width, height, seed, bg_mean, bg_std, tuple(elements))


def _finish_element(raw: dict, lineno: int) -> SceneElement:
    if "kind" not in raw:
        raise SceneSpecError(f"element before line {lineno} has no kind")
    kind = raw.pop("kind")
    if kind not in KINDS:
        raise SceneSpecError(f"unknown element kind {kind!r}")
    params: dict = {}
    for key, value in raw.items():
        if key == "gaps":
            gaps = []
            for part in value.split(","):
                at, _, length = part.partition(":")
                gaps.append((float(at), float(length)))
            params["gaps"] = tuple(gaps)
        else:
            params[key] = float(value)
    return SceneElement(kind, params)


def format_scene_spec(spec: SceneSpec) -> str:
    lines = [
        f"width={spec.width}",
        f"height={spec.height}",
        f"seed={spec.seed}",
        f"background_mean={spec.background_mean:g}",
        f"background_std={spec.background_std:g}",
    ]
    for el in spec.elements:
        lines.append("[element]")
        lines.append(f"kind={el.kind}")
        for key, value in el.params.items():
            if key == "gaps":
                lines.append("gaps=" + ",".join(f"{a:g}:{b:g}" for a, b in value))
            else:
                lines.append(f"{key}={value:g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _road_footprint(el: SceneElement, w: int, h: int) -> tuple[np.ndarray, np.ndarray]:
    """(truth, visible) boolean grids; visible excludes gap stretches."""
    x0, y0 = el.get("x0"), el.get("y0")
    x1, y1 = el.get("x1"), el.get("y1")
    half = (el.get("width") - 1.0) / 2.0
    for x, y in ((x0, y0), (x1, y1)):
        if not (0 <= x < w and 0 <= y < h):
            raise SceneSpecError(f"road endpoint ({x:g},{y:g}) outside {w}x{h} canvas")
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    vx, vy = x1 - x0, y1 - y0
    seg2 = vx * vx + vy * vy
    if seg2 == 0:
        raise SceneSpecError("road endpoints coincide")
    t = ((xs - x0) * vx + (ys - y0) * vy) / seg2
    tc = np.clip(t, 0.0, 1.0)
    dist = np.hypot(xs - (x0 + tc * vx), ys - (y0 + tc * vy))
    truth = dist <= half + 1e-9
    visible = truth.copy()
    length = math.sqrt(seg2)
    for at, gap_len in el.params.get("gaps", ()):
        lo = (at - gap_len / 2.0) / length
        hi = (at + gap_len / 2.0) / length
        visible &= ~((t >= lo) & (t <= hi) & truth)
    return truth, visible


def _ellipse_footprint(el: SceneElement, w: int, h: int) -> np.ndarray:
    cx, cy = el.get("cx"), el.get("cy")
    rx, ry = el.get("rx"), el.get("ry")
    if cx - rx < 0 or cy - ry < 0 or cx + rx >= w or cy + ry >= h:
        raise SceneSpecError(f"ellipse at ({cx:g},{cy:g}) leaves the {w}x{h} canvas")
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    return ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0


def _rect_footprint(el: SceneElement, w: int, h: int) -> np.ndarray:
    x0, y0 = int(el.get("x0")), int(el.get("y0"))
    rw, rh = int(el.get("w")), int(el.get("h"))
    if x0 < 0 or y0 < 0 or rw < 1 or rh < 1 or x0 + rw > w or y0 + rh > h:
        raise SceneSpecError(
            f"rectangle {rw}x{rh}@({x0},{y0}) leaves the {w}x{h} canvas"
        )
    grid = np.zeros((h, w), dtype=bool)
    grid[y0 : y0 + rh, x0 : x0 + rw] = True
    return grid


def _textured(rng: SplitMix64, region: np.ndarray, mean: float, std: float, canvas: np.ndarray):
    n = int(region.sum())
    if n == 0:
        return
    noise = rng.normal_array(n)
    canvas[region] = np.clip(np.rint(mean + std * noise), 0, 255)


def generate_scene(spec: SceneSpec) -> tuple[Raster, dict[str, Mask]]:
    """Render the scene and per-kind truth masks, byte-stable for a seed."""
    w, h = spec.width, spec.height
    if w < 1 or h < 1:
        raise SceneSpecError("scene dimensions must be positive")
    rng = SplitMix64(spec.seed)
    canvas = np.zeros((h, w), dtype=np.float64)
    _textured(rng, np.ones((h, w), dtype=bool), spec.background_mean, spec.background_std, canvas)

    truths: dict[str, np.ndarray] = {}
    for el in spec.elements:
        mean = el.get("mean", 128.0)
        std = el.get("std", 4.0)
        if el.kind == "road":
            truth, visible = _road_footprint(el, w, h)
            _textured(rng, visible, mean, std, canvas)
            _textured(rng, truth & ~visible, SHADOW_MEAN, SHADOW_STD, canvas)
        elif el.kind == "lake":
            truth = _ellipse_footprint(el, w, h)
            _textured(rng, truth, mean, std, canvas)
        else:
            truth = _rect_footprint(el, w, h)
            _textured(rng, truth, mean, std, canvas)
        truths[el.kind] = truths.get(el.kind, np.zeros((h, w), dtype=bool)) | truth

    raster = Raster(canvas.astype(np.uint8))
    return raster, {kind: Mask(bits) for kind, bits in truths.items()}


# ---------------------------------------------------------------------------
# Training-patch harvesting
# ---------------------------------------------------------------------------


def harvest_patches(
    raster: Raster,
    truth: Mask,
    window: int,
    n_pos: int,
    n_neg: int,
    seed: int,
    stretch: tuple[float, float] | None = (0.01, 0.99),
    near_fraction: float = 0.5,
) -> tuple[list[Raster], list[Raster]]:
    """Window-sized exemplar crops centered on truth / background pixels.

    The raster is first histogram-stretched (unless stretch is None) so
    the crops live in the same normalized domain the extractor sees.
    Up to near_fraction of the negatives come from the band within one
    window of the foreground; a classifier only shown far-away negatives
    never learns where the feature stops. Sampling is a seeded shuffle of
    the eligible centers.
    """
    if window % 2 == 0 or window < 3:
        raise ValueError("window must be odd and >= 3")
    src = histogram_stretch(raster, *stretch) if stretch else raster
    margin = window // 2

    def eligible(bits: np.ndarray) -> list[tuple[int, int]]:
        ys, xs = np.nonzero(bits)
        inside = (
            (xs >= margin)
            & (xs < raster.width - margin)
            & (ys >= margin)
            & (ys < raster.height - margin)
        )
        return list(zip(xs[inside].tolist(), ys[inside].tolist()))

    from .preprocess import StructuringElement, dilate

    near_band = dilate(truth, StructuringElement.full(2 * window + 1)).bits & ~truth.bits
    pos_centers = eligible(truth.bits)
    near_centers = eligible(near_band)
    far_centers = eligible(~truth.bits & ~near_band)

    rng = SplitMix64(seed)
    rng.shuffle(pos_centers)
    rng.shuffle(near_centers)
    rng.shuffle(far_centers)
    n_near = min(int(n_neg * near_fraction), len(near_centers))
    neg_centers = near_centers[:n_near] + far_centers[: n_neg - n_near]
    if len(pos_centers) < n_pos or len(neg_centers) < n_neg:
        raise ValueError(
            f"not enough eligible centers: {len(pos_centers)} foreground / "
            f"{len(neg_centers)} background for {n_pos}/{n_neg} requested"
        )

    def crop(cx: int, cy: int) -> Raster:
        return Raster(
            src.values[cy - margin : cy + margin + 1, cx - margin : cx + margin + 1].copy()
        )

    positives = [crop(x, y) for x, y in pos_centers[:n_pos]]
    negatives = [crop(x, y) for x, y in neg_centers[:n_neg]]
    return positives, negatives
