"""Shared builders for the test suite: random rasters, synthetic scenes,
and a small trained bundle reused by pipeline tests."""

import numpy as np
import pytest

from nnextract.pipeline import PipelineParams, train_pipeline
from nnextract.raster import Mask, Raster
from nnextract.rng import SplitMix64
from nnextract.scene import SceneElement, SceneSpec, generate_scene, harvest_patches


def random_raster(seed: int, width: int, height: int) -> Raster:
    rng = SplitMix64(seed)
    vals = (rng.u64_array(width * height) % 256).astype(np.uint8)
    return Raster(vals.reshape(height, width))


def random_mask(seed: int, width: int, height: int, density: float = 0.4) -> Mask:
    rng = SplitMix64(seed)
    return Mask(rng.random_array(width * height).reshape(height, width) < density)


def road_scene_spec(seed: int, size: int = 256, width: float = 5, gaps=()) -> SceneSpec:
    el = SceneElement(
        "road",
        {
            "x0": 10,
            "y0": size * 0.4,
            "x1": size - 11,
            "y1": size * 0.5,
            "width": width,
            "mean": 200,
            "std": 6,
            "gaps": tuple(gaps),
        },
    )
    return SceneSpec(size, size, seed, 60, 8, (el,))


def water_scene_spec(seed: int) -> SceneSpec:
    els = (
        SceneElement("lake", {"cx": 150, "cy": 150, "rx": 90, "ry": 60, "mean": 40, "std": 5}),
        SceneElement("lake", {"cx": 380, "cy": 330, "rx": 60, "ry": 80, "mean": 40, "std": 5}),
        SceneElement(
            "road",
            {"x0": 5, "y0": 430, "x1": 500, "y1": 460, "width": 7, "mean": 200, "std": 6},
        ),
        SceneElement("park", {"x0": 320, "y0": 40, "w": 120, "h": 90, "mean": 120, "std": 12}),
    )
    return SceneSpec(512, 512, seed, 70, 9, els)


def objects_scene_spec(seed: int) -> SceneSpec:
    """20 small elongated vehicles and 20 larger square buildings, same texture."""
    rng = SplitMix64(seed)
    cells = [(cx, cy) for cy in range(8) for cx in range(8)]
    rng.shuffle(cells)
    elements = []
    for i in range(20):
        cx, cy = cells[i]
        w, h = 3, 7 + rng.randint(3)
        if rng.randint(2):
            w, h = h, w
        elements.append(
            SceneElement(
                "vehicle",
                {
                    "x0": cx * 64 + 10 + rng.randint(30),
                    "y0": cy * 64 + 10 + rng.randint(30),
                    "w": w,
                    "h": h,
                    "mean": 210,
                    "std": 6,
                },
            )
        )
    for i in range(20, 40):
        cx, cy = cells[i]
        side = 16 + rng.randint(3)
        elements.append(
            SceneElement(
                "building",
                {
                    "x0": cx * 64 + 10 + rng.randint(24),
                    "y0": cy * 64 + 10 + rng.randint(24),
                    "w": side,
                    "h": side,
                    "mean": 210,
                    "std": 6,
                },
            )
        )
    return SceneSpec(512, 512, seed, 60, 8, tuple(elements))


def train_road_bundle(train_seed: int = 11, **param_overrides):
    raster, truth = generate_scene(road_scene_spec(train_seed))
    pos, neg = harvest_patches(raster, truth["road"], 9, 200, 320, seed=5)
    kwargs = {"window_size": 9, "epochs": 120, "seed": 3}
    kwargs.update(param_overrides)
    return train_pipeline(pos, neg, "road", PipelineParams(**kwargs))


@pytest.fixture(scope="session")
def road_bundle():
    return train_road_bundle()
