import numpy as np
import pytest

from nnextract.raster import Raster, Window
from nnextract.rng import SplitMix64
from nnextract.texture import (
    FEATURE_NAMES,
    GlcmMatrix,
    compute_glcm,
    glcm_window_counts,
    haralick_features,
    haralick_features_array,
    quantize,
)

from conftest import random_raster
from oracles import naive_haralick, random_glcm


def glcm_from_cells(cells, symmetric=True):
    cells = np.asarray(cells, dtype=np.float64)
    return GlcmMatrix(cells.shape[0], cells, (1, 0), symmetric)


class TestComputeGlcm:
    def test_two_row_pairs(self):
        r = Raster(np.array([[0, 0], [255, 255]], dtype=np.uint8))
        g = compute_glcm(r, (1, 0), levels=2, symmetric=True)
        assert np.allclose(g.cells, [[0.5, 0.0], [0.0, 0.5]])

    def test_constant_window(self):
        r = Raster(np.full((5, 5), 200, dtype=np.uint8))
        g = compute_glcm(r, (2, 1), levels=2)
        expect = np.zeros((2, 2))
        expect[1, 1] = 1.0
        assert np.array_equal(g.cells, expect)

    def test_checkerboard(self):
        board = np.zeros((6, 6), dtype=np.uint8)
        board[::2, 1::2] = 255
        board[1::2, ::2] = 255
        g = compute_glcm(Raster(board), (1, 0), levels=2, symmetric=True)
        assert np.allclose(g.cells, [[0.0, 0.5], [0.5, 0.0]])

    def test_window_argument(self):
        r = random_raster(5, 12, 12)
        g_full = compute_glcm(r, (1, 0), 8, True)
        g_win = compute_glcm(r, (1, 0), 8, True, window=Window(2, 3, 7))
        sub = Raster(r.values[3:10, 2:9].copy())
        g_sub = compute_glcm(sub, (1, 0), 8, True)
        assert np.array_equal(g_win.cells, g_sub.cells)
        assert not np.array_equal(g_win.cells, g_full.cells)

    def test_zero_offset_rejected(self):
        with pytest.raises(ValueError):
            compute_glcm(random_raster(1, 4, 4), (0, 0))

    def test_offset_too_large_for_region(self):
        r = random_raster(2, 8, 8)
        with pytest.raises(ValueError, match="no pixel pair"):
            compute_glcm(r, (3, 0), window=Window(0, 0, 3))

    def test_normalization_and_symmetry_random(self):
        for seed in range(30):
            rng = SplitMix64(seed)
            size = 3 + 2 * rng.randint(5)
            r = random_raster(seed + 200, size + 4, size + 4)
            dx, dy = [(1, 0), (0, 1), (1, 1), (-1, 1), (2, 0)][rng.randint(5)]
            g = compute_glcm(r, (dx, dy), levels=8, symmetric=True,
                             window=Window(2, 2, size))
            assert abs(g.cells.sum() - 1.0) <= 1e-9
            assert np.array_equal(g.cells, g.cells.T)

    def test_asymmetric_offset_transposes(self):
        r = random_raster(8, 10, 10)
        fwd = compute_glcm(r, (1, 0), 8, symmetric=False)
        rev = compute_glcm(r, (-1, 0), 8, symmetric=False)
        assert np.array_equal(fwd.cells, rev.cells.T)


class TestHaralickGoldens:
    def test_single_level(self):
        cells = np.zeros((2, 2))
        cells[0, 0] = 1.0
        hv = haralick_features(glcm_from_cells(cells))
        expect = dict.fromkeys(FEATURE_NAMES, 0.0)
        expect["energy"] = 1.0
        expect["inverse_difference_moment"] = 1.0
        for name in FEATURE_NAMES:
            assert abs(getattr(hv, name) - expect[name]) <= 1e-9, name

    def test_checkerboard(self):
        hv = haralick_features(glcm_from_cells([[0.0, 0.5], [0.5, 0.0]]))
        assert abs(hv.energy - 0.5) <= 1e-9
        assert abs(hv.inertia - 1.0) <= 1e-9
        assert abs(hv.entropy - 1.0) <= 1e-9
        assert abs(hv.inverse_difference_moment - 0.5) <= 1e-9
        assert abs(hv.correlation - (-1.0)) <= 1e-9

    def test_uniform_two_levels(self):
        hv = haralick_features(glcm_from_cells([[0.25, 0.25], [0.25, 0.25]]))
        assert abs(hv.energy - 0.25) <= 1e-9
        assert abs(hv.entropy - 2.0) <= 1e-9
        assert abs(hv.correlation) <= 1e-9


class TestHaralickProperties:
    def test_oracle_equivalence(self):
        rng = SplitMix64(77)
        for case in range(100):
            ng = 2 + rng.randint(7)
            cells = random_glcm(rng, ng)
            got = haralick_features_array(np.asarray(cells)[None, :, :])[0]
            want = naive_haralick(cells)
            for i, name in enumerate(FEATURE_NAMES):
                assert abs(got[i] - want[name]) <= 1e-9, (case, name)

    def test_invariant_ranges(self):
        rng = SplitMix64(101)
        for _ in range(50):
            ng = 2 + rng.randint(7)
            cells = np.asarray(random_glcm(rng, ng))
            row = haralick_features_array(cells[None, :, :])[0]
            hv = dict(zip(FEATURE_NAMES, row))
            assert 0.0 <= hv["energy"] <= 1.0
            assert hv["entropy"] >= -1e-12
            assert hv["entropy"] <= 2 * np.log2(ng) + 1e-9
            assert hv["inertia"] >= 0.0
            assert 0.0 < hv["inverse_difference_moment"] <= 1.0
            assert -1.0 - 1e-9 <= hv["correlation"] <= 1.0 + 1e-9
            assert -1e-12 <= hv["imc2"] <= 1.0 + 1e-12

    def test_energy_one_iff_single_cell(self):
        one = np.zeros((4, 4))
        one[2, 1] = 1.0
        assert abs(haralick_features(GlcmMatrix(4, one, (1, 0), False)).energy - 1.0) <= 1e-12
        spread = np.zeros((4, 4))
        spread[0, 0] = spread[3, 3] = 0.5
        assert haralick_features(glcm_from_cells(spread)).energy < 1.0

    def test_relabeling_keeps_energy_entropy(self):
        rng = SplitMix64(55)
        for _ in range(20):
            ng = 3 + rng.randint(5)
            cells = np.asarray(random_glcm(rng, ng))
            perm = rng.permutation(ng)
            permuted = cells[np.ix_(perm, perm)]
            a = haralick_features_array(cells[None])[0]
            b = haralick_features_array(permuted[None])[0]
            for name in ("energy", "entropy"):
                i = FEATURE_NAMES.index(name)
                assert abs(a[i] - b[i]) <= 1e-12


class TestBatchCounts:
    def test_matches_per_window_glcm(self):
        r = random_raster(9, 24, 20)
        q = quantize(r.values, 8)
        for offset in ((1, 0), (0, 1), (1, 1), (-1, 1)):
            counts = glcm_window_counts(q, 5, offset, True, 8)
            for y0 in (0, 3, 15):
                for x0 in (0, 7, 19):
                    g = compute_glcm(r, offset, 8, True, window=Window(x0, y0, 5))
                    got = counts[y0, x0].astype(np.float64).reshape(8, 8)
                    assert np.array_equal(got / got.sum(), g.cells)

    def test_quantize_range(self):
        v = np.arange(256)
        q = quantize(v, 8)
        assert q.min() == 0 and q.max() == 7
        assert (np.diff(q) >= 0).all()


class TestGlcmValidation:
    def test_cells_must_sum_to_one(self):
        with pytest.raises(ValueError):
            GlcmMatrix(2, np.full((2, 2), 0.3), (1, 0), False)

    def test_symmetric_must_equal_transpose(self):
        cells = np.array([[0.5, 0.5], [0.0, 0.0]])
        with pytest.raises(ValueError):
            GlcmMatrix(2, cells, (1, 0), True)
