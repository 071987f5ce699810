import numpy as np
import pytest

from nnextract.geometry import (
    bridge_gaps,
    connected_components,
    endpoints,
    fit_curve,
    label_components,
    skeleton,
)
from nnextract.raster import Mask

from conftest import random_mask


def mask_of(rows) -> Mask:
    return Mask(np.array(rows, dtype=bool))


class TestConnectedComponents:
    def test_empty_mask(self):
        assert connected_components(Mask(np.zeros((4, 4), dtype=bool))) == []

    def test_diagonal_connectivity(self):
        m = mask_of([[1, 0], [0, 1]])
        assert len(connected_components(m, 4)) == 2
        assert len(connected_components(m, 8)) == 1

    def test_solid_square_attributes(self):
        m = Mask(np.ones((3, 3), dtype=bool))
        recs = connected_components(m)
        assert len(recs) == 1
        rec = recs[0]
        assert rec.area == 9
        assert rec.perimeter == 8
        assert rec.centroid == (1.0, 1.0)
        assert abs(rec.elongation - 1.0) <= 1e-12

    def test_rectangle_elongation_exact(self):
        m = np.zeros((20, 20), dtype=bool)
        m[3:7, 2:12] = True  # 10 wide, 4 tall
        rec = connected_components(Mask(m))[0]
        assert abs(rec.elongation - 2.5) <= 1e-9

    def test_compactness_capped(self):
        m = np.zeros((3, 3), dtype=bool)
        m[1, 1] = True
        rec = connected_components(Mask(m))[0]
        assert rec.compactness == 1.2

    def test_partition_property(self):
        for seed in range(4):
            m = random_mask(seed + 80, 30, 24, density=0.45)
            recs = connected_components(m, 8)
            seen = np.zeros(m.bits.shape, dtype=int)
            for rec in recs:
                xs, ys = rec.pixels[:, 0], rec.pixels[:, 1]
                seen[ys, xs] += 1
            assert (seen <= 1).all()
            assert np.array_equal(seen.astype(bool), m.bits)

    def test_scan_order_labeling(self):
        m = mask_of(
            [
                [0, 0, 0, 1],
                [1, 0, 0, 0],
                [0, 0, 1, 0],
            ]
        )
        recs = connected_components(m, 4)
        firsts = [tuple(rec.pixels[0]) for rec in recs]
        assert firsts == [(3, 0), (0, 1), (2, 2)]
        assert [rec.id for rec in recs] == [1, 2, 3]

    def test_bbox_contains_pixels(self):
        m = random_mask(99, 16, 12, density=0.3)
        for rec in connected_components(m):
            x0, y0, x1, y1 = rec.bbox
            assert (rec.pixels[:, 0] >= x0).all() and (rec.pixels[:, 0] <= x1).all()
            assert (rec.pixels[:, 1] >= y0).all() and (rec.pixels[:, 1] <= y1).all()


class TestSkeleton:
    def test_thin_line_unchanged(self):
        m = np.zeros((7, 12), dtype=bool)
        m[3, 2:10] = True
        assert skeleton(Mask(m)).same_as(Mask(m))

    def test_empty(self):
        m = Mask(np.zeros((5, 5), dtype=bool))
        assert skeleton(m).foreground_count == 0

    def test_bar_reduces_to_full_length_path(self):
        m = np.zeros((11, 26), dtype=bool)
        m[3:8, 3:23] = True  # 5 x 20 bar
        sk = skeleton(Mask(m)).bits
        xs = np.nonzero(sk)[1]
        assert xs.min() <= 5 and xs.max() >= 20  # spans the length +-2
        for col in range(xs.min(), xs.max() + 1):
            assert sk[:, col].sum() == 1  # 1 px wide

    def test_idempotent(self):
        for seed in range(4):
            m = random_mask(seed + 90, 24, 20, density=0.55)
            once = skeleton(m)
            assert skeleton(once).same_as(once)

    def test_subset_of_input(self):
        for seed in range(4):
            m = random_mask(seed + 95, 20, 20, density=0.6)
            assert not (skeleton(m).bits & ~m.bits).any()


class TestEndpoints:
    def test_straight_segment(self):
        m = np.zeros((5, 14), dtype=bool)
        m[2, 2:12] = True
        assert endpoints(Mask(m)) == [(2, 2), (11, 2)]

    def test_closed_ring(self):
        m = np.zeros((10, 10), dtype=bool)
        m[2, 2:8] = True
        m[7, 2:8] = True
        m[2:8, 2] = True
        m[2:8, 7] = True
        assert endpoints(Mask(m)) == []

    def test_t_junction(self):
        m = np.zeros((15, 15), dtype=bool)
        m[7, 2:13] = True
        m[2:8, 7] = True
        assert len(endpoints(skeleton(Mask(m)))) == 3


class TestFitCurve:
    def test_exact_line(self):
        cm = fit_curve([(0, 1), (1, 3), (2, 5)], 1)
        assert cm.axis == "x"
        assert np.allclose(cm.coefficients, (1.0, 2.0), atol=1e-12)
        assert cm.rms_residual <= 1e-9

    def test_exact_quadratic(self):
        cm = fit_curve([(-1, 1), (0, 0), (1, 1), (2, 4)], 2)
        assert cm.axis == "x"
        assert np.allclose(cm.coefficients, (0.0, 0.0, 1.0), atol=1e-9)
        assert cm.rms_residual <= 1e-9

    def test_underdetermined(self):
        with pytest.raises(ValueError, match="at least"):
            fit_curve([(0, 0), (1, 1)], 2)

    def test_vertical_points_use_y_axis(self):
        cm = fit_curve([(1, 0), (3, 1), (5, 2)], 1)
        assert cm.axis == "x"
        vertical = fit_curve([(0, 0), (1, 1), (0.5, 2), (0, 3), (1, 4)], 1)
        assert vertical.axis == "y"

    def test_all_sharing_parameter_rejected(self):
        with pytest.raises(ValueError, match="parameter"):
            fit_curve([(2, 0), (2, 0), (2, 0)], 1)

    def test_interpolation_exactness(self):
        rng = np.random.default_rng(5)
        for degree in (1, 2, 3):
            xs = np.arange(degree + 1, dtype=float)
            ys = rng.uniform(-5, 5, degree + 1)
            cm = fit_curve(np.column_stack([xs, ys]), degree)
            assert cm.rms_residual < 1e-9

    def test_residual_never_grows_with_degree(self):
        rng = np.random.default_rng(6)
        pts = np.column_stack([np.arange(8, dtype=float), rng.uniform(0, 10, 8)])
        residuals = [fit_curve(pts, d).rms_residual for d in (1, 2, 3)]
        assert residuals[0] >= residuals[1] - 1e-12
        assert residuals[1] >= residuals[2] - 1e-12


class TestBridgeGaps:
    def straight_road(self, gap_cols=None):
        truth = np.zeros((15, 60), dtype=bool)
        truth[6:9, :] = True
        broken = truth.copy()
        if gap_cols:
            broken[:, gap_cols[0] : gap_cols[1]] = False
        return truth, Mask(broken)

    def test_no_gaps_unchanged(self):
        _, m = self.straight_road()
        assert bridge_gaps(m, 8).same_as(m)

    def test_single_gap_bridged(self):
        truth, m = self.straight_road((28, 33))
        assert label_components(m)[1] == 2
        out = bridge_gaps(m, 8, degree=2, context_len=10)
        assert label_components(out)[1] == 1
        inter = (out.bits & truth).sum()
        union = (out.bits | truth).sum()
        assert inter / union >= 0.95

    def test_parallel_roads_never_joined(self):
        m = np.zeros((40, 60), dtype=bool)
        m[8:11, :] = True
        m[28:31, :] = True  # 20 px apart
        out = bridge_gaps(Mask(m), 8)
        assert label_components(out)[1] == 2
        assert out.same_as(Mask(m))

    def test_output_superset_of_input(self):
        for seed in range(3):
            m = random_mask(seed + 120, 30, 30, density=0.25)
            out = bridge_gaps(m, 6)
            assert not (m.bits & ~out.bits).any()

    def test_curved_gap_follows_polynomial(self):
        # parabola-shaped ribbon with a missing stretch
        h, w = 60, 80
        truth = np.zeros((h, w), dtype=bool)
        for x in range(w):
            y = int(round(0.012 * (x - 40) ** 2 + 15))
            truth[max(0, y - 1) : y + 2, x] = True
        broken = truth.copy()
        broken[:, 37:44] = False
        out = bridge_gaps(Mask(broken), max_gap=12, degree=2, context_len=14)
        assert label_components(out)[1] == 1
        inter = (out.bits & truth).sum()
        union = (out.bits | truth).sum()
        assert inter / union >= 0.9

    def test_max_gap_validation(self):
        with pytest.raises(ValueError):
            bridge_gaps(Mask(np.zeros((4, 4), dtype=bool)), 0)
