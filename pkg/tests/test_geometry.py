import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boxloss.geometry import Box2D, Enclosure, area, enclosing, intersection_area, iou, union_area
from conftest import random_boxes


def _raster(a, b, res=0.001, extent=3.0):
    """Pixel-count oracle for intersection and union areas."""
    xs = np.arange(-extent, extent, res) + res / 2
    X, Y = np.meshgrid(xs, xs, indexing="ij")

    def inside(box):
        return (np.abs(X - box.cx) < box.w / 2) & (np.abs(Y - box.cy) < box.h / 2)

    ma, mb = inside(a), inside(b)
    return (ma & mb).sum() * res * res, (ma | mb).sum() * res * res


class TestBox2D:
    def test_rejects_nonpositive_size(self):
        with pytest.raises(ValueError):
            Box2D(0, 0, 0, 1)
        with pytest.raises(ValueError):
            Box2D(0, 0, 1, -1)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Box2D(float("nan"), 0, 1, 1)
        with pytest.raises(ValueError):
            Box2D(0, 0, float("inf"), 1)

    def test_roundtrip(self):
        b = Box2D(1.5, -2, 3, 4)
        assert Box2D.from_array(b.to_array()) == b
        assert b.area == 12


class TestIntersection:
    def test_identity(self):
        assert intersection_area(Box2D(0, 0, 2, 2), Box2D(0, 0, 2, 2)) == 4

    def test_disjoint(self):
        assert intersection_area(Box2D(0, 0, 2, 2), Box2D(10, 10, 2, 2)) == 0

    def test_half_overlap_matches_raster(self):
        a, b = Box2D(0, 0, 2, 2), Box2D(1, 0, 2, 2)
        inter, _ = _raster(a, b)
        assert intersection_area(a, b) == 2
        assert inter == pytest.approx(2, rel=5e-3)

    def test_touching_edges_is_exactly_zero(self):
        assert intersection_area(Box2D(0, 0, 2, 2), Box2D(2, 0, 2, 2)) == 0.0

    def test_bounded_by_smaller_area(self, rng):
        a, b = random_boxes(rng, 10_000), random_boxes(rng, 10_000)
        inter = intersection_area(a, b)
        assert np.all(inter <= np.minimum(area(a), area(b)) + 1e-15)
        assert np.all(inter >= 0)


class TestIoU:
    def test_values(self):
        assert iou(Box2D(0, 0, 2, 2), Box2D(0, 0, 2, 2)) == 1.0
        assert iou(Box2D(0, 0, 2, 2), Box2D(10, 10, 2, 2)) == 0.0
        a, b = Box2D(0, 0, 2, 2), Box2D(1, 0, 2, 2)
        assert iou(a, b) == pytest.approx(1 / 3, abs=1e-15)
        inter, union = _raster(a, b)
        assert inter / union == pytest.approx(1 / 3, rel=5e-3)
        assert union_area(a, b) == 6

    def test_bounds_million_pairs(self):
        rng = np.random.default_rng(1)
        a, b = random_boxes(rng, 1_000_000), random_boxes(rng, 1_000_000)
        v = iou(a, b)
        assert v.min() >= 0 and v.max() <= 1

    def test_symmetric(self, rng):
        a, b = random_boxes(rng, 10_000), random_boxes(rng, 10_000)
        np.testing.assert_array_equal(iou(a, b), iou(b, a))

    def test_one_only_for_identical(self, rng):
        a = random_boxes(rng, 1000)
        np.testing.assert_array_equal(iou(a, a), 1.0)
        b = a.copy()
        b[:, 0] += 1e-3
        assert np.all(iou(a, b) < 1)

    def test_translation_and_scale_invariance(self, rng):
        a, b = random_boxes(rng, 10_000), random_boxes(rng, 10_000)
        base = iou(a, b)
        shift = np.array([3.7, -12.1, 0, 0])
        np.testing.assert_allclose(iou(a + shift, b + shift), base, atol=1e-12, rtol=0)
        s = 7.3
        np.testing.assert_allclose(iou(a * s, b * s), base, atol=1e-12, rtol=0)

    @settings(max_examples=200, deadline=None)
    @given(
        st.tuples(*[st.floats(-5, 5)] * 2, *[st.floats(0.01, 5)] * 2),
        st.tuples(*[st.floats(-5, 5)] * 2, *[st.floats(0.01, 5)] * 2),
    )
    def test_property_range_and_symmetry(self, a, b):
        ba, bb = Box2D(*a), Box2D(*b)
        v = iou(ba, bb)
        assert 0.0 <= v <= 1.0
        assert v == iou(bb, ba)


class TestEnclosing:
    def test_identical(self):
        assert enclosing(Box2D(1, 2, 3, 4), Box2D(1, 2, 3, 4)) == Enclosure(3, 4)

    def test_offset(self):
        assert enclosing(Box2D(0, 0, 2, 2), Box2D(1, 1, 2, 2)) == Enclosure(3, 3)

    def test_nested_extents(self):
        assert enclosing(Box2D(0, 0, 4, 1), Box2D(0, 0, 1, 4)) == Enclosure(4, 4)

    def test_covers_both_and_symmetric(self, rng):
        a, b = random_boxes(rng, 5000), random_boxes(rng, 5000)
        cw, ch = enclosing(a, b)
        assert np.all(cw >= np.maximum(a[:, 2], b[:, 2]) - 1e-12)
        assert np.all(ch >= np.maximum(a[:, 3], b[:, 3]) - 1e-12)
        cw2, ch2 = enclosing(b, a)
        np.testing.assert_array_equal(cw, cw2)
        np.testing.assert_array_equal(ch, ch2)
