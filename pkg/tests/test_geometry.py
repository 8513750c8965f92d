import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import helpers
from sketchgen.geometry import (
    EMPTY_SKETCH,
    GRID_MAX,
    ISOLATED_VERTEX,
    Arc,
    BadCardinalityError,
    Circle,
    CollinearPointsError,
    DegenerateGeometryError,
    Line,
    RepeatedVertexError,
    SketchHypergraph,
    circumcircle,
    find_loops,
    fit_circle_lsq,
    isomorphic,
    quantize_sketch,
    recover_primitive,
    validate_sketch,
)


def circle_points(center, radius, angles):
    return [
        (center[0] + radius * math.cos(a), center[1] + radius * math.sin(a))
        for a in angles
    ]


class TestCircumcircle:
    def test_unit_right_triangle(self):
        center, radius = circumcircle((0, 0), (1, 0), (0, 1))
        assert center == pytest.approx((0.5, 0.5))
        assert radius == pytest.approx(math.sqrt(0.5))

    def test_exact_on_circle_samples(self):
        pts = circle_points((12.0, -3.0), 7.5, [0.3, 1.9, 4.0])
        center, radius = circumcircle(*pts)
        assert center == pytest.approx((12.0, -3.0), abs=1e-9)
        assert radius == pytest.approx(7.5, abs=1e-9)

    def test_collinear_rejected(self):
        with pytest.raises(CollinearPointsError):
            circumcircle((0, 0), (5, 5), (10, 10))

    def test_coincident_rejected(self):
        with pytest.raises(CollinearPointsError):
            circumcircle((3, 3), (3, 3), (10, 2))

    @given(
        st.floats(-100, 100),
        st.floats(-100, 100),
        st.floats(1.0, 80.0),
        st.lists(
            st.floats(0, 2 * math.pi), min_size=3, max_size=3, unique=True
        ),
    )
    @settings(max_examples=200, deadline=None)
    def test_recovers_generating_circle(self, cx, cy, r, angles):
        angles = sorted(angles)
        if min(
            angles[1] - angles[0],
            angles[2] - angles[1],
            2 * math.pi - (angles[2] - angles[0]),
        ) < 1e-2:
            return  # nearly-coincident samples: conditioning not under test
        center, radius = circumcircle(*circle_points((cx, cy), r, angles))
        assert math.hypot(center[0] - cx, center[1] - cy) < 1e-6 * max(r, 1)
        assert abs(radius - r) < 1e-6 * max(r, 1)


class TestCircleFit:
    def test_exact_four_points(self):
        pts = circle_points((86.0, 128.0), 43.0, [0, 1.2, 3.1, 5.0])
        center, radius = fit_circle_lsq(pts)
        assert center == pytest.approx((86.0, 128.0), abs=1e-9)
        assert radius == pytest.approx(43.0, abs=1e-9)

    def test_many_points(self):
        pts = circle_points((-5.0, 2.0), 9.0, np.linspace(0, 6.2, 40))
        center, radius = fit_circle_lsq(pts)
        assert center == pytest.approx((-5.0, 2.0), abs=1e-9)
        assert radius == pytest.approx(9.0, abs=1e-9)

    def test_collinear_degenerate(self):
        with pytest.raises(DegenerateGeometryError):
            fit_circle_lsq([(0, 0), (1, 1), (2, 2), (3, 3)])

    def test_too_few_points(self):
        with pytest.raises(DegenerateGeometryError):
            fit_circle_lsq([(0, 0), (1, 1)])

    def test_offset_invariance(self):
        # centroid shift must make large offsets harmless
        base = circle_points((0.0, 0.0), 5.0, [0.1, 1.4, 2.8, 4.4])
        far = [(x + 1e6, y + 1e6) for x, y in base]
        center, radius = fit_circle_lsq(far)
        assert center == pytest.approx((1e6, 1e6), abs=1e-4)
        assert radius == pytest.approx(5.0, abs=1e-6)


class TestRecoverPrimitive:
    def test_line(self):
        prim = recover_primitive((0, 1), [(0, 0), (10, 5)])
        assert isinstance(prim, Line)

    def test_arc_orientation(self):
        verts = [(1, 0), (0, 1), (-1, 0)]
        prim = recover_primitive((0, 1, 2), verts)
        assert isinstance(prim, Arc)
        assert prim.ccw
        assert prim.center == pytest.approx((0, 0), abs=1e-9)
        prim = recover_primitive((2, 1, 0), verts)
        assert not prim.ccw

    def test_circle(self):
        verts = [(43, 0), (0, 43), (-43, 0), (0, -43)]
        prim = recover_primitive((0, 1, 2, 3), verts)
        assert isinstance(prim, Circle)
        assert prim.radius == pytest.approx(43.0, abs=1e-9)

    def test_bad_cardinality(self):
        with pytest.raises(BadCardinalityError):
            recover_primitive((0,), [(0, 0)])
        with pytest.raises(BadCardinalityError):
            recover_primitive((0, 1, 2, 3, 4), [(i, i * i) for i in range(5)])

    def test_repeated_vertex(self):
        with pytest.raises(RepeatedVertexError):
            recover_primitive((0, 0), [(1, 2)])


class TestValidate:
    def test_valid_triangle(self):
        g = SketchHypergraph.from_lists(
            [(0, 0), (10, 0), (5, 9)], [(0, 1), (1, 2), (2, 0)]
        )
        assert validate_sketch(g).is_valid

    def test_empty_sketch_flagged(self):
        report = validate_sketch(SketchHypergraph.from_lists([], []))
        assert not report.is_valid
        assert report.failures[0].category == EMPTY_SKETCH

    def test_isolated_vertex(self):
        g = SketchHypergraph.from_lists(
            [(0, 0), (10, 0), (200, 200)], [(0, 1)]
        )
        report = validate_sketch(g)
        cats = {f.category for f in report.failures}
        assert ISOLATED_VERTEX in cats

    def test_collinear_arc_invalid(self):
        g = SketchHypergraph.from_lists(
            [(0, 0), (5, 5), (10, 10)], [(0, 1, 2)]
        )
        assert not validate_sketch(g).is_valid

    def test_random_sketches_validate(self):
        for g in helpers.random_sketches(11, 50):
            assert validate_sketch(g).is_valid


class TestQuantize:
    def test_shorter_axis_centered(self):
        g = quantize_sketch([(0.0, 0.0), (2.0, 1.0)], [(0, 1)])
        assert g.vertices == ((0, 64), (255, 191))

    def test_unit_square_fills_grid(self):
        g = quantize_sketch(
            [(0, 0), (1, 0), (1, 1), (0, 1)],
            [(0, 1), (1, 2), (2, 3), (3, 0)],
        )
        assert set(g.vertices) == {(0, 0), (255, 0), (255, 255), (0, 255)}

    def test_collision_merge_remaps_edges(self):
        g = quantize_sketch(
            [(0.0, 0.0), (1e-4, 0.0), (100.0, 0.0), (0.0, 100.0)],
            [(0, 2), (1, 3)],
        )
        assert len(g.vertices) == 3
        assert g.edges[1][0] == g.edges[0][0]

    def test_degenerate_input(self):
        with pytest.raises(DegenerateGeometryError):
            quantize_sketch([(3.0, 3.0), (3.0, 3.0)], [])

    def test_in_grid(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(scale=50.0, size=(30, 2))
        g = quantize_sketch(pts, [])
        assert all(
            0 <= x <= GRID_MAX and 0 <= y <= GRID_MAX for x, y in g.vertices
        )


class TestLoops:
    def test_two_loops(self):
        g = SketchHypergraph.from_lists(
            [(0, 0), (10, 0), (5, 9), (100, 100), (110, 100), (105, 109)],
            [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)],
        )
        ls = find_loops(g)
        assert len(ls.loops) == 2
        assert not ls.open_chains

    def test_circle_is_own_loop(self):
        g = SketchHypergraph.from_lists(
            [(43, 0), (0, 43), (213, 0), (0, 213)], [(0, 1, 2, 3)]
        )
        ls = find_loops(g)
        assert ls.loops == ((0,),)

    def test_open_chain_detected(self):
        g = SketchHypergraph.from_lists(
            [(0, 0), (10, 0), (20, 10)], [(0, 1), (1, 2)]
        )
        ls = find_loops(g)
        assert not ls.loops
        assert len(ls.open_chains) == 1


class TestIsomorphism:
    def test_permutation_invariant(self):
        rng = np.random.default_rng(7)
        for g in helpers.random_sketches(21, 30):
            assert isomorphic(g, helpers.permute(g, rng))

    def test_translation_not_isomorphic(self):
        g = helpers.random_sketches(3, 1)[0]
        assert not isomorphic(g, helpers.translate(g, 1, 0))
