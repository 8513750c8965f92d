import numpy as np
import pytest

import helpers
from sketchgen.geometry import SketchHypergraph, isomorphic
from sketchgen.tokens import (
    COMMAND_IDS,
    COORD_VOCAB,
    PAD,
    ROW_WIDTH,
    STOP_TOKEN,
    TokenError,
    canonicalize,
    decode_curves,
    decode_sketch,
    decode_turtle,
    decode_vertices,
    encode_curves,
    encode_sketch,
    encode_turtle,
    encode_vertices,
    jitter,
)
from sketchgen.turtle import encode as turtle_encode
from sketchgen.turtle import parse


class TestVertexTokens:
    def test_sorted_y_then_x(self):
        g = SketchHypergraph.from_lists(
            [(5, 9), (0, 0), (10, 0)], [(1, 2), (2, 0), (0, 1)]
        )
        assert encode_vertices(g) == [0, 0, 0, 10, 9, 5, STOP_TOKEN]

    def test_round_trip(self):
        for g in helpers.random_sketches(101, 50):
            verts = decode_vertices(encode_vertices(g))
            assert sorted(verts) == sorted(g.vertices)

    def test_missing_stop(self):
        with pytest.raises(TokenError, match="stop"):
            decode_vertices([1, 2, 3, 4])

    def test_dangling_half_pair(self):
        with pytest.raises(TokenError, match="half"):
            decode_vertices([1, 2, 3, STOP_TOKEN])

    def test_tokens_after_stop(self):
        with pytest.raises(TokenError, match="after stop"):
            decode_vertices([1, 2, STOP_TOKEN, 3, 4, STOP_TOKEN])

    def test_out_of_vocab(self):
        with pytest.raises(TokenError):
            decode_vertices([1, 300, STOP_TOKEN])


class TestCurveTokens:
    def test_round_trip_canonical(self):
        for g in helpers.random_sketches(111, 100):
            c = canonicalize(g)
            assert decode_sketch(*encode_sketch(c)) == c

    def test_canonicalize_preserves_geometry(self):
        for g in helpers.random_sketches(121, 50):
            assert isomorphic(canonicalize(g), g)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(4)
        for g in helpers.random_sketches(131, 50):
            h = helpers.permute(g, rng)
            assert encode_sketch(g) == encode_sketch(h)

    def test_markers(self):
        g = SketchHypergraph.from_lists(
            [(0, 0), (10, 0), (5, 9)], [(0, 1), (1, 2), (2, 0)]
        )
        toks = encode_curves(g)
        n = len(g.vertices)
        assert toks[-1] == n + 1
        assert toks.count(n) == len(g.edges)

    def test_bad_cardinality(self):
        verts = [(0, 0), (10, 0), (5, 9)]
        with pytest.raises(TokenError):
            decode_curves([0, 3, 3, 4], verts)  # 1-pointer curve

    def test_repeated_pointer(self):
        verts = [(0, 0), (10, 0), (5, 9)]
        with pytest.raises(TokenError, match="repeated"):
            decode_curves([0, 0, 3, 4], verts)

    def test_missing_end_of_sketch(self):
        verts = [(0, 0), (10, 0), (5, 9)]
        with pytest.raises(TokenError, match="end-of-sketch"):
            decode_curves([0, 1, 3], verts)


class TestTurtleRows:
    def test_row_shape(self):
        p = parse("loopstart((10,20)) line((5,0)) line((-5,0))")
        rows = encode_turtle(p)
        assert all(len(r) == ROW_WIDTH for r in rows)
        assert rows[0][0] == COMMAND_IDS["start"]
        assert rows[-1][0] == COMMAND_IDS["end"]
        assert rows[0][1:] == (PAD,) * (ROW_WIDTH - 1)

    def test_round_trip(self):
        for g in helpers.random_sketches(141, 100):
            p = turtle_encode(g)
            assert decode_turtle(encode_turtle(p)) == p

    def test_negative_deltas_in_vocab(self):
        p = parse("loopstart((100,100)) line((-99,0)) line((99,0))")
        for row in encode_turtle(p):
            assert all(0 <= c < COORD_VOCAB for c in row[1:])

    def test_bad_frame_rows(self):
        p = parse("loopstart((10,20)) line((5,0)) line((-5,0))")
        rows = encode_turtle(p)
        with pytest.raises(TokenError):
            decode_turtle(rows[1:])  # no start row
        with pytest.raises(TokenError):
            decode_turtle(rows[:-1])  # no end row
        with pytest.raises(TokenError):
            decode_turtle(rows + [rows[0]])  # start row inside

    def test_bad_width(self):
        with pytest.raises(TokenError, match="width"):
            decode_turtle([(0, 1, 2)])

    def test_structure_error_becomes_token_error(self):
        rows = [
            (COMMAND_IDS["start"],) + (PAD,) * 6,
            (COMMAND_IDS["line"],) + (PAD,) * 6,  # program lacks loopstart
            (COMMAND_IDS["end"],) + (PAD,) * 6,
        ]
        with pytest.raises(TokenError):
            decode_turtle(rows)


class TestJitter:
    def test_deterministic(self):
        g = helpers.random_sketches(151, 1)[0]
        assert jitter(g, seed=5) == jitter(g, seed=5)
        assert jitter(g, seed=5) != jitter(g, seed=6)

    def test_stays_in_bbox(self):
        for g in helpers.random_sketches(161, 20):
            xs = [v[0] for v in g.vertices]
            ys = [v[1] for v in g.vertices]
            for (x, y) in jitter(g, seed=1):
                assert min(xs) <= x <= max(xs)
                assert min(ys) <= y <= max(ys)

    def test_variance_near_tenth(self):
        # interior points far from the bbox edge are barely truncated
        verts = [(x, y) for x in range(20, 240, 8) for y in range(20, 240, 8)]
        g = SketchHypergraph.from_lists(
            verts + [(0, 0), (255, 255)], []
        )
        deltas = []
        for seed in range(30):
            for (jx, jy), (x, y) in zip(jitter(g, seed), g.vertices):
                if 10 < x < 245 and 10 < y < 245:
                    deltas += [jx - x, jy - y]
        var = float(np.var(deltas))
        assert abs(var - 0.1) < 0.01

    def test_zero_extent_axis(self):
        g = SketchHypergraph.from_lists([(5, 0), (5, 100)], [(0, 1)])
        pts = jitter(g, seed=0)
        assert all(x == 5 for x, _ in pts)
