"""Random valid sketches and turtle programs for property tests.

Loops are placed in disjoint quadrants of the grid so vertex sets never
collide, which keeps every generated sketch loop-decomposable and every
vertex coordinate unique.
"""

import math

import numpy as np

from sketchgen.geometry import (
    GRID_MAX,
    SketchHypergraph,
    validate_sketch,
)

# quadrant boxes (xlo, ylo, xhi, yhi) with a gap between them
QUADRANTS = [
    (5, 5, 120, 120),
    (136, 5, 250, 120),
    (5, 136, 120, 250),
    (136, 136, 250, 250),
]


def _round_pt(x, y):
    return (int(round(x)), int(round(y)))


def _in_box(p, box):
    xlo, ylo, xhi, yhi = box
    return xlo <= p[0] <= xhi and ylo <= p[1] <= yhi


def _ring_points(rng, box, n):
    """n distinct points in angular order around a random center."""
    xlo, ylo, xhi, yhi = box
    for _ in range(50):
        cx = rng.uniform(xlo + 25, xhi - 25)
        cy = rng.uniform(ylo + 25, yhi - 25)
        r = rng.uniform(12, 24)
        # jittered equal spacing keeps neighbouring points apart
        spacing = 2 * math.pi / n
        angles = (
            np.arange(n) * spacing
            + rng.uniform(0, spacing)
            + rng.uniform(-0.3 * spacing, 0.3 * spacing, size=n)
        )
        pts = [
            _round_pt(cx + r * math.cos(a), cy + r * math.sin(a))
            for a in angles
        ]
        if len(set(pts)) != n:
            continue
        if not all(_in_box(p, box) for p in pts):
            continue
        return pts
    raise RuntimeError("could not place a ring")


def _collinear(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) == (c[0] - a[0]) * (b[1] - a[1])


def polygon_loop(rng, box):
    n = int(rng.integers(3, 7))
    pts = _ring_points(rng, box, n)
    edges = [(i, (i + 1) % n) for i in range(n)]
    return pts, edges


def arc_loop(rng, box):
    """A polygon with one edge replaced by an arc through a bulge point."""
    for _ in range(50):
        n = int(rng.integers(3, 6))
        pts = _ring_points(rng, box, n)
        a, b = pts[0], pts[1]
        mx, my = (a[0] + b[0]) / 2, (a[1] + b[1]) / 2
        # outward normal of the edge (away from the ring interior)
        nx, ny = a[1] - b[1], b[0] - a[0]
        norm = math.hypot(nx, ny)
        bulge = rng.uniform(3, 8)
        m = _round_pt(mx - nx / norm * bulge, my - ny / norm * bulge)
        if m in pts or _collinear(a, m, b) or not _in_box(m, box):
            continue
        verts = pts + [m]
        edges = [(0, len(pts), 1)] + [
            (i, (i + 1) % n) for i in range(1, n)
        ]
        return verts, edges
    raise RuntimeError("could not place an arc loop")


def circle_loop(rng, box):
    pts = _ring_points(rng, box, 4)
    return pts, [(0, 1, 2, 3)]


LOOP_MAKERS = [polygon_loop, arc_loop, circle_loop]


def random_sketch(rng) -> SketchHypergraph:
    """A random valid sketch of 1-4 vertex-disjoint loops."""
    for _ in range(50):
        k = int(rng.integers(1, 5))
        quads = rng.permutation(len(QUADRANTS))[:k]
        verts: list[tuple[int, int]] = []
        edges: list[tuple[int, ...]] = []
        for q in quads:
            maker = LOOP_MAKERS[int(rng.integers(len(LOOP_MAKERS)))]
            lv, le = maker(rng, QUADRANTS[int(q)])
            base = len(verts)
            verts.extend(lv)
            edges.extend(tuple(base + i for i in e) for e in le)
        if len(set(verts)) != len(verts):
            continue
        g = SketchHypergraph.from_lists(verts, edges)
        if validate_sketch(g).is_valid:
            return g
    raise RuntimeError("could not generate a valid sketch")


def random_sketches(seed, count):
    rng = np.random.default_rng(seed)
    return [random_sketch(rng) for _ in range(count)]


def translate(g: SketchHypergraph, dx, dy) -> SketchHypergraph:
    verts = [(x + dx, y + dy) for x, y in g.vertices]
    if any(not (0 <= x <= GRID_MAX and 0 <= y <= GRID_MAX) for x, y in verts):
        raise ValueError("translation leaves the grid")
    return SketchHypergraph.from_lists(verts, g.edges)


def scale(g: SketchHypergraph, factor) -> SketchHypergraph:
    verts = [(x * factor, y * factor) for x, y in g.vertices]
    if any(not (0 <= x <= GRID_MAX and 0 <= y <= GRID_MAX) for x, y in verts):
        raise ValueError("scaling leaves the grid")
    return SketchHypergraph.from_lists(verts, g.edges)


def permute(g: SketchHypergraph, rng) -> SketchHypergraph:
    """Relabel vertices and shuffle edge order (same geometry)."""
    perm = rng.permutation(len(g.vertices))
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    verts = [g.vertices[int(i)] for i in perm]
    edges = [tuple(int(inv[v]) for v in e) for e in g.edges]
    rng.shuffle(edges)
    return SketchHypergraph.from_lists(verts, edges)
