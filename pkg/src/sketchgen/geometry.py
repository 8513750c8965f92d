"""Hypergraph sketch representation and curve primitive recovery.

A sketch is a set of integer grid vertices plus hyperedges over them. The
number of vertices in a hyperedge selects the primitive: 2 for a line,
3 for an arc (start, on-arc interior point, end), 4 for a circle.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

GRID_SIZE = 256
GRID_MAX = GRID_SIZE - 1

# validity failure categories
CURVE_FIT_FAILURE = "curve_fit_failure"
BAD_CARDINALITY = "bad_cardinality"
REPEATED_VERTEX_IN_CURVE = "repeated_vertex_in_curve"
ISOLATED_VERTEX = "isolated_vertex"
EMPTY_SKETCH = "empty_sketch"


class GeometryError(ValueError):
    """Base class for geometry failures."""


class CollinearPointsError(GeometryError):
    category = CURVE_FIT_FAILURE


class DegenerateGeometryError(GeometryError):
    category = CURVE_FIT_FAILURE


class BadCardinalityError(GeometryError):
    category = BAD_CARDINALITY


class RepeatedVertexError(GeometryError):
    category = REPEATED_VERTEX_IN_CURVE


Point = tuple[float, float]


@dataclass(frozen=True)
class SketchHypergraph:
    """Immutable quantized sketch: grid vertices + hyperedges."""

    vertices: tuple[tuple[int, int], ...]
    edges: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for x, y in self.vertices:
            if not (isinstance(x, int) and isinstance(y, int)):
                raise GeometryError("vertex coordinates must be integers")
            if not (0 <= x <= GRID_MAX and 0 <= y <= GRID_MAX):
                raise GeometryError(
                    f"vertex ({x},{y}) outside [0,{GRID_MAX}] grid"
                )
        n = len(self.vertices)
        for e in self.edges:
            for i in e:
                if not isinstance(i, int) or not (0 <= i < n):
                    raise GeometryError(f"edge index {i} out of range")

    @classmethod
    def from_lists(cls, vertices, edges) -> "SketchHypergraph":
        return cls(
            tuple((int(x), int(y)) for x, y in vertices),
            tuple(tuple(int(i) for i in e) for e in edges),
        )


@dataclass(frozen=True)
class Line:
    start: Point
    end: Point


@dataclass(frozen=True)
class Arc:
    center: Point
    radius: float
    start: Point
    end: Point
    ccw: bool


@dataclass(frozen=True)
class Circle:
    center: Point
    radius: float


CurvePrimitive = Line | Arc | Circle


@dataclass(frozen=True)
class ValidityFailure:
    index: int  # edge index; vertex index for ISOLATED_VERTEX; -1 for EMPTY_SKETCH
    category: str


@dataclass(frozen=True)
class ValidityReport:
    failures: tuple[ValidityFailure, ...]

    @property
    def is_valid(self) -> bool:
        return not self.failures


def circumcircle(p1, p2, p3):
    """Circle through three points. Raises CollinearPointsError when degenerate.

    Degeneracy test: |signed area| < 1e-9 * (bbox diagonal)^2.
    """
    (x1, y1), (x2, y2), (x3, y3) = p1, p2, p3
    area2 = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)  # 2 * signed area
    xs = (x1, x2, x3)
    ys = (y1, y2, y3)
    diag_sq = (max(xs) - min(xs)) ** 2 + (max(ys) - min(ys)) ** 2
    if abs(area2) / 2.0 < 1e-9 * max(diag_sq, 1e-300):
        raise CollinearPointsError("points are collinear or coincident")
    # perpendicular bisector intersection, shifted to p1 for conditioning
    bx, by = x2 - x1, y2 - y1
    cx, cy = x3 - x1, y3 - y1
    d = 2.0 * (bx * cy - by * cx)
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    center = (x1 + ux, y1 + uy)
    radius = math.hypot(ux, uy)
    return center, radius


def fit_circle_lsq(points):
    """Algebraic least-squares circle fit minimizing sum((x-a)^2+(y-b)^2-r^2)^2.

    Linear in (a, b, c) after the substitution c = r^2 - a^2 - b^2. Points
    are shifted to their centroid first for conditioning. Raises
    DegenerateGeometryError when the normal equations are singular
    (collinear or coincident points).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise DegenerateGeometryError("need at least 3 two-dimensional points")
    centroid = pts.mean(axis=0)
    q = pts - centroid
    a_mat = np.column_stack([2.0 * q[:, 0], 2.0 * q[:, 1], np.ones(len(q))])
    rhs = (q ** 2).sum(axis=1)
    normal = a_mat.T @ a_mat
    sv = np.linalg.svd(normal, compute_uv=False)
    if sv[-1] <= 1e-12 * max(sv[0], 1e-300):
        raise DegenerateGeometryError("degenerate point set for circle fit")
    sol = np.linalg.solve(normal, a_mat.T @ rhs)
    a, b, c = sol
    r_sq = c + a * a + b * b
    if r_sq <= 0.0:
        raise DegenerateGeometryError("non-positive fitted radius")
    center = (float(a + centroid[0]), float(b + centroid[1]))
    return center, float(math.sqrt(r_sq))


def recover_primitive(edge, vertices) -> CurvePrimitive:
    """Recover the analytic primitive encoded by one hyperedge."""
    card = len(edge)
    if card not in (2, 3, 4):
        raise BadCardinalityError(f"hyperedge cardinality {card} not in {{2,3,4}}")
    pts = [tuple(map(float, vertices[i])) for i in edge]
    if len(set(pts)) != len(pts):
        raise RepeatedVertexError("repeated vertex within a curve")
    if card == 2:
        return Line(pts[0], pts[1])
    if card == 3:
        s, m, e = pts
        center, radius = circumcircle(s, m, e)
        ccw = (m[0] - s[0]) * (e[1] - s[1]) - (e[0] - s[0]) * (m[1] - s[1]) > 0
        return Arc(center, radius, s, e, ccw)
    center, radius = fit_circle_lsq(pts)
    return Circle(center, radius)


def validate_sketch(g: SketchHypergraph) -> ValidityReport:
    """Check every edge and vertex; failures are data, not exceptions."""
    failures = []
    if not g.edges:
        failures.append(ValidityFailure(-1, EMPTY_SKETCH))
    referenced = set()
    for idx, edge in enumerate(g.edges):
        referenced.update(edge)
        try:
            recover_primitive(edge, g.vertices)
        except GeometryError as exc:
            failures.append(ValidityFailure(idx, exc.category))
    for vid in range(len(g.vertices)):
        if vid not in referenced:
            failures.append(ValidityFailure(vid, ISOLATED_VERTEX))
    return ValidityReport(tuple(failures))


def _round_half_away(value: float) -> int:
    if value >= 0:
        return int(math.floor(value + 0.5))
    return int(math.ceil(value - 0.5))


def quantize_sketch(raw_vertices, edges) -> SketchHypergraph:
    """Scale/translate real vertices onto the 256x256 grid and merge collisions.

    The bounding box's longer side spans [0, 255]; the shorter axis is
    centered. Vertices landing on the same grid cell merge into one id.
    """
    pts = np.asarray(list(raw_vertices), dtype=float)
    if pts.ndim != 2 or len(pts) == 0:
        raise DegenerateGeometryError("need at least one vertex")
    if not np.isfinite(pts).all():
        raise GeometryError("non-finite coordinate")
    lo = pts.min(axis=0)
    extent = pts.max(axis=0) - lo
    longest = float(extent.max())
    if longest <= 0.0:
        raise DegenerateGeometryError("all vertices coincide")
    scale = GRID_MAX / longest
    offset = (GRID_MAX - extent * scale) / 2.0
    mapped = (pts - lo) * scale + offset
    quantized = [
        (_round_half_away(x), _round_half_away(y)) for x, y in mapped
    ]
    new_ids: dict[tuple[int, int], int] = {}
    remap = []
    merged = []
    for v in quantized:
        if v not in new_ids:
            new_ids[v] = len(merged)
            merged.append(v)
        remap.append(new_ids[v])
    new_edges = tuple(tuple(remap[i] for i in e) for e in edges)
    return SketchHypergraph(tuple(merged), new_edges)


@dataclass(frozen=True)
class LoopSet:
    """Partition of a sketch's edges into closed loops and open chains."""

    loops: tuple[tuple[int, ...], ...]
    open_chains: tuple[tuple[int, ...], ...]


def _edge_endpoints(edge):
    return edge[0], edge[-1]


def find_loops(g: SketchHypergraph) -> LoopSet:
    """Group edges into closed loops (consecutive endpoints coincide) and
    open chains. A circle edge is a loop by itself.
    """
    loops: list[tuple[int, ...]] = []
    chains: list[tuple[int, ...]] = []
    remaining: set[int] = set()
    for idx, edge in enumerate(g.edges):
        if len(edge) == 4:
            loops.append((idx,))
        elif len(edge) in (2, 3):
            a, b = _edge_endpoints(edge)
            if a == b:
                loops.append((idx,))  # degenerate self-closing edge
            else:
                remaining.add(idx)
        else:
            chains.append((idx,))

    adj: dict[int, list[int]] = defaultdict(list)  # vertex -> edge idxs
    for idx in remaining:
        a, b = _edge_endpoints(g.edges[idx])
        adj[a].append(idx)
        adj[b].append(idx)
    deg = Counter({v: len(es) for v, es in adj.items()})

    def other_end(eidx, v):
        a, b = _edge_endpoints(g.edges[eidx])
        return b if v == a else a

    def take_edge_at(v):
        for eidx in sorted(adj[v]):
            if eidx in remaining:
                return eidx
        return None

    # peel open chains anchored at degree-1 vertices
    progress = True
    while progress:
        progress = False
        for v in sorted(deg):
            if deg[v] != 1:
                continue
            chain = []
            cur = v
            while deg[cur] == 1:
                eidx = take_edge_at(cur)
                if eidx is None:
                    break
                remaining.discard(eidx)
                chain.append(eidx)
                nxt = other_end(eidx, cur)
                deg[cur] -= 1
                deg[nxt] -= 1
                cur = nxt
            if chain:
                chains.append(tuple(chain))
                progress = True

    # remaining graph has min degree 2; extract cycles greedily
    while remaining:
        cycle = _extract_cycle(g, remaining, deg)
        if cycle is None:
            break
        loops.append(cycle)
    # leftovers (bridges between cycles) become chains
    for eidx in sorted(remaining):
        chains.append((eidx,))
    return LoopSet(tuple(loops), tuple(chains))


def _extract_cycle(g, remaining, deg):
    """Walk along unused edges until a vertex repeats; that closes a cycle.

    Removes the cycle's edges from `remaining` and updates degrees.
    Requires every remaining vertex to have degree >= 2; returns None when
    no cycle can be closed (bridge-only leftovers).
    """
    adj: dict[int, list[int]] = defaultdict(list)
    for eidx in remaining:
        a, b = _edge_endpoints(g.edges[eidx])
        adj[a].append(eidx)
        adj[b].append(eidx)
    start = None
    for eidx in sorted(remaining):
        a, b = _edge_endpoints(g.edges[eidx])
        if deg[a] >= 2 and deg[b] >= 2:
            start = min(a, b)
            break
    if start is None:
        return None
    path_vertices = [start]
    path_edges: list[int] = []
    cur = start
    in_edge = None
    for _ in range(len(remaining) + 1):
        nxt_edge = None
        for eidx in sorted(adj[cur]):
            if eidx in remaining and eidx != in_edge:
                nxt_edge = eidx
                break
        if nxt_edge is None:
            return None
        w = other = None
        a, b = _edge_endpoints(g.edges[nxt_edge])
        w = b if cur == a else a
        if w in path_vertices:
            k = path_vertices.index(w)
            cycle = tuple(path_edges[k:]) + (nxt_edge,)
            for ce in cycle:
                remaining.discard(ce)
                ca, cb = _edge_endpoints(g.edges[ce])
                deg[ca] -= 1
                deg[cb] -= 1
            return cycle
        path_vertices.append(w)
        path_edges.append(nxt_edge)
        cur = w
        in_edge = nxt_edge
    return None


def oriented_loop(g: SketchHypergraph, loop):
    """Orient a loop's edges into draw order.

    Returns a list of per-edge vertex-id tuples such that the last id of
    each tuple equals the first id of the next (cyclically). A circle loop
    yields its single edge's ids unchanged.
    """
    if len(loop) == 1 and len(g.edges[loop[0]]) == 4:
        return [tuple(g.edges[loop[0]])]
    edges = [g.edges[i] for i in loop]
    if len(edges) == 1:
        e = edges[0]
        if e[0] != e[-1]:
            raise GeometryError("single-edge loop does not close")
        return [tuple(e)]
    first = edges[0]
    second = edges[1]
    a, b = _edge_endpoints(first)
    s0, s1 = _edge_endpoints(second)
    # orient first edge so its end touches the second edge
    if b in (s0, s1):
        oriented = [tuple(first)]
    elif a in (s0, s1):
        oriented = [_reverse_edge(first)]
    else:
        raise GeometryError("loop edges are not connected")
    for e in edges[1:]:
        cur_end = oriented[-1][-1]
        ea, eb = _edge_endpoints(e)
        if ea == cur_end:
            oriented.append(tuple(e))
        elif eb == cur_end:
            oriented.append(_reverse_edge(e))
        else:
            raise GeometryError("loop edges are not connected")
    if oriented[-1][-1] != oriented[0][0]:
        raise GeometryError("loop does not close")
    return oriented


def _reverse_edge(edge):
    return tuple(reversed(edge))


def isomorphism_signature(g: SketchHypergraph):
    """Order-independent exact-geometry signature.

    Two sketches are isomorphic (equal up to vertex/edge reindexing and
    geometry-preserving within-edge reorderings) iff signatures match.
    """
    sigs = []
    for e in g.edges:
        pts = [g.vertices[i] for i in e]
        if len(e) == 2:
            sigs.append(("line", tuple(sorted(pts))))
        elif len(e) == 3:
            s, m, t = pts
            sigs.append(("arc", tuple(sorted((s, t))), m))
        elif len(e) == 4:
            sigs.append(("circle", tuple(sorted(pts))))
        else:
            sigs.append(("other", tuple(sorted(pts))))
    used = sorted({g.vertices[i] for e in g.edges for i in e})
    return (tuple(sorted(g.vertices)), tuple(used), tuple(sorted(sigs)))


def isomorphic(a: SketchHypergraph, b: SketchHypergraph) -> bool:
    return isomorphism_signature(a) == isomorphism_signature(b)
