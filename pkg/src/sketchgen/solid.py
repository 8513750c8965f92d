"""Sketch post-processing: closed profiles, extrusion to watertight meshes,
and parallel/perpendicular/coincident constraint detection and snapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    GRID_MAX,
    Arc,
    Circle,
    GeometryError,
    Line,
    SketchHypergraph,
    circumcircle,
    find_loops,
    fit_circle_lsq,
    oriented_loop,
    recover_primitive,
)

DEFAULT_TESSELLATION = 64
MIN_ARC_SEGMENTS = 8
TWO_PI = 2.0 * math.pi


class SolidError(ValueError):
    pass


class ProfileError(SolidError):
    pass


# --- loop tessellation ---------------------------------------------------

def _arc_params(s, m, e):
    center, radius = circumcircle(s, m, e)
    a0 = math.atan2(s[1] - center[1], s[0] - center[0])
    a1 = math.atan2(e[1] - center[1], e[0] - center[0])
    ccw = (m[0] - s[0]) * (e[1] - s[1]) - (e[0] - s[0]) * (m[1] - s[1]) > 0
    if ccw:
        sweep = (a1 - a0) % TWO_PI
    else:
        sweep = -((a0 - a1) % TWO_PI)
    return center, radius, a0, sweep


def tessellate_loop(g: SketchHypergraph, loop, segments=DEFAULT_TESSELLATION):
    """Closed polyline (last point omitted) approximating a loop.

    Arcs/circles get `segments` pieces per full turn, proportionally fewer
    for partial sweeps, never below MIN_ARC_SEGMENTS.
    """
    oriented = oriented_loop(g, loop)
    if len(oriented) == 1 and len(oriented[0]) == 4:
        pts = [g.vertices[i] for i in oriented[0]]
        center, radius = fit_circle_lsq(pts)
        start = math.atan2(pts[0][1] - center[1], pts[0][0] - center[0])
        n = max(int(segments), 3)
        return [
            (
                center[0] + radius * math.cos(start + TWO_PI * k / n),
                center[1] + radius * math.sin(start + TWO_PI * k / n),
            )
            for k in range(n)
        ]
    ring = []
    for edge in oriented:
        pts = [g.vertices[i] for i in edge]
        if len(edge) == 2:
            ring.append(tuple(map(float, pts[0])))
        else:
            s, m, e = (tuple(map(float, p)) for p in pts)
            center, radius, a0, sweep = _arc_params(s, m, e)
            n = max(
                MIN_ARC_SEGMENTS,
                int(math.ceil(abs(sweep) / TWO_PI * segments)),
            )
            for k in range(n):
                a = a0 + sweep * k / n
                ring.append(
                    (
                        center[0] + radius * math.cos(a),
                        center[1] + radius * math.sin(a),
                    )
                )
    # drop exact consecutive duplicates
    out = []
    for p in ring:
        if not out or p != out[-1]:
            out.append(p)
    if len(out) > 1 and out[0] == out[-1]:
        out.pop()
    if len(out) < 3:
        raise ProfileError("loop tessellates to fewer than 3 points")
    return out


def _polygon_area(ring):
    s = 0.0
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def _point_in_polygon(point, ring):
    x, y = point
    inside = False
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        if (y0 > y) != (y1 > y):
            t = (y - y0) / (y1 - y0)
            if x < x0 + t * (x1 - x0):
                inside = not inside
    return inside


def _segments_properly_intersect(p1, p2, p3, p4):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _rings_intersect(a, b):
    for i in range(len(a)):
        p1, p2 = a[i], a[(i + 1) % len(a)]
        for j in range(len(b)):
            p3, p4 = b[j], b[(j + 1) % len(b)]
            if _segments_properly_intersect(p1, p2, p3, p4):
                return True
    return False


@dataclass(frozen=True)
class Profile:
    """One extrudable region: an outer loop plus zero or more holes.

    Loops are edge-index tuples into the source sketch.
    """

    sketch: SketchHypergraph
    outer: tuple[int, ...]
    holes: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class ProfileSet:
    profiles: tuple[Profile, ...]
    open_chains: tuple[tuple[int, ...], ...]


def build_profiles(g: SketchHypergraph, segments=DEFAULT_TESSELLATION) -> ProfileSet:
    """Classify closed loops into outer boundaries and holes by containment
    depth (even depth: outer, odd depth: hole of its direct container).
    Open-chain edges are reported and excluded."""
    loop_set = find_loops(g)
    loops = list(loop_set.loops)
    rings = []
    for loop in loops:
        orient = tessellate_loop(g, loop, segments)
        if abs(_polygon_area(orient)) <= 1e-12:
            raise ProfileError("zero-area loop")
        rings.append(orient)
    for i in range(len(rings)):
        for j in range(i + 1, len(rings)):
            if _rings_intersect(rings[i], rings[j]):
                raise ProfileError(f"loops {i} and {j} intersect")
    # rings never properly intersect, so any boundary vertex of ring i
    # decides whether loop j contains loop i
    containers = [
        [
            j
            for j in range(len(rings))
            if j != i and _point_in_polygon(rings[i][0], rings[j])
        ]
        for i in range(len(rings))
    ]
    depth = [len(c) for c in containers]
    profiles = []
    for i in range(len(rings)):
        if depth[i] % 2:
            continue  # hole: attached to its direct container below
        holes = tuple(
            tuple(loops[j])
            for j in range(len(rings))
            if depth[j] == depth[i] + 1 and i in containers[j]
        )
        profiles.append(Profile(g, tuple(loops[i]), holes))
    return ProfileSet(tuple(profiles), loop_set.open_chains)


# --- triangulation -------------------------------------------------------

def _ear_clip(ring, pts):
    """Triangulate an index ring (CCW, may contain bridge duplicates)."""
    ring = list(ring)
    tris = []
    scale = max(
        max(abs(p[0]) for p in pts), max(abs(p[1]) for p in pts), 1.0
    )
    eps = 1e-12 * scale * scale

    def cross(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])

    def inside_strict(p, a, b, c):
        if p == a or p == b or p == c:
            return False
        d1 = cross(a, b, p)
        d2 = cross(b, c, p)
        d3 = cross(c, a, p)
        return d1 > eps and d2 > eps and d3 > eps

    while len(ring) > 3:
        n = len(ring)
        best_flat = None
        clipped = False
        for k in range(n):
            ia, ib, ic = ring[(k - 1) % n], ring[k], ring[(k + 1) % n]
            pa, pb, pc = pts[ia], pts[ib], pts[ic]
            area2 = cross(pa, pb, pc)
            if area2 <= eps:
                if abs(area2) <= eps and best_flat is None:
                    best_flat = k
                continue
            if any(
                inside_strict(pts[r], pa, pb, pc)
                for r in ring
                if r not in (ia, ib, ic)
            ):
                continue
            tris.append((ia, ib, ic))
            ring.pop(k)
            clipped = True
            break
        if not clipped:
            if best_flat is None:
                raise SolidError("ear clipping failed (self-intersecting ring?)")
            # clip a flat (zero-area) corner to make progress
            k = best_flat
            tris.append(
                (ring[(k - 1) % len(ring)], ring[k], ring[(k + 1) % len(ring)])
            )
            ring.pop(k)
    tris.append(tuple(ring))
    return tris


def _bridge_holes(outer, holes):
    """Merge hole rings into the outer ring via mutually visible bridges.

    Returns (points, ring) where ring is an index cycle over points with
    bridge vertices duplicated.
    """
    pts = [tuple(p) for p in outer]
    ring = list(range(len(outer)))
    pending = []
    for h in holes:
        base = len(pts)
        pts.extend(tuple(p) for p in h)
        pending.append(list(range(base, base + len(h))))
    # attach holes outermost-first for stable bridging
    pending.sort(key=lambda ids: -max(pts[i][0] for i in ids))

    def visible(i, j, rings):
        a, b = pts[i], pts[j]
        if a == b:
            return False
        for r in rings:
            n = len(r)
            for k in range(n):
                p, q = pts[r[k]], pts[r[(k + 1) % n]]
                if i in (r[k], r[(k + 1) % n]) or j in (r[k], r[(k + 1) % n]):
                    continue
                if _segments_properly_intersect(a, b, p, q):
                    return False
        return True

    remaining = list(pending)
    for hole in pending:
        remaining = [h for h in remaining if h is not hole]
        candidates = sorted(
            (
                (pts[ring[ri]][0] - pts[hole[hi]][0]) ** 2
                + (pts[ring[ri]][1] - pts[hole[hi]][1]) ** 2,
                ri,
                hi,
            )
            for ri in range(len(ring))
            for hi in range(len(hole))
        )
        ring_poly = [pts[i] for i in ring]
        attached = False
        for _, ri, hi in candidates:
            i, j = ring[ri], hole[hi]
            mid = ((pts[i][0] + pts[j][0]) / 2.0, (pts[i][1] + pts[j][1]) / 2.0)
            if not _point_in_polygon(mid, ring_poly):
                continue
            if visible(i, j, [ring] + remaining + [hole]):
                rotated = hole[hi:] + hole[:hi]
                ring = (
                    ring[: ri + 1]
                    + [rotated[0]]
                    + rotated[1:]
                    + [rotated[0], ring[ri]]
                    + ring[ri + 1 :]
                )
                attached = True
                break
        if not attached:
            raise SolidError("could not bridge hole into outer ring")
    return pts, ring


def triangulate_profile_rings(outer, holes):
    """Triangulate a CCW outer ring with CW holes; returns (points, tris)."""
    if _polygon_area(outer) < 0:
        outer = list(reversed(outer))
    holes = [
        list(reversed(h)) if _polygon_area(h) > 0 else list(h) for h in holes
    ]
    if holes:
        pts, ring = _bridge_holes(outer, holes)
    else:
        pts, ring = [tuple(p) for p in outer], list(range(len(outer)))
    return pts, _ear_clip(ring, pts)


# --- meshes --------------------------------------------------------------

@dataclass
class SolidMesh:
    vertices: list[tuple[float, float, float]]
    triangles: list[tuple[int, int, int]]


def extrude(profile: Profile, height, segments=DEFAULT_TESSELLATION) -> SolidMesh:
    """Sweep a profile along +z into a watertight triangle mesh."""
    if height <= 0:
        raise SolidError("height must be positive")
    g = profile.sketch
    outer = tessellate_loop(g, profile.outer, segments)
    if _polygon_area(outer) < 0:
        outer = list(reversed(outer))
    holes = []
    for hole in profile.holes:
        ring = tessellate_loop(g, hole, segments)
        if _polygon_area(ring) > 0:
            ring = list(reversed(ring))
        holes.append(ring)
    pts2d, cap_tris = triangulate_profile_rings(outer, holes)
    n = len(pts2d)
    vertices = [(x, y, 0.0) for x, y in pts2d] + [
        (x, y, float(height)) for x, y in pts2d
    ]
    triangles: list[tuple[int, int, int]] = []
    for a, b, c in cap_tris:
        triangles.append((a, c, b))  # bottom cap, normal -z
        triangles.append((a + n, b + n, c + n))  # top cap, normal +z
    rings = [list(range(len(outer)))]
    offset = len(outer)
    for h in holes:
        rings.append(list(range(offset, offset + len(h))))
        offset += len(h)
    for ring in rings:
        m = len(ring)
        for k in range(m):
            i, j = ring[k], ring[(k + 1) % m]
            triangles.append((i, j, j + n))
            triangles.append((i, j + n, i + n))
    return SolidMesh(vertices, triangles)


def mesh_checks(mesh: SolidMesh):
    """(watertight, oriented, signed volume)."""
    from collections import Counter

    undirected = Counter()
    directed = Counter()
    for a, b, c in mesh.triangles:
        for i, j in ((a, b), (b, c), (c, a)):
            undirected[frozenset((i, j))] += 1
            directed[(i, j)] += 1
    watertight = all(v == 2 for v in undirected.values())
    oriented = all(v == 1 for v in directed.values())
    return watertight, oriented, signed_volume(mesh)


def signed_volume(mesh: SolidMesh) -> float:
    v = np.asarray(mesh.vertices)
    t = np.asarray(mesh.triangles)
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def obj_dumps(mesh: SolidMesh) -> str:
    lines = []
    for x, y, z in mesh.vertices:
        lines.append(f"v {x:.9g} {y:.9g} {z:.9g}")
    for a, b, c in mesh.triangles:
        lines.append(f"f {a + 1} {b + 1} {c + 1}")
    return "\n".join(lines) + "\n"


# --- constraints ---------------------------------------------------------

@dataclass(frozen=True)
class ConstraintHint:
    kind: str  # "parallel" | "perpendicular" | "coincident"
    a: int  # edge index (parallel/perpendicular) or vertex index
    b: int
    deviation: float  # radians, or grid units for coincident


def _line_angle(g, edge):
    (x0, y0), (x1, y1) = g.vertices[edge[0]], g.vertices[edge[1]]
    return math.atan2(y1 - y0, x1 - x0) % math.pi


def detect_constraints(g: SketchHypergraph, angle_tol, dist_tol) -> list[ConstraintHint]:
    """All near-parallel/perpendicular line pairs and near-coincident
    vertex pairs, in deterministic (kind, a, b) order."""
    line_ids = [
        i
        for i, e in enumerate(g.edges)
        if len(e) == 2 and g.vertices[e[0]] != g.vertices[e[1]]
    ]
    hints = []
    for ai in range(len(line_ids)):
        for bi in range(ai + 1, len(line_ids)):
            i, j = line_ids[ai], line_ids[bi]
            d = abs(_line_angle(g, g.edges[i]) - _line_angle(g, g.edges[j]))
            d = min(d, math.pi - d)
            if d <= angle_tol:
                hints.append(ConstraintHint("parallel", i, j, d))
            elif abs(d - math.pi / 2) <= angle_tol:
                hints.append(
                    ConstraintHint("perpendicular", i, j, abs(d - math.pi / 2))
                )
    for i in range(len(g.vertices)):
        for j in range(i + 1, len(g.vertices)):
            dist = math.dist(g.vertices[i], g.vertices[j])
            if dist <= dist_tol:
                hints.append(ConstraintHint("coincident", i, j, dist))
    hints.sort(key=lambda h: (h.kind, h.a, h.b))
    return hints


@dataclass
class SnapResult:
    sketch: SketchHypergraph
    unapplied: list[ConstraintHint]


def snap_constraints(g: SketchHypergraph, hints) -> SnapResult:
    """Least-change vertex adjustment enforcing the hinted constraints.

    Lines in each parallel/perpendicular cluster snap to exact multiples
    of 90 degrees from the cluster's reference direction (its longest
    line); coincident vertices merge. Solved as an equality-constrained
    least squares problem over all vertex coordinates, then re-quantized.
    """
    n = len(g.vertices)
    v0 = np.asarray(g.vertices, dtype=float).reshape(-1)

    # cluster lines connected by angle hints
    angle_hints = [h for h in hints if h.kind in ("parallel", "perpendicular")]
    parent: dict[int, int] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for h in angle_hints:
        ra, rb = find(h.a), find(h.b)
        if ra != rb:
            parent[ra] = rb
    clusters: dict[int, list[int]] = {}
    for h in angle_hints:
        for e in (h.a, h.b):
            clusters.setdefault(find(e), [])
            if e not in clusters[find(e)]:
                clusters[find(e)].append(e)

    def _rotation_cost(theta_ref, members):
        # total squared rotation if every member snaps to its nearest
        # 90-degree multiple of theta_ref
        cost = 0.0
        for e in members:
            d = (_line_angle(g, g.edges[e]) - theta_ref) % (math.pi / 2)
            cost += min(d, math.pi / 2 - d) ** 2
        return cost

    rows = []
    row_hints = []
    for members in clusters.values():
        # reference = member direction needing the least total rotation;
        # ties go to the longest line
        ref = min(
            members,
            key=lambda e: (
                _rotation_cost(_line_angle(g, g.edges[e]), members),
                -math.dist(
                    g.vertices[g.edges[e][0]], g.vertices[g.edges[e][1]]
                ),
                e,
            ),
        )
        theta_ref = _line_angle(g, g.edges[ref])
        for e in members:
            theta = _line_angle(g, g.edges[e])
            k = round((theta - theta_ref) / (math.pi / 2))
            target = theta_ref + k * (math.pi / 2)
            nx, ny = -math.sin(target), math.cos(target)
            i, j = g.edges[e][0], g.edges[e][1]
            row = np.zeros(2 * n)
            row[2 * j] += nx
            row[2 * j + 1] += ny
            row[2 * i] -= nx
            row[2 * i + 1] -= ny
            rows.append(row)
            row_hints.append(None)
    for h in hints:
        if h.kind != "coincident":
            continue
        for axis in (0, 1):
            row = np.zeros(2 * n)
            row[2 * h.a + axis] = 1.0
            row[2 * h.b + axis] = -1.0
            rows.append(row)
            row_hints.append(h)

    if rows:
        c = np.vstack(rows)
        m = c.shape[0]
        kkt = np.block(
            [[np.eye(2 * n), c.T], [c, np.zeros((m, m))]]
        )
        rhs = np.concatenate([v0, np.zeros(m)])
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        v = sol[: 2 * n]
        residual = c @ v
        unapplied = sorted(
            {
                row_hints[i]
                for i in range(m)
                if abs(residual[i]) > 1e-6 and row_hints[i] is not None
            },
            key=lambda h: (h.kind, h.a, h.b),
        )
    else:
        v = v0
        unapplied = []

    from .geometry import _round_half_away

    snapped = [
        (
            min(max(_round_half_away(v[2 * i]), 0), GRID_MAX),
            min(max(_round_half_away(v[2 * i + 1]), 0), GRID_MAX),
        )
        for i in range(n)
    ]
    ids: dict[tuple[int, int], int] = {}
    merged = []
    remap = []
    for p in snapped:
        if p not in ids:
            ids[p] = len(merged)
            merged.append(p)
        remap.append(ids[p])
    edges = tuple(tuple(remap[i] for i in e) for e in g.edges)
    return SnapResult(SketchHypergraph(tuple(merged), edges), unapplied)


# --- SVG export ----------------------------------------------------------

def svg_dumps(g: SketchHypergraph) -> str:
    """Render a sketch as an SVG document on the 256x256 view box."""
    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 256 256">',
        '<g fill="none" stroke="black" stroke-width="1">',
    ]
    for edge in g.edges:
        try:
            prim = recover_primitive(edge, g.vertices)
        except GeometryError:
            continue
        if isinstance(prim, Line):
            (x0, y0), (x1, y1) = prim.start, prim.end
            parts.append(f'<path d="M {x0:g} {y0:g} L {x1:g} {y1:g}"/>')
        elif isinstance(prim, Arc):
            s, m, e = (g.vertices[i] for i in edge)
            _, _, _, sweep = _arc_params(
                tuple(map(float, s)), tuple(map(float, m)), tuple(map(float, e))
            )
            large = 1 if abs(sweep) > math.pi else 0
            sweep_flag = 1 if prim.ccw else 0
            parts.append(
                f'<path d="M {s[0]:g} {s[1]:g} '
                f"A {prim.radius:g} {prim.radius:g} 0 {large} {sweep_flag} "
                f'{e[0]:g} {e[1]:g}"/>'
            )
        else:
            cx, cy = prim.center
            parts.append(
                f'<circle cx="{cx:g}" cy="{cy:g}" r="{prim.radius:g}"/>'
            )
    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
