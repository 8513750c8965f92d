"""Discrete sequence encodings consumed by the generative models.

Three encodings:
  * vertex tokens: sorted vertex coordinates flattened to y,x pairs + stop
  * curve tokens: per-curve pointers into the sorted vertices, with
    end-of-curve / end-of-sketch markers
  * turtle rows: one fixed-width 7-integer row per turtle command

Plus the training-time jitter augmentation.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import truncnorm

from .geometry import GRID_SIZE, SketchHypergraph
from .turtle import ARITY, TurtleCommand, TurtleProgram

STOP_TOKEN = GRID_SIZE  # 256

# turtle row layout: (command id, x1, y1, x2, y2, x3, y3)
ROW_WIDTH = 7
COMMAND_IDS = {
    "start": 0,
    "end": 1,
    "loopstart": 2,
    "line": 3,
    "arc": 4,
    "circle": 5,
}
COMMAND_NAMES = {v: k for k, v in COMMAND_IDS.items()}
DELTA_OFFSET = GRID_SIZE - 1  # displacement d encodes as d + 255 in [0, 510]
COORD_VOCAB = 2 * GRID_SIZE - 1  # 511
PAD = DELTA_OFFSET  # encodes displacement 0


class TokenError(ValueError):
    pass


def sorted_vertex_order(g: SketchHypergraph):
    """Vertex ids in the model's canonical (y, x) ascending order."""
    return sorted(range(len(g.vertices)), key=lambda i: (g.vertices[i][1], g.vertices[i][0]))


def encode_vertices(g: SketchHypergraph) -> list[int]:
    tokens = []
    for i in sorted_vertex_order(g):
        x, y = g.vertices[i]
        tokens.extend((y, x))
    tokens.append(STOP_TOKEN)
    return tokens


def decode_vertices(tokens) -> list[tuple[int, int]]:
    verts = []
    buf = []
    it = iter(tokens)
    for pos, tok in enumerate(it):
        if not isinstance(tok, (int, np.integer)) or not (0 <= tok <= STOP_TOKEN):
            raise TokenError(f"token {tok!r} at {pos} out of vocabulary")
        if tok == STOP_TOKEN:
            if buf:
                raise TokenError("dangling half coordinate pair before stop")
            for extra in it:
                raise TokenError("tokens after stop")
            return verts
        buf.append(int(tok))
        if len(buf) == 2:
            verts.append((buf[1], buf[0]))  # tokens are y then x
            buf = []
    raise TokenError("sequence missing stop token")


def _canonical_pointer_list(ptrs, cardinality):
    """Geometry-preserving canonical ordering of one curve's pointers."""
    if cardinality == 2:
        return tuple(sorted(ptrs))
    if cardinality == 3:
        # arcs only allow reversal: the middle entry is the on-arc point
        return tuple(ptrs) if ptrs[0] <= ptrs[2] else tuple(reversed(ptrs))
    # circles are cyclic: all rotations of both directions are equivalent
    best = None
    for seq in (list(ptrs), list(reversed(ptrs))):
        for k in range(len(seq)):
            cand = tuple(seq[k:] + seq[:k])
            if best is None or cand < best:
                best = cand
    return best


def encode_curves(g: SketchHypergraph) -> list[int]:
    """Pointer tokens over the sorted vertex order.

    Vocabulary: 0..n-1 pointers, n end-of-curve, n+1 end-of-sketch.
    """
    order = sorted_vertex_order(g)
    rank = {vid: r for r, vid in enumerate(order)}
    n = len(g.vertices)
    curves = []
    for edge in g.edges:
        if len(edge) not in (2, 3, 4):
            raise TokenError(f"cannot encode cardinality {len(edge)} curve")
        ptrs = [rank[v] for v in edge]
        curves.append(_canonical_pointer_list(ptrs, len(edge)))
    curves.sort(key=lambda c: (c[0], len(c), c))
    tokens = []
    for c in curves:
        tokens.extend(c)
        tokens.append(n)  # end of curve
    tokens.append(n + 1)  # end of sketch
    return tokens


def decode_curves(tokens, vertices) -> list[tuple[int, ...]]:
    """Inverse of encode_curves given the sorted vertex list."""
    n = len(vertices)
    eoc, eos = n, n + 1
    edges = []
    cur: list[int] = []
    closed = False
    for pos, tok in enumerate(tokens):
        tok = int(tok)
        if tok == eos:
            if cur:
                raise TokenError("end-of-sketch inside an open curve")
            if pos != len(tokens) - 1:
                raise TokenError("tokens after end-of-sketch")
            closed = True
            break
        if tok == eoc:
            if not (2 <= len(cur) <= 4):
                raise TokenError(
                    f"curve with {len(cur)} vertices (must be 2-4)"
                )
            if len(set(cur)) != len(cur):
                raise TokenError("repeated pointer within a curve")
            edges.append(tuple(cur))
            cur = []
            continue
        if not (0 <= tok < n):
            raise TokenError(f"pointer {tok} out of range (n={n})")
        cur.append(tok)
        if len(cur) > 4:
            raise TokenError("curve with >4 vertices")
    if not closed:
        raise TokenError("sequence missing end-of-sketch token")
    return edges


def encode_sketch(g: SketchHypergraph):
    """(vertex tokens, curve tokens) for one sketch."""
    return encode_vertices(g), encode_curves(g)


def decode_sketch(vertex_tokens, curve_tokens) -> SketchHypergraph:
    vertices = decode_vertices(vertex_tokens)
    edges = decode_curves(curve_tokens, vertices)
    return SketchHypergraph.from_lists(vertices, edges)


def canonicalize(g: SketchHypergraph) -> SketchHypergraph:
    """Fixpoint of the token round trip: sorted vertices, canonical curves."""
    return decode_sketch(*encode_sketch(g))


def encode_turtle(program: TurtleProgram) -> list[tuple[int, ...]]:
    """Fixed-width rows: start row, one row per command, end row."""
    rows = [_row("start", ())]
    for cmd in program.commands:
        rows.append(_row(cmd.kind, cmd.deltas))
    rows.append(_row("end", ()))
    return rows


def _row(kind, deltas):
    coords = [PAD] * (ROW_WIDTH - 1)
    for i, (dx, dy) in enumerate(deltas):
        coords[2 * i] = dx + DELTA_OFFSET
        coords[2 * i + 1] = dy + DELTA_OFFSET
    return (COMMAND_IDS[kind],) + tuple(coords)


def decode_turtle(rows) -> TurtleProgram:
    rows = [tuple(int(t) for t in r) for r in rows]
    for r in rows:
        if len(r) != ROW_WIDTH:
            raise TokenError(f"row width {len(r)} != {ROW_WIDTH}")
        if r[0] not in COMMAND_NAMES:
            raise TokenError(f"unknown command token {r[0]}")
        for c in r[1:]:
            if not (0 <= c < COORD_VOCAB):
                raise TokenError(f"coordinate token {c} out of range")
    if len(rows) < 2 or rows[0][0] != COMMAND_IDS["start"]:
        raise TokenError("rows must begin with the start row")
    if rows[-1][0] != COMMAND_IDS["end"]:
        raise TokenError("rows must finish with the end row")
    commands = []
    for r in rows[1:-1]:
        kind = COMMAND_NAMES[r[0]]
        if kind in ("start", "end"):
            raise TokenError("start/end row inside the sequence")
        arity = ARITY[kind]
        deltas = tuple(
            (r[1 + 2 * i] - DELTA_OFFSET, r[2 + 2 * i] - DELTA_OFFSET)
            for i in range(arity)
        )
        try:
            commands.append(TurtleCommand(kind, deltas))
        except ValueError as exc:
            raise TokenError(str(exc)) from exc
    try:
        return TurtleProgram(tuple(commands))
    except ValueError as exc:
        raise TokenError(str(exc)) from exc


def jitter(g: SketchHypergraph, seed) -> list[tuple[float, float]]:
    """Per-coordinate truncated-normal noise (mean 0, variance 0.1) that
    keeps every vertex inside the sketch's bounding box."""
    pts = np.asarray(g.vertices, dtype=float)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    sigma = math.sqrt(0.1)
    rng = np.random.default_rng(seed)
    out = np.empty_like(pts)
    for axis in (0, 1):
        x = pts[:, axis]
        if hi[axis] <= lo[axis]:
            out[:, axis] = x  # zero-extent axis: truncation pins the value
            continue
        a = (lo[axis] - x) / sigma
        b = (hi[axis] - x) / sigma
        out[:, axis] = truncnorm.rvs(
            a, b, loc=x, scale=sigma, random_state=rng
        )
    return [tuple(p) for p in out]
