"""Turtle-graphics sketch programs: parse, serialize, execute, encode.

A program is a sequence of loops. Each loop teleports the pen from (0,0)
by the loopstart displacement, then draws lines/arcs/circles by relative
integer displacements. Executing a program yields a hypergraph sketch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    GRID_MAX,
    GeometryError,
    LoopSet,
    SketchHypergraph,
    find_loops,
    oriented_loop,
)

MAX_COMMANDS = 100

# command kind -> number of displacement pairs
ARITY = {"loopstart": 1, "line": 1, "arc": 2, "circle": 3}


class TurtleError(ValueError):
    pass


class ParseError(TurtleError):
    def __init__(self, message, line, col):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class StructureError(TurtleError):
    pass


class OutOfGridError(TurtleError):
    pass


class OpenChainError(TurtleError):
    pass


class LengthError(TurtleError):
    pass


@dataclass(frozen=True)
class TurtleCommand:
    kind: str
    deltas: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.kind not in ARITY:
            raise TurtleError(f"unknown command kind {self.kind!r}")
        if len(self.deltas) != ARITY[self.kind]:
            raise TurtleError(
                f"{self.kind} takes {ARITY[self.kind]} delta(s), "
                f"got {len(self.deltas)}"
            )
        for dx, dy in self.deltas:
            if abs(dx) > GRID_MAX or abs(dy) > GRID_MAX:
                raise TurtleError(f"delta ({dx},{dy}) outside +/-{GRID_MAX}")


@dataclass(frozen=True)
class TurtleProgram:
    commands: tuple[TurtleCommand, ...]

    def __post_init__(self):
        cmds = self.commands
        if len(cmds) > MAX_COMMANDS:
            raise StructureError(
                f"program has {len(cmds)} commands, limit is {MAX_COMMANDS}"
            )
        if cmds and cmds[0].kind != "loopstart":
            raise StructureError("program must begin with loopstart")
        for i, cmd in enumerate(cmds):
            if cmd.kind == "loopstart":
                if i + 1 >= len(cmds) or cmds[i + 1].kind == "loopstart":
                    raise StructureError(
                        "every loopstart needs at least one draw command"
                    )

    def __len__(self):
        return len(self.commands)


class _Scanner:
    def __init__(self, text):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def error(self, message):
        raise ParseError(message, self.line, self.col)

    def peek(self):
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def advance(self):
        c = self.text[self.pos]
        self.pos += 1
        if c == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        return c

    def skip_ws(self):
        while self.peek() and self.peek() in " \t\r\n":
            self.advance()

    def expect(self, char):
        if self.peek() != char:
            found = repr(self.peek()) if self.peek() else "end of input"
            self.error(f"expected {char!r}, found {found}")
        self.advance()

    def read_int(self):
        self.skip_ws()
        start = self.pos
        if self.peek() in "+-":
            self.advance()
        if not self.peek().isdigit():
            self.error("expected integer")
        while self.peek().isdigit():
            self.advance()
        return int(self.text[start : self.pos])

    def read_word(self):
        self.skip_ws()
        start = self.pos
        while self.peek().isalpha():
            self.advance()
        if start == self.pos:
            self.error("expected command name")
        return self.text[start : self.pos]


def parse(text: str) -> TurtleProgram:
    """Parse turtle program text.

    Grammar: program := command* ; command := kind "(" delta ("," delta)* ")"
    delta := "(" int "," int ")". Whitespace and a trailing comma after each
    command are ignored.
    """
    sc = _Scanner(text)
    commands = []
    while True:
        sc.skip_ws()
        if not sc.peek():
            break
        line, col = sc.line, sc.col
        kind = sc.read_word()
        if kind not in ARITY:
            raise ParseError(f"unknown command {kind!r}", line, col)
        sc.skip_ws()
        sc.expect("(")
        deltas = []
        while True:
            sc.skip_ws()
            sc.expect("(")
            dx = sc.read_int()
            sc.skip_ws()
            sc.expect(",")
            dy = sc.read_int()
            sc.skip_ws()
            sc.expect(")")
            if abs(dx) > GRID_MAX or abs(dy) > GRID_MAX:
                raise ParseError(
                    f"delta component magnitude above {GRID_MAX}", line, col
                )
            deltas.append((dx, dy))
            sc.skip_ws()
            if sc.peek() == ",":
                sc.advance()
                continue
            break
        sc.expect(")")
        if len(deltas) != ARITY[kind]:
            raise ParseError(
                f"{kind} takes {ARITY[kind]} delta(s), got {len(deltas)}",
                line,
                col,
            )
        commands.append(TurtleCommand(kind, tuple(deltas)))
        sc.skip_ws()
        if sc.peek() == ",":
            sc.advance()
    try:
        return TurtleProgram(tuple(commands))
    except StructureError:
        raise


def serialize(program: TurtleProgram) -> str:
    """Canonical text: one command per line; parse(serialize(p)) == p."""
    lines = []
    for cmd in program.commands:
        deltas = ",".join(f"({dx},{dy})" for dx, dy in cmd.deltas)
        lines.append(f"{cmd.kind}({deltas})")
    return "\n".join(lines)


def execute(program: TurtleProgram) -> SketchHypergraph:
    """Run a program, returning the sketch it draws.

    Coincident points share one vertex id. Any absolute coordinate outside
    [0, 255] raises OutOfGridError.
    """
    vertex_ids: dict[tuple[int, int], int] = {}
    vertices: list[tuple[int, int]] = []
    edges: list[tuple[int, ...]] = []

    def vid(point):
        if not (0 <= point[0] <= GRID_MAX and 0 <= point[1] <= GRID_MAX):
            raise OutOfGridError(f"point {point} leaves the grid")
        if point not in vertex_ids:
            vertex_ids[point] = len(vertices)
            vertices.append(point)
        return vertex_ids[point]

    pen = (0, 0)
    for cmd in program.commands:
        if cmd.kind == "loopstart":
            dx, dy = cmd.deltas[0]
            pen = (dx, dy)
            if not (0 <= pen[0] <= GRID_MAX and 0 <= pen[1] <= GRID_MAX):
                raise OutOfGridError(f"loopstart teleports pen to {pen}")
            continue
        points = [pen]
        for dx, dy in cmd.deltas:
            last = points[-1]
            points.append((last[0] + dx, last[1] + dy))
        edges.append(tuple(vid(p) for p in points))
        pen = points[-1]
    return SketchHypergraph(tuple(vertices), tuple(edges))


def _loop_point_sequence(g, oriented):
    """Points emitted when drawing an oriented loop, starting at the pen-down
    point (first vertex of the first oriented edge)."""
    pts = [g.vertices[oriented[0][0]]]
    for edge in oriented:
        for v in edge[1:]:
            pts.append(g.vertices[v])
    return pts


def _rotate_multi_edge_loop(oriented, k):
    return oriented[k:] + oriented[:k]


def _reverse_oriented(oriented):
    return [tuple(reversed(e)) for e in reversed(oriented)]


def _circle_variants(edge):
    """All cyclic rotations and reflections of a circle edge's 4 ids."""
    ids = list(edge)
    out = []
    for seq in (ids, list(reversed(ids))):
        for k in range(len(seq)):
            out.append([tuple(seq[k:] + seq[:k])])
    return out


def _loop_variants(g, loop):
    """Every (start joint, direction) variant of a loop's oriented edges."""
    base = oriented_loop(g, loop)
    if len(base) == 1 and len(base[0]) == 4:
        return _circle_variants(base[0])
    variants = []
    for oriented in (base, _reverse_oriented(base)):
        for k in range(len(oriented)):
            variants.append(_rotate_multi_edge_loop(oriented, k))
    return variants


def _canonical_variant(g, loop):
    return min(
        _loop_variants(g, loop), key=lambda v: _loop_point_sequence(g, v)
    )


def _loop_min_distance_sq(g, loop):
    best = None
    for eidx in loop:
        for v in g.edges[eidx]:
            x, y = g.vertices[v]
            d = x * x + y * y
            if best is None or d < best:
                best = d
    return best


def encode(g: SketchHypergraph, mode="canonical", seed=None) -> TurtleProgram:
    """Turn a sketch into a turtle program; execute(encode(g)) reproduces g
    up to reindexing.

    Canonical mode orders loops nearest-to-origin first, starts each loop
    at its lexicographically smallest point, and draws in the direction
    with the lexicographically smaller point sequence. Randomized mode
    draws loop order, start, and direction from the seeded generator.
    """
    loop_set: LoopSet = find_loops(g)
    if loop_set.open_chains:
        raise OpenChainError(
            f"{len(loop_set.open_chains)} edge chain(s) lie on no closed loop"
        )
    if mode not in ("canonical", "randomized"):
        raise TurtleError(f"unknown encode mode {mode!r}")

    if mode == "canonical":
        chosen = [_canonical_variant(g, loop) for loop in loop_set.loops]
        order = sorted(
            range(len(chosen)),
            key=lambda i: (
                _loop_min_distance_sq(g, loop_set.loops[i]),
                _loop_point_sequence(g, chosen[i]),
            ),
        )
    else:
        rng = np.random.default_rng(seed)
        chosen = []
        for loop in loop_set.loops:
            variants = _loop_variants(g, loop)
            chosen.append(variants[int(rng.integers(len(variants)))])
        order = list(rng.permutation(len(chosen)))

    commands = []
    for i in order:
        oriented = chosen[i]
        pts = _loop_point_sequence(g, oriented)
        commands.append(TurtleCommand("loopstart", ((pts[0][0], pts[0][1]),)))
        cursor = 0
        for edge in oriented:
            kind = {2: "line", 3: "arc", 4: "circle"}[len(edge)]
            seg = pts[cursor : cursor + len(edge)]
            deltas = tuple(
                (seg[j + 1][0] - seg[j][0], seg[j + 1][1] - seg[j][1])
                for j in range(len(seg) - 1)
            )
            commands.append(TurtleCommand(kind, deltas))
            cursor += len(edge) - 1
    if len(commands) > MAX_COMMANDS:
        raise LengthError(
            f"encoding needs {len(commands)} commands, limit is {MAX_COMMANDS}"
        )
    return TurtleProgram(tuple(commands))
