"""Sketch JSON interchange.

Schema: {"vertices": [[x, y], ...], "edges": [[i, ...], ...]} with integer
coordinates and 0-based vertex indices. Streams are newline-delimited JSON,
one sketch per line.
"""

from __future__ import annotations

import json

from .geometry import SketchHypergraph


class SketchFormatError(ValueError):
    pass


def sketch_to_obj(g: SketchHypergraph) -> dict:
    return {
        "vertices": [[x, y] for x, y in g.vertices],
        "edges": [list(e) for e in g.edges],
    }


def sketch_from_obj(obj) -> SketchHypergraph:
    if not isinstance(obj, dict) or "vertices" not in obj or "edges" not in obj:
        raise SketchFormatError("sketch object needs 'vertices' and 'edges'")
    verts = obj["vertices"]
    edges = obj["edges"]
    for v in verts:
        if (
            not isinstance(v, (list, tuple))
            or len(v) != 2
            or not all(isinstance(c, int) for c in v)
        ):
            raise SketchFormatError(f"bad vertex entry {v!r}: want [int, int]")
    for e in edges:
        if not isinstance(e, (list, tuple)) or not all(
            isinstance(i, int) for i in e
        ):
            raise SketchFormatError(f"bad edge entry {e!r}: want [int, ...]")
    try:
        return SketchHypergraph.from_lists(verts, edges)
    except ValueError as exc:
        raise SketchFormatError(str(exc)) from exc


def dumps_sketch(g: SketchHypergraph) -> str:
    return json.dumps(sketch_to_obj(g), separators=(",", ":"))


def loads_sketch(text: str) -> SketchHypergraph:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SketchFormatError(f"invalid JSON: {exc}") from exc
    return sketch_from_obj(obj)


def read_sketch_stream(fp):
    """Yield sketches from newline-delimited JSON, skipping blank lines."""
    for lineno, line in enumerate(fp, 1):
        line = line.strip()
        if not line:
            continue
        try:
            yield loads_sketch(line)
        except SketchFormatError as exc:
            raise SketchFormatError(f"line {lineno}: {exc}") from exc


def write_sketch_stream(fp, sketches):
    for g in sketches:
        fp.write(dumps_sketch(g))
        fp.write("\n")
