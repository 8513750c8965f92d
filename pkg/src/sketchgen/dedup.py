"""Duplicate detection over sketches: coarse 9x9 geometric hashing.

Two sketches are duplicates when they share topology and similar geometry:
after uniform scaling, vertices falling in the same cell of a 9x9 grid are
treated as identical, and arc/circle radii are quantized with the same
cell size.
"""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import (
    GeometryError,
    SketchHypergraph,
    recover_primitive,
    validate_sketch,
)

DEDUP_GRID = 9


class DedupError(ValueError):
    pass


def _normalizer(g: SketchHypergraph):
    xs = [v[0] for v in g.vertices]
    ys = [v[1] for v in g.vertices]
    if not xs:
        raise DedupError("sketch has no vertices")
    lo = (min(xs), min(ys))
    extent = max(max(xs) - lo[0], max(ys) - lo[1])
    if extent <= 0:
        raise DedupError("zero-extent sketch")
    return lo, extent


def _cell(point, lo, extent, grid=DEDUP_GRID):
    # integer coordinates stay in exact arithmetic; fitted centers get a
    # small epsilon so a 1-ulp wobble cannot flip the cell
    cells = []
    for coord, origin in zip(point, lo):
        rel = coord - origin
        if isinstance(rel, int):
            c = rel * grid // extent
        else:
            c = int(rel * grid / extent + 1e-9)
        cells.append(min(max(c, 0), grid - 1))
    return tuple(cells)


def _quantize_radius(radius, extent, grid=DEDUP_GRID):
    return int(radius * grid / extent + 1e-9)


def dedup_key(g: SketchHypergraph, grid=DEDUP_GRID):
    """Order-invariant signature; equal keys mean duplicate sketches.

    Line: sorted endpoint cells. Arc: sorted endpoint cells + quantized
    radius. Circle: center cell + quantized radius. Edges whose primitive
    cannot be recovered contribute a raw cell signature so every sketch
    still hashes.
    """
    lo, extent = _normalizer(g)
    sigs = []
    for edge in g.edges:
        pts = [g.vertices[i] for i in edge]
        cells = [_cell(p, lo, extent, grid) for p in pts]
        try:
            prim = recover_primitive(edge, g.vertices)
        except GeometryError:
            sigs.append(("raw", len(edge), tuple(sorted(cells))))
            continue
        if len(edge) == 2:
            sigs.append(("line", tuple(sorted(cells))))
        elif len(edge) == 3:
            ends = tuple(sorted((cells[0], cells[2])))
            sigs.append(
                ("arc", ends, _quantize_radius(prim.radius, extent, grid))
            )
        else:
            center_cell = _cell(prim.center, lo, extent, grid)
            sigs.append(
                ("circle", center_cell,
                 _quantize_radius(prim.radius, extent, grid))
            )
    return tuple(sorted(sigs))


def safe_key(g: SketchHypergraph, grid=DEDUP_GRID):
    """dedup_key that never raises: degenerate sketches hash by raw shape."""
    try:
        return dedup_key(g, grid)
    except DedupError:
        return ("degenerate", tuple(sorted(g.vertices)),
                tuple(sorted(len(e) for e in g.edges)))


def is_duplicate(a: SketchHypergraph, b: SketchHypergraph, grid=DEDUP_GRID) -> bool:
    return dedup_key(a, grid) == dedup_key(b, grid)


@dataclass
class FilterStats:
    total: int = 0
    kept: int = 0
    duplicates: int = 0
    invalid: int = 0

    def to_obj(self):
        return {
            "total": self.total,
            "kept": self.kept,
            "duplicates": self.duplicates,
            "invalid": self.invalid,
        }


def filter_dataset(sketches, grid=DEDUP_GRID):
    """Drop invalid sketches and later occurrences of each dedup key.

    Returns (kept list, FilterStats). Order of survivors is stable.
    """
    stats = FilterStats()
    seen = set()
    kept = []
    for g in sketches:
        stats.total += 1
        if not validate_sketch(g).is_valid:
            stats.invalid += 1
            continue
        key = safe_key(g, grid)
        if key in seen:
            stats.duplicates += 1
            continue
        seen.add(key)
        kept.append(g)
    stats.kept = len(kept)
    return kept, stats
