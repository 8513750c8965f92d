"""Evaluation quantities: bits per vertex/sketch and unique/valid/novel rates."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dedup import safe_key
from .geometry import validate_sketch

LN2 = math.log(2.0)


class MetricsError(ValueError):
    pass


@dataclass
class MetricsReport:
    bits_per_vertex: float | None
    bits_per_sketch: float | None
    unique_pct: float
    valid_pct: float
    novel_pct: float | None
    sample_count: int

    def to_obj(self):
        return {
            "bits_per_vertex": self.bits_per_vertex,
            "bits_per_sketch": self.bits_per_sketch,
            "unique_pct": self.unique_pct,
            "valid_pct": self.valid_pct,
            "novel_pct": self.novel_pct,
            "sample_count": self.sample_count,
        }


def bits_per_vertex(model, sequences, vertex_counts) -> float:
    """Total test nll divided by total vertex count, in bits.

    `model` needs an nll(seq) -> nats method; `vertex_counts` gives the
    number of sketch vertices behind each sequence.
    """
    if not sequences:
        raise MetricsError("empty test set")
    if len(sequences) != len(vertex_counts):
        raise MetricsError("one vertex count per sequence required")
    total_nats = sum(model.nll(s) for s in sequences)
    total_vertices = sum(vertex_counts)
    if total_vertices <= 0:
        raise MetricsError("no vertices in test set")
    return total_nats / total_vertices / LN2


def bits_per_sketch(model, sequences) -> float:
    """Mean per-sequence nll in bits."""
    if not sequences:
        raise MetricsError("empty test set")
    return sum(model.nll(s) for s in sequences) / len(sequences) / LN2


def unique_pct(samples) -> float:
    """Percentage of dedup-key equivalence classes among the samples."""
    if not samples:
        raise MetricsError("empty sample set")
    keys = {safe_key(g) for g in samples}
    return 100.0 * len(keys) / len(samples)


def novel_pct(samples, train_set) -> float:
    """Percentage of samples whose dedup key matches no training sketch."""
    if not samples:
        raise MetricsError("empty sample set")
    train_keys = {safe_key(g) for g in train_set}
    novel = sum(1 for g in samples if safe_key(g) not in train_keys)
    return 100.0 * novel / len(samples)


def valid_pct(samples) -> float:
    if not samples:
        raise MetricsError("empty sample set")
    ok = sum(1 for g in samples if validate_sketch(g).is_valid)
    return 100.0 * ok / len(samples)


def evaluate_samples(samples, train_set=None) -> MetricsReport:
    """unique/valid/novel over generated samples; bits fields left unset."""
    return MetricsReport(
        bits_per_vertex=None,
        bits_per_sketch=None,
        unique_pct=unique_pct(samples),
        valid_pct=valid_pct(samples),
        novel_pct=None if train_set is None else novel_pct(samples, train_set),
        sample_count=len(samples),
    )
