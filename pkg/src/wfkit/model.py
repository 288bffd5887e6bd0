"""Wireframe graph types and validity checking.

Coordinates are real-valued grid units. The canonical coordinate space is the
128x128 evaluation lattice; :func:`rescale` maps wireframes from other
resolutions onto it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

CANONICAL_SIZE = 128.0


class WireframeError(ValueError):
    """Raised when an operation receives a wireframe that fails validation."""


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class ScoredLine:
    p1: Point2
    p2: Point2
    score: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "p1", Point2(float(self.p1[0]), float(self.p1[1])))
        object.__setattr__(self, "p2", Point2(float(self.p2[0]), float(self.p2[1])))
        if self.p1 == self.p2:
            raise WireframeError(f"degenerate line at {self.p1}")
        if not math.isfinite(self.score):
            raise WireframeError(f"non-finite line score {self.score}")

    def flipped(self) -> "ScoredLine":
        return ScoredLine(self.p2, self.p1, self.score)


@dataclass(frozen=True)
class Wireframe:
    """A graph of junctions and undirected line segments between them.

    Edges are normalized to ``(i, j)`` with ``i <= j`` on construction. The
    constructor does not reject invalid data; use :func:`validate`.
    """

    junctions: tuple = ()
    edges: tuple = ()
    width: float = CANONICAL_SIZE
    height: float = CANONICAL_SIZE
    junction_scores: Optional[tuple] = None
    line_scores: Optional[tuple] = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        junctions = tuple(Point2(float(p[0]), float(p[1])) for p in self.junctions)
        edges = tuple(
            (int(min(e[0], e[1])), int(max(e[0], e[1]))) for e in self.edges
        )
        object.__setattr__(self, "junctions", junctions)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "width", float(self.width))
        object.__setattr__(self, "height", float(self.height))
        if self.junction_scores is not None:
            object.__setattr__(
                self, "junction_scores", tuple(float(s) for s in self.junction_scores)
            )
        if self.line_scores is not None:
            object.__setattr__(self, "line_scores", tuple(float(s) for s in self.line_scores))

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def junction_array(self) -> np.ndarray:
        """Junction coordinates as a read-only ``(N, 2)`` float array."""
        if "junctions" not in self._cache:
            arr = np.array(self.junctions, dtype=float).reshape(-1, 2)
            arr.flags.writeable = False
            self._cache["junctions"] = arr
        return self._cache["junctions"]

    def line_array(self) -> np.ndarray:
        """Edge endpoint coordinates as a read-only ``(M, 4)`` array ``x1, y1, x2, y2``."""
        if "lines" not in self._cache:
            pts = self.junction_array()
            idx = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
            arr = np.concatenate([pts[idx[:, 0]], pts[idx[:, 1]]], axis=1) if len(idx) else np.zeros((0, 4))
            arr.flags.writeable = False
            self._cache["lines"] = arr
        return self._cache["lines"]

    def line_score_array(self) -> np.ndarray:
        if self.line_scores is None:
            return np.ones(len(self.edges))
        return np.array(self.line_scores, dtype=float)

    def junction_score_array(self) -> np.ndarray:
        if self.junction_scores is None:
            return np.ones(len(self.junctions))
        return np.array(self.junction_scores, dtype=float)


def validate(w: Wireframe) -> list[str]:
    """Return a list of invariant violations; empty means the wireframe is valid."""
    problems = []
    if not (math.isfinite(w.width) and w.width > 0):
        problems.append(f"width {w.width} is not a positive real")
    if not (math.isfinite(w.height) and w.height > 0):
        problems.append(f"height {w.height} is not a positive real")
    n = len(w.junctions)
    for k, (x, y) in enumerate(w.junctions):
        if not (math.isfinite(x) and math.isfinite(y)):
            problems.append(f"junction {k} is not finite")
        elif not (0 <= x < w.width and 0 <= y < w.height):
            problems.append(f"junction {k} out of bounds")
    seen = {}
    for k, (i, j) in enumerate(w.edges):
        if i < 0 or j >= n:
            problems.append(f"edge {k} index out of range")
        if i == j:
            problems.append(f"self-loop at edge {k}")
        if (i, j) in seen:
            problems.append(f"duplicate edge {k} (same as edge {seen[(i, j)]})")
        else:
            seen[(i, j)] = k
    for name, scores, expected in (
        ("junction_scores", w.junction_scores, n),
        ("line_scores", w.line_scores, len(w.edges)),
    ):
        if scores is None:
            continue
        if len(scores) != expected:
            problems.append(f"{name} has length {len(scores)}, expected {expected}")
        for k, s in enumerate(scores):
            if not (0.0 <= s <= 1.0):
                problems.append(f"{name}[{k}] = {s} outside [0, 1]")
    return problems


def check(w: Wireframe) -> Wireframe:
    problems = validate(w)
    if problems:
        raise WireframeError("invalid wireframe: " + "; ".join(problems))
    return w


def to_scored_lines(w: Wireframe) -> list[ScoredLine]:
    check(w)
    scores = w.line_scores if w.line_scores is not None else (1.0,) * len(w.edges)
    return [
        ScoredLine(w.junctions[i], w.junctions[j], s) for (i, j), s in zip(w.edges, scores)
    ]


def from_scored_lines(
    lines: Sequence[ScoredLine], width: float = CANONICAL_SIZE, height: float = CANONICAL_SIZE
) -> Wireframe:
    """Build a scored wireframe from free lines, merging exactly coincident endpoints."""
    index: dict[Point2, int] = {}
    edges, scores = [], []
    for line in lines:
        ends = []
        for p in (line.p1, line.p2):
            if p not in index:
                index[p] = len(index)
            ends.append(index[p])
        edges.append(tuple(ends))
        scores.append(line.score)
    return Wireframe(
        junctions=tuple(index), edges=tuple(edges), width=width, height=height,
        line_scores=tuple(scores),
    )


def rescale(w: Wireframe, width: float = CANONICAL_SIZE, height: float = CANONICAL_SIZE) -> Wireframe:
    sx, sy = width / w.width, height / w.height
    return Wireframe(
        junctions=tuple((x * sx, y * sy) for x, y in w.junctions),
        edges=w.edges,
        width=width,
        height=height,
        junction_scores=w.junction_scores,
        line_scores=w.line_scores,
    )
