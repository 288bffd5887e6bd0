"""Seeded synthetic wireframe scenes and controlled degradations.

Randomness comes from numpy's PCG64 bit generator seeded with the given
integer, so a (spec, seed) pair always yields the same scene.

Every generated line is at least ``min_length`` long and its midpoint keeps a
clearance of ``min_length / 2`` from every junction, so splitting a line at its
midpoint never lands near an existing junction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import CANONICAL_SIZE, Wireframe, check

LAYOUTS = ("grid", "boxes", "random")
DEGRADE_MODES = ("split_midpoint", "duplicate", "jitter", "drop")
_MAX_TRIES = 200


class SceneError(ValueError):
    """The requested scene cannot be generated."""


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    n_junctions: int = 16
    n_lines: int = 24
    min_length: float = 16.0
    layout: str = "grid"
    size: float = CANONICAL_SIZE

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}; expected one of {LAYOUTS}")
        if self.n_junctions < 0 or self.n_lines < 0:
            raise ValueError("counts must be non-negative")
        if self.n_lines > self.n_junctions * (self.n_junctions - 1) // 2:
            raise ValueError("more lines requested than junction pairs exist")
        if not self.min_length > 0:
            raise ValueError("min_length must be positive")


@dataclass(frozen=True)
class DegradeSpec:
    mode: str
    param: float = 0.0

    def __post_init__(self):
        if self.mode not in DEGRADE_MODES:
            raise ValueError(f"unknown degradation {self.mode!r}; expected one of {DEGRADE_MODES}")
        if not self.param >= 0:
            raise ValueError("param must be non-negative")
        if self.mode in ("drop", "duplicate") and self.param > 1:
            raise ValueError(f"{self.mode} fraction must be at most 1")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _line_ok(pts: np.ndarray, i: int, j: int, min_length: float) -> bool:
    a, b = pts[i], pts[j]
    if math.hypot(*(a - b)) < min_length:
        return False
    mid = 0.5 * (a + b)
    clearance = np.hypot(pts[:, 0] - mid[0], pts[:, 1] - mid[1]).min()
    return clearance >= 0.5 * min_length


def _grid(spec: SceneSpec, rng: np.random.Generator):
    side = math.isqrt(spec.n_junctions)
    if side * side != spec.n_junctions:
        raise SceneError("grid layout needs a square number of junctions")
    adjacency = [(r * side + c, r * side + c + 1) for r in range(side) for c in range(side - 1)]
    adjacency += [(r * side + c, (r + 1) * side + c) for r in range(side - 1) for c in range(side)]
    adjacency.sort()
    if spec.n_lines > len(adjacency):
        raise SceneError(f"a {side}x{side} grid has only {len(adjacency)} adjacent pairs")
    spacing = spec.size / side if side else 0.0
    for _ in range(_MAX_TRIES):
        jitter = rng.uniform(-0.15, 0.15, size=(spec.n_junctions, 2)) * spacing
        rc = np.array([(c, r) for r in range(side) for c in range(side)], dtype=float).reshape(-1, 2)
        pts = (rc + 0.5) * spacing + jitter
        pick = sorted(rng.choice(len(adjacency), size=spec.n_lines, replace=False).tolist()) if adjacency else []
        edges = [adjacency[k] for k in pick]
        if all(_line_ok(pts, i, j, spec.min_length) for i, j in edges):
            return pts, edges
    raise SceneError("could not place grid lines satisfying min_length")


def _random_lines(pts: np.ndarray, edges: list, n_lines: int, min_length: float, rng: np.random.Generator) -> list:
    have = set(edges)
    n = len(pts)
    candidates = [
        (i, j) for i in range(n) for j in range(i + 1, n)
        if (i, j) not in have and _line_ok(pts, i, j, min_length)
    ]
    need = n_lines - len(edges)
    if need > len(candidates):
        return None
    pick = rng.choice(len(candidates), size=need, replace=False) if need > 0 else []
    return sorted(edges + [candidates[k] for k in pick])


def _spread_points(n: int, size: float, min_sep: float, rng: np.random.Generator) -> np.ndarray:
    pts = []
    for _ in range(n * _MAX_TRIES):
        if len(pts) == n:
            break
        p = rng.uniform(0.02 * size, 0.98 * size, size=2)
        if all(math.hypot(*(p - q)) >= min_sep for q in pts):
            pts.append(p)
    if len(pts) < n:
        raise SceneError(f"could not place {n} junctions {min_sep} apart")
    return np.array(pts).reshape(-1, 2)


def _boxes(spec: SceneSpec, rng: np.random.Generator):
    n_boxes = spec.n_junctions // 4
    for _ in range(_MAX_TRIES):
        pts, edges = [], []
        for b in range(n_boxes):
            w, h = rng.uniform(spec.min_length, max(spec.min_length, 0.45 * spec.size), size=2)
            x0 = rng.uniform(0.02 * spec.size, max(0.02 * spec.size, 0.98 * spec.size - w))
            y0 = rng.uniform(0.02 * spec.size, max(0.02 * spec.size, 0.98 * spec.size - h))
            k = len(pts)
            pts += [(x0, y0), (x0 + w, y0), (x0 + w, y0 + h), (x0, y0 + h)]
            edges += [(k, k + 1), (k + 1, k + 2), (k + 2, k + 3), (k, k + 3)]
        extra = spec.n_junctions - 4 * n_boxes
        if extra:
            pts += [tuple(p) for p in rng.uniform(0.02 * spec.size, 0.98 * spec.size, size=(extra, 2))]
        pts = np.array(pts, dtype=float).reshape(-1, 2)
        sep = np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
        np.fill_diagonal(sep, np.inf)
        if sep.size and sep.min() < 1.0:
            continue
        edges = [e for e in edges if _line_ok(pts, *e, spec.min_length)]
        if len(edges) > spec.n_lines:
            keep = sorted(rng.choice(len(edges), size=spec.n_lines, replace=False).tolist())
            edges = [edges[k] for k in keep]
        edges = _random_lines(pts, sorted(edges), spec.n_lines, spec.min_length, rng)
        if edges is not None:
            return pts, edges
    raise SceneError("could not build a box scene for this spec")


def _random(spec: SceneSpec, rng: np.random.Generator):
    for _ in range(_MAX_TRIES // 10):
        pts = _spread_points(spec.n_junctions, spec.size, min(2.0, spec.min_length), rng)
        edges = _random_lines(pts, [], spec.n_lines, spec.min_length, rng)
        if edges is not None:
            return pts, edges
    raise SceneError("could not connect enough junction pairs for this spec")


def gen_scene(spec: SceneSpec) -> Wireframe:
    """Generate a deterministic wireframe with exactly the requested counts."""
    rng = _rng(spec.seed)
    build = {"grid": _grid, "boxes": _boxes, "random": _random}[spec.layout]
    pts, edges = build(spec, rng)
    return check(Wireframe(
        junctions=tuple(map(tuple, pts.tolist())), edges=tuple(edges),
        width=spec.size, height=spec.size,
    ))


def _clamp(v: float, hi: float) -> float:
    return min(max(v, 0.0), math.nextafter(hi, 0.0))


def degrade(w: Wireframe, spec: DegradeSpec, seed: int = 0) -> Wireframe:
    """Turn a wireframe into a scored prediction exhibiting a controlled defect.

    ``split_midpoint`` cuts every line at a new midpoint junction; ``duplicate``
    re-emits a fraction of lines on fresh junctions with 0.9x their score;
    ``jitter`` adds Gaussian noise of the given sigma to junctions; ``drop``
    removes a fraction of lines.
    """
    check(w)
    rng = _rng(seed)
    pts = [tuple(p) for p in w.junctions]
    scores = list(w.line_score_array().tolist())
    edges = list(w.edges)
    jscores = list(w.junction_score_array().tolist())
    n_edges = len(edges)

    if spec.mode == "split_midpoint":
        new_edges, new_scores = [], []
        for (i, j), s in zip(edges, scores):
            m = len(pts)
            pts.append(((pts[i][0] + pts[j][0]) / 2, (pts[i][1] + pts[j][1]) / 2))
            jscores.append(s)
            new_edges += [(i, m), (m, j)]
            new_scores += [s, s]
        edges, scores = new_edges, new_scores
    elif spec.mode == "duplicate":
        count = int(round(spec.param * n_edges))
        chosen = sorted(rng.choice(n_edges, size=count, replace=False).tolist()) if count else []
        for k in chosen:
            i, j = edges[k]
            a = len(pts)
            pts += [pts[i], pts[j]]
            jscores += [jscores[i], jscores[j]]
            edges.append((a, a + 1))
            scores.append(0.9 * scores[k])
    elif spec.mode == "jitter":
        if spec.param > 0:
            noise = rng.standard_normal(size=(len(pts), 2)) * spec.param
            pts = [
                (_clamp(x + dx, w.width), _clamp(y + dy, w.height))
                for (x, y), (dx, dy) in zip(pts, noise.tolist())
            ]
    elif spec.mode == "drop":
        count = int(round(spec.param * n_edges))
        dropped = set(rng.choice(n_edges, size=count, replace=False).tolist()) if count else set()
        edges = [e for k, e in enumerate(edges) if k not in dropped]
        scores = [s for k, s in enumerate(scores) if k not in dropped]

    scores = [max(s, 1e-6) for s in scores]
    return Wireframe(
        junctions=tuple(pts), edges=tuple(edges), width=w.width, height=w.height,
        junction_scores=tuple(jscores), line_scores=tuple(scores),
    )
