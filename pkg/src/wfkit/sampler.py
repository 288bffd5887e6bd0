"""Static and dynamic line samplers with rasterization-based hard negative mining."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .junction_codec import ScoredJunction
from .model import Point2, ScoredLine, Wireframe, check
from .raster import supercover_many

POSITIVE, NEGATIVE = "positive", "negative"
ORIGINS = ("S+", "S-", "D+", "D-", "D*")


@dataclass(frozen=True)
class SamplerConfig:
    n_s_pos: int = 300
    n_s_neg: int = 40
    n_d_pos: int = 300
    n_d_neg: int = 80
    n_d_rand: int = 600
    eta: float = 1.5
    hard_pool_size: int = 2000
    raster_size: int = 64

    def __post_init__(self):
        counts = (self.n_s_pos, self.n_s_neg, self.n_d_pos, self.n_d_neg, self.n_d_rand, self.hard_pool_size)
        if min(counts) < 0:
            raise ValueError("sampler counts must be non-negative")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.raster_size < 1:
            raise ValueError("raster_size must be at least 1")


@dataclass(frozen=True)
class LabeledLine:
    p1: Point2
    p2: Point2
    label: str
    origin: str

    @property
    def line(self) -> ScoredLine:
        return ScoredLine(self.p1, self.p2, 1.0)

    def to_json(self) -> dict:
        return {"p1": list(self.p1), "p2": list(self.p2), "label": self.label, "origin": self.origin}


@dataclass(frozen=True)
class JunctionMatch:
    pred_index: int
    gt_index: Optional[int]
    distance: float


def _raster_scale(w: Wireframe, size: int) -> tuple[float, float]:
    return size / w.width, size / w.height


def rasterize_gt(w: Wireframe, raster_size: int = 64) -> np.ndarray:
    """Binary ``raster_size`` square bitmap of every ground-truth line."""
    check(w)
    bitmap = np.zeros((raster_size, raster_size))
    sx, sy = _raster_scale(w, raster_size)
    _, rows, cols = supercover_many(w.line_array() * np.array([sx, sy, sx, sy]), bitmap.shape)
    bitmap[rows, cols] = 1.0
    return bitmap


def hardness_many(segs, bitmap: np.ndarray, width: float = 128.0, height: float = 128.0) -> np.ndarray:
    """Hardness of every row ``(x1, y1, x2, y2)`` of ``segs``; see :func:`hardness`."""
    segs = np.asarray(segs, dtype=float).reshape(-1, 4)
    h, w = bitmap.shape
    sx, sy = w / width, h / height
    scaled = segs * np.array([sx, sy, sx, sy])
    owner, rows, cols = supercover_many(scaled, bitmap.shape)
    n = segs.shape[0]
    total = np.bincount(owner, weights=bitmap[rows, cols], minlength=n)
    count = np.bincount(owner, minlength=n)
    # degenerate or fully off-grid: fall back to the clamped start cell
    empty = np.flatnonzero(count == 0)
    if empty.size:
        r = np.clip(np.floor(scaled[empty, 1]).astype(np.int64), 0, h - 1)
        c = np.clip(np.floor(scaled[empty, 0]).astype(np.int64), 0, w - 1)
        total[empty] = bitmap[r, c]
        count[empty] = 1
    return total / count


def hardness(candidate, bitmap: np.ndarray, width: float = 128.0, height: float = 128.0) -> float:
    """Mean bitmap value over the cells the candidate segment visits.

    ``candidate`` is a pair of points in a ``width`` x ``height`` coordinate space.
    """
    (x1, y1), (x2, y2) = candidate
    return float(hardness_many([[x1, y1, x2, y2]], bitmap, width, height)[0])


def static_negatives(w: Wireframe, cfg: SamplerConfig = SamplerConfig()) -> list[tuple[int, int]]:
    """Mine the hardest non-edge junction pairs (the static negative pool).

    Pairs are ranked by hardness, descending, then lexicographically.
    """
    bitmap = rasterize_gt(w, cfg.raster_size)
    n = len(w.junctions)
    i, j = np.triu_indices(n, k=1)
    if w.edges:
        edge = np.zeros((n, n), dtype=bool)
        e = np.array(w.edges)
        edge[e[:, 0], e[:, 1]] = True
        keep = ~edge[i, j]
        i, j = i[keep], j[keep]
    pts = w.junction_array()
    h = hardness_many(np.concatenate([pts[i], pts[j]], axis=1), bitmap, w.width, w.height)
    order = np.lexsort((j, i, -h))[: cfg.hard_pool_size]
    return list(zip(i[order].tolist(), j[order].tolist()))


def _draw(rng: np.random.Generator, pool_size: int, count: int) -> np.ndarray:
    if pool_size == 0 or count == 0:
        return np.zeros(0, dtype=np.int64)
    return rng.integers(0, pool_size, size=count)


def sample_static(w: Wireframe, cfg: SamplerConfig = SamplerConfig(), rng_seed: int = 0) -> list[LabeledLine]:
    check(w)
    rng = np.random.default_rng(rng_seed)
    pool = static_negatives(w, cfg)
    out = []
    for k in _draw(rng, len(w.edges), cfg.n_s_pos):
        i, j = w.edges[k]
        out.append(LabeledLine(w.junctions[i], w.junctions[j], POSITIVE, "S+"))
    for k in _draw(rng, len(pool), cfg.n_s_neg):
        i, j = pool[k]
        out.append(LabeledLine(w.junctions[i], w.junctions[j], NEGATIVE, "S-"))
    return out


def match_junctions(pred: Sequence[ScoredJunction], gt: Wireframe, eta: float) -> list[JunctionMatch]:
    """Match each prediction to its nearest ground-truth junction (non-exclusive)."""
    gts = gt.junction_array()
    out = []
    for k, sj in enumerate(pred):
        if len(gts) == 0:
            out.append(JunctionMatch(k, None, float("inf")))
            continue
        d = np.hypot(gts[:, 0] - sj.p[0], gts[:, 1] - sj.p[1])
        m = int(np.argmin(d))
        dist = float(d[m])
        out.append(JunctionMatch(k, m if dist < eta else None, dist))
    return out


def dynamic_pools(
    pred: Sequence[ScoredJunction], gt: Wireframe, s_neg_pool, eta: float
) -> tuple[list, list, list]:
    """Split every unordered pair of predicted junctions into the D+, D-, D* pools.

    Returns three lists of ``(i1, i2)`` prediction index pairs; every pair is in D*.
    """
    matches = match_junctions(pred, gt, eta)
    edges = set(gt.edges)
    hard = {(min(a, b), max(a, b)) for a, b in s_neg_pool}
    d_pos, d_neg, d_all = [], [], []
    for a in range(len(pred)):
        ma = matches[a].gt_index
        for b in range(a + 1, len(pred)):
            d_all.append((a, b))
            mb = matches[b].gt_index
            if ma is None or mb is None:
                continue
            key = (min(ma, mb), max(ma, mb))
            if key in edges:
                d_pos.append((a, b))
            elif key in hard:
                d_neg.append((a, b))
    return d_pos, d_neg, d_all


def sample_dynamic(
    pred: Sequence[ScoredJunction],
    gt: Wireframe,
    s_neg_pool,
    cfg: SamplerConfig = SamplerConfig(),
    rng_seed: int = 0,
) -> list[LabeledLine]:
    check(gt)
    rng = np.random.default_rng(rng_seed)
    d_pos, d_neg, d_all = dynamic_pools(pred, gt, s_neg_pool, cfg.eta)
    positive = set(d_pos)
    out = []
    for pool, count, origin in ((d_pos, cfg.n_d_pos, "D+"), (d_neg, cfg.n_d_neg, "D-"), (d_all, cfg.n_d_rand, "D*")):
        for k in _draw(rng, len(pool), count):
            a, b = pool[k]
            if origin == "D*":
                label = POSITIVE if (a, b) in positive else NEGATIVE
            else:
                label = POSITIVE if origin == "D+" else NEGATIVE
            out.append(LabeledLine(pred[a].p, pred[b].p, label, origin))
    return out
