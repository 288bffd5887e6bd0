"""Heat-map line metrics: rasterized confidence maps matched pixel by pixel.

Pixel correspondence is greedy nearest-pair: admissible pairs (distance within
tolerance) are accepted in ascending distance order, ties broken by the
(row, col) of the gt pixel and then of the predicted pixel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .metrics_structural import PRCurve, as_segments, average_precision
from .raster import supercover_many


def default_thresholds() -> tuple[float, ...]:
    return tuple(round(k / 100, 2) for k in range(1, 100))


@dataclass(frozen=True)
class HeatmapEvalConfig:
    resolution: int = 128
    tolerance: Optional[float] = None  # pixels; None means 0.0075 x map diagonal
    thresholds: tuple = field(default_factory=default_thresholds)

    def __post_init__(self):
        if self.resolution < 8:
            raise ValueError("resolution must be at least 8")
        if self.tolerance is not None and not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        t = np.asarray(self.thresholds, dtype=float)
        if t.size == 0 or np.any(np.diff(t) <= 0):
            raise ValueError("thresholds must be strictly increasing")

    @property
    def tol(self) -> float:
        if self.tolerance is not None:
            return float(self.tolerance)
        return 0.0075 * math.hypot(self.resolution, self.resolution)


@dataclass(frozen=True)
class HeatmapResult:
    curve: PRCurve
    ap_h: float
    f_h: float


def rasterize_scored(lines, cfg: HeatmapEvalConfig = HeatmapEvalConfig(), scale: tuple[float, float] = (1.0, 1.0)) -> np.ndarray:
    """Confidence map: each cell holds the max score among lines visiting it.

    ``lines`` is a sequence of ScoredLine or a ``(lines (N, 4), scores (N,))``
    array pair; coordinates are multiplied by ``scale`` = (sx, sy) first.
    """
    if isinstance(lines, tuple) and len(lines) == 2 and isinstance(lines[0], np.ndarray):
        segs, scores = np.asarray(lines[0], dtype=float).reshape(-1, 4), np.asarray(lines[1], dtype=float)
    else:
        segs = np.array([[l.p1[0], l.p1[1], l.p2[0], l.p2[1]] for l in lines], dtype=float).reshape(-1, 4)
        scores = np.array([l.score for l in lines], dtype=float)
    r = cfg.resolution
    grid = np.zeros((r, r))
    sx, sy = scale
    owner, rows, cols = supercover_many(segs * np.array([sx, sy, sx, sy]), grid.shape)
    np.maximum.at(grid, (rows, cols), scores[owner])
    return grid


def _offsets(tol: float) -> list[tuple[int, int, int]]:
    """``(d2, dy, dx)`` for every pixel offset within ``tol``, including zero."""
    reach = int(math.floor(tol))
    out = []
    for dy in range(-reach, reach + 1):
        for dx in range(-reach, reach + 1):
            d2 = dy * dy + dx * dx
            if math.sqrt(d2) <= tol:
                out.append((d2, dy, dx))
    return out


def _candidates(pred_on: np.ndarray, gt_on: np.ndarray, tol: float) -> np.ndarray:
    """Admissible pairs as rows ``(d2, gt_row, gt_col, pred_row, pred_col)`` in greedy order."""
    h, w = gt_on.shape
    gr, gc = np.nonzero(gt_on)
    parts = []
    for d2, dy, dx in _offsets(tol):
        pr, pc = gr + dy, gc + dx
        ok = (pr >= 0) & (pr < h) & (pc >= 0) & (pc < w)
        ok[ok] = pred_on[pr[ok], pc[ok]]
        parts.append(np.stack([np.full(int(ok.sum()), d2), gr[ok], gc[ok], pr[ok], pc[ok]], axis=1))
    cand = np.concatenate(parts) if parts else np.zeros((0, 5), dtype=np.int64)
    return cand[np.lexsort(cand.T[::-1])]


def _first_fit(g: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Sequential greedy acceptance of pairs listed in priority order, vectorized.

    A live pair that comes first among live pairs at both its gt node and its
    pred node is exactly what the sequential scan would take next, so every
    such pair is accepted at once and the pairs it conflicts with are dropped.
    """
    n = g.size
    accepted = np.zeros(n, dtype=bool)
    idx = np.arange(n)
    n_g = int(g.max()) + 1 if n else 0
    n_p = int(p.max()) + 1 if n else 0
    while idx.size:
        first_g = np.full(n_g, n)
        first_p = np.full(n_p, n)
        np.minimum.at(first_g, g[idx], idx)
        np.minimum.at(first_p, p[idx], idx)
        take = idx[(first_g[g[idx]] == idx) & (first_p[p[idx]] == idx)]
        accepted[take] = True
        used_g = np.zeros(n_g, dtype=bool)
        used_p = np.zeros(n_p, dtype=bool)
        used_g[g[take]] = True
        used_p[p[take]] = True
        idx = idx[~(used_g[g[idx]] | used_p[p[idx]])]
    return accepted


def greedy_match(pred_on: np.ndarray, gt_on: np.ndarray, tol: float) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """One-to-one greedy pixel matching; returns ``[(gt_pixel, pred_pixel), ...]``.

    Admissible pairs are accepted in ascending ``(d2, gt_row, gt_col,
    pred_row, pred_col)`` order, skipping pairs whose pixels are taken.
    """
    cand = _candidates(pred_on.astype(bool), gt_on.astype(bool), tol)
    w = gt_on.shape[1]
    sel = cand[_first_fit(cand[:, 1] * w + cand[:, 2], cand[:, 3] * w + cand[:, 4])]
    return [((a, b), (c, d)) for _, a, b, c, d in sel.tolist()]


def match_counts(pred: np.ndarray, gt: np.ndarray, cfg: HeatmapEvalConfig = HeatmapEvalConfig()) -> np.ndarray:
    """Per-threshold ``(matched, pred_on, gt_on)`` counts for one image, shape ``(T, 3)``.

    Equivalent to running :func:`greedy_match` on ``pred >= t`` for every
    threshold, but pixels only interact inside connected components of the
    admissible-pair graph, and a component's matching only changes when ``t``
    crosses one of its own confidence levels. Each (component, level) instance
    is matched once, all instances together in one vectorized pass.
    """
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    thresholds = np.asarray(cfg.thresholds, dtype=float)
    gt_on = gt > 0
    n_gt = int(gt_on.sum())
    out = np.zeros((thresholds.size, 3), dtype=np.int64)
    out[:, 2] = n_gt
    values = np.sort(pred[pred >= thresholds[0]])
    out[:, 1] = values.size - np.searchsorted(values, thresholds, side="left")
    on = np.where(pred >= thresholds[0], pred, 0.0)
    # a predicted pixel lying on a gt pixel is matched to it at distance 0
    # whenever it is on, so it never takes part in a longer pair
    exact = np.sort(on[gt_on & (on > 0)])
    out[:, 0] = exact.size - np.searchsorted(exact, thresholds, side="left")
    cand = _candidates((on > 0) & ~gt_on, gt_on, cfg.tol)
    if cand.shape[0] == 0:
        return out
    h, w = gt.shape
    g = cand[:, 1] * w + cand[:, 2]
    p = cand[:, 3] * w + cand[:, 4]
    v = on[cand[:, 3], cand[:, 4]]
    # the gt pixel is still free at threshold t only when its own pixel is off
    gv = on[cand[:, 1], cand[:, 2]]

    # components over gt nodes [0, hw) and pred nodes [hw, 2hw)
    graph = coo_matrix((np.ones(g.size), (g, p + h * w)), shape=(2 * h * w, 2 * h * w))
    _, label = connected_components(graph, directed=False)
    comp = label[g]

    # a component's matching is fixed between consecutive levels among its
    # pred values and the nonzero values sitting on its gt pixels
    keys = np.concatenate([np.stack([comp, v], axis=1), np.stack([comp, gv], axis=1)[gv > 0]])
    levels, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    top = inverse[: g.size]
    # first level strictly above gv within the component
    comp_start = np.searchsorted(levels[:, 0], comp, side="left")
    bottom = comp_start.copy()
    has_gv = gv > 0
    bottom[has_gv] = inverse[g.size:] + 1
    # pair k is present in the instances of its component with gv < level <= v
    reps = np.maximum(top - bottom + 1, 0)
    inst = np.repeat(bottom, reps) + (np.arange(reps.sum()) - np.repeat(np.cumsum(reps) - reps, reps))
    src = np.repeat(np.arange(g.size), reps)
    # keep each instance's pairs in the global greedy order
    order = np.lexsort((src, inst))
    inst, src = inst[order], src[order]
    gi = np.unique(inst * (h * w) + g[src], return_inverse=True)[1].reshape(-1)
    pi = np.unique(inst * (h * w) + p[src], return_inverse=True)[1].reshape(-1)
    matched = np.bincount(inst[_first_fit(gi, pi)], minlength=levels.shape[0])

    # instance (c, level l) governs thresholds in (previous level of c, l]
    prev = np.where(
        np.r_[True, levels[1:, 0] != levels[:-1, 0]], -np.inf, np.r_[-np.inf, levels[:-1, 1]]
    )
    lo = np.searchsorted(thresholds, prev, side="right")
    hi = np.searchsorted(thresholds, levels[:, 1], side="right")
    diff = np.zeros(thresholds.size + 1, dtype=np.int64)
    np.add.at(diff, lo, matched)
    np.add.at(diff, hi, -matched)
    out[:, 0] += np.cumsum(diff)[:-1]
    return out


def pr_from_counts(counts: np.ndarray, cfg: HeatmapEvalConfig = HeatmapEvalConfig()) -> HeatmapResult:
    """Pooled PR curve and the AP^H / F^H summaries from summed match counts.

    Thresholds at which nothing is predicted contribute no point.
    """
    matched, pred_on, gt_on = counts[:, 0], counts[:, 1], counts[:, 2]
    if np.any(gt_on <= 0):
        raise ValueError("ground-truth heat map is empty; recall is undefined")
    thresholds = np.asarray(cfg.thresholds, dtype=float)
    keep = pred_on > 0
    precision = matched[keep] / pred_on[keep]
    recall = matched[keep] / gt_on[keep]
    thr = thresholds[keep]
    # descending threshold gives non-decreasing recall
    thr, precision, recall = thr[::-1], precision[::-1], recall[::-1]
    ap = average_precision(precision, recall)
    with np.errstate(invalid="ignore", divide="ignore"):
        f = np.where(precision + recall > 0, 2 * precision * recall / (precision + recall), 0.0)
    f_h = float(f.max()) if f.size else 0.0
    return HeatmapResult(PRCurve(thr, precision, recall, ap), ap, f_h)


def heatmap_pr(pred: np.ndarray, gt: np.ndarray, cfg: HeatmapEvalConfig = HeatmapEvalConfig()) -> HeatmapResult:
    return pr_from_counts(match_counts(pred, gt, cfg), cfg)


def heatmap_image_counts(pred_lines, gt_lines, cfg: HeatmapEvalConfig, scale=(1.0, 1.0)) -> np.ndarray:
    """Rasterize one image's predicted and gt lines and return its match counts."""
    pred_map = rasterize_scored(pred_lines, cfg, scale)
    gt_segs = unit_scores(gt_lines)
    gt_map = rasterize_scored(gt_segs, cfg, scale)
    return match_counts(pred_map, (gt_map > 0).astype(float), cfg)


def unit_scores(lines):
    """Same lines with every score set to 1 (ground-truth rendering)."""
    if isinstance(lines, tuple) and len(lines) == 2 and isinstance(lines[0], np.ndarray):
        segs = np.asarray(lines[0], dtype=float).reshape(-1, 4)
    elif isinstance(lines, np.ndarray):
        segs = lines.reshape(-1, 4).astype(float)
    else:
        segs = as_segments(lines)
    return segs, np.ones(segs.shape[0])


def heatmap_ap(per_image_pred: Mapping, per_image_gt: Mapping, cfg: HeatmapEvalConfig = HeatmapEvalConfig(),
               scale=(1.0, 1.0)) -> HeatmapResult:
    """Dataset-level AP^H and F^H from pooled per-threshold counts."""
    if set(per_image_pred) != set(per_image_gt):
        raise ValueError("prediction and ground-truth image sets differ")
    total = np.zeros((len(cfg.thresholds), 3), dtype=np.int64)
    for image_id in sorted(per_image_pred):
        total += heatmap_image_counts(per_image_pred[image_id], per_image_gt[image_id], cfg, scale)
    return pr_from_counts(total, cfg)
