"""Structural AP over vectorized lines and junction mAP over vectorized junctions.

Both metrics pool outcomes over every image, sort by score and integrate the
precision-recall curve with the all-point interpolated rule: each recall step
is weighted by the best precision reached at that recall or beyond.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .junction_codec import ScoredJunction
from .model import ScoredLine

SAP_THRESHOLDS = (5.0, 10.0, 15.0)
JUNCTION_THRESHOLDS = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class MatchOutcome:
    pred_index: int
    is_tp: bool
    matched_gt: Optional[int]
    image_id: str = ""


@dataclass(frozen=True)
class PRCurve:
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    ap: float

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.thresholds.tolist(), self.precision.tolist(), self.recall.tolist()))


def average_precision(precision, recall) -> float:
    """Area under a PR curve whose points are ordered by non-decreasing recall."""
    precision = np.asarray(precision, dtype=float)
    recall = np.asarray(recall, dtype=float)
    if precision.size == 0:
        return 0.0
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(recall, prepend=0.0)
    return float(np.sum(steps * envelope))


def pr_curve(scores, tp, n_gt: int) -> PRCurve:
    """Pooled PR curve with one point per distinct score threshold.

    ``scores`` and ``tp`` must already be in ranking order (descending score,
    ties in the desired order); ties are collapsed into one point.
    """
    if n_gt <= 0:
        raise ValueError("recall is undefined without ground truth")
    scores = np.asarray(scores, dtype=float)
    tp = np.asarray(tp, dtype=bool)
    if scores.size == 0:
        empty = np.zeros(0)
        return PRCurve(empty, empty, empty, 0.0)
    ctp = np.cumsum(tp)
    n = np.arange(1, scores.size + 1)
    last = np.flatnonzero(np.append(scores[1:] != scores[:-1], True))
    precision = ctp[last] / n[last]
    recall = ctp[last] / n_gt
    return PRCurve(scores[last], precision, recall, average_precision(precision, recall))


def _as_pred_arrays(pred) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(pred, tuple) and len(pred) == 2 and isinstance(pred[0], np.ndarray):
        return np.asarray(pred[0], dtype=float).reshape(-1, 4), np.asarray(pred[1], dtype=float)
    lines = np.array([[l.p1[0], l.p1[1], l.p2[0], l.p2[1]] for l in pred], dtype=float).reshape(-1, 4)
    return lines, np.array([l.score for l in pred], dtype=float)


def as_segments(gt) -> np.ndarray:
    if isinstance(gt, np.ndarray):
        return gt.reshape(-1, 4).astype(float)
    rows = []
    for g in gt:
        if isinstance(g, ScoredLine):
            rows.append([g.p1[0], g.p1[1], g.p2[0], g.p2[1]])
        else:
            (x1, y1), (x2, y2) = g
            rows.append([x1, y1, x2, y2])
    return np.array(rows, dtype=float).reshape(-1, 4)


def line_distances(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Orientation-minimized summed squared endpoint distance, shape ``(P, G)``."""
    p1, p2 = pred[:, None, 0:2], pred[:, None, 2:4]
    u, v = gt[None, :, 0:2], gt[None, :, 2:4]
    straight = ((p1 - u) ** 2).sum(-1) + ((p2 - v) ** 2).sum(-1)
    swapped = ((p1 - v) ** 2).sum(-1) + ((p2 - u) ** 2).sum(-1)
    return np.minimum(straight, swapped)


def rank_order(scores: np.ndarray) -> np.ndarray:
    """Indices sorting by descending score, ties kept in input order."""
    return np.argsort(-np.asarray(scores, dtype=float), kind="stable")


def match_line_arrays(lines: np.ndarray, scores: np.ndarray, gt: np.ndarray, theta: float):
    """Vectorized line matching; returns ``(tp, matched_gt)`` aligned with input order.

    A prediction is a true positive iff its nearest ground-truth line is within
    ``theta`` and no higher-ranked prediction has the same nearest line.
    """
    n = lines.shape[0]
    tp = np.zeros(n, dtype=bool)
    matched = np.full(n, -1, dtype=np.int64)
    if n == 0 or gt.shape[0] == 0:
        return tp, matched
    dist = line_distances(lines, gt)
    nearest = np.argmin(dist, axis=1)
    best = dist[np.arange(n), nearest]
    order = rank_order(scores)
    _, first = np.unique(nearest[order], return_index=True)
    first_claim = np.zeros(n, dtype=bool)
    first_claim[order[first]] = True
    tp = first_claim & (best <= theta)
    matched[tp] = nearest[tp]
    return tp, matched


def match_lines(pred: Sequence[ScoredLine], gt, theta: float, image_id: str = "") -> list[MatchOutcome]:
    if not theta > 0:
        raise ValueError("theta must be positive")
    lines, scores = _as_pred_arrays(pred)
    tp, matched = match_line_arrays(lines, scores, as_segments(gt), theta)
    return [
        MatchOutcome(k, bool(tp[k]), int(matched[k]) if tp[k] else None, image_id)
        for k in range(len(tp))
    ]


def _pool(per_image: Mapping, per_image_gt: Mapping, image_fn) -> tuple[np.ndarray, np.ndarray, int]:
    if set(per_image) != set(per_image_gt):
        raise ValueError("prediction and ground-truth image sets differ")
    scores, tps, n_gt = [], [], 0
    for image_id in sorted(per_image):
        s, t, g = image_fn(per_image[image_id], per_image_gt[image_id])
        scores.append(s)
        tps.append(t)
        n_gt += g
    if not scores:
        return np.zeros(0), np.zeros(0, dtype=bool), n_gt
    scores = np.concatenate(scores)
    tps = np.concatenate(tps)
    order = rank_order(scores)
    return scores[order], tps[order], n_gt


def sap_image_outcomes(pred, gt, theta: float) -> tuple[np.ndarray, np.ndarray, int]:
    """``(scores, tp, n_gt)`` for one image, predictions in input order."""
    lines, scores = _as_pred_arrays(pred)
    segs = as_segments(gt)
    tp, _ = match_line_arrays(lines, scores, segs, theta)
    return scores, tp, segs.shape[0]


def structural_ap(per_image_pred: Mapping, per_image_gt: Mapping, theta: float) -> PRCurve:
    """Pooled structural AP at squared-distance threshold ``theta``.

    Images are concatenated in sorted id order before the global stable sort,
    which fixes how score ties across images are ranked.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    scores, tp, n_gt = _pool(per_image_pred, per_image_gt, lambda p, g: sap_image_outcomes(p, g, theta))
    return pr_curve(scores, tp, n_gt)


def _as_junction_arrays(pred) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(pred, tuple) and len(pred) == 2 and isinstance(pred[0], np.ndarray):
        return np.asarray(pred[0], dtype=float).reshape(-1, 2), np.asarray(pred[1], dtype=float)
    pts = np.array([[j.p[0], j.p[1]] for j in pred], dtype=float).reshape(-1, 2)
    return pts, np.array([j.score for j in pred], dtype=float)


def match_junction_arrays(pts: np.ndarray, scores: np.ndarray, gt: np.ndarray, tau: float) -> np.ndarray:
    """True-positive flags: each prediction takes its nearest unclaimed gt junction within ``tau``."""
    tp = np.zeros(pts.shape[0], dtype=bool)
    if pts.shape[0] == 0 or gt.shape[0] == 0:
        return tp
    dist = np.sqrt(((pts[:, None, :] - gt[None, :, :]) ** 2).sum(-1))
    free = np.ones(gt.shape[0], dtype=bool)
    for k in rank_order(scores):
        row = np.where(free, dist[k], np.inf)
        m = int(np.argmin(row))
        if row[m] <= tau:
            free[m] = False
            tp[k] = True
    return tp


def junction_image_outcomes(pred, gt, tau: float) -> tuple[np.ndarray, np.ndarray, int]:
    pts, scores = _as_junction_arrays(pred)
    gt = np.asarray([tuple(p) for p in gt] if not isinstance(gt, np.ndarray) else gt, dtype=float).reshape(-1, 2)
    return scores, match_junction_arrays(pts, scores, gt, tau), gt.shape[0]


def junction_map(
    per_image_pred: Mapping, per_image_gt: Mapping, thresholds: Sequence[float] = JUNCTION_THRESHOLDS
) -> tuple[dict[float, PRCurve], float]:
    """Junction AP at each distance threshold and their mean."""
    if not thresholds or min(thresholds) <= 0:
        raise ValueError("junction thresholds must be positive")
    curves = {}
    for tau in thresholds:
        scores, tp, n_gt = _pool(
            per_image_pred, per_image_gt, lambda p, g, tau=tau: junction_image_outcomes(p, g, tau)
        )
        curves[tau] = pr_curve(scores, tp, n_gt)
    return curves, float(np.mean([c.ap for c in curves.values()]))


def junctions_from_wireframe(w) -> list[ScoredJunction]:
    return [ScoredJunction(p, s) for p, s in zip(w.junctions, w.junction_score_array().tolist())]
