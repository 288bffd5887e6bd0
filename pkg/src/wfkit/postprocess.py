"""Overlapped-line removal for scored wireframes.

Lines are visited from highest to lowest score. Each line is compared against
every surviving higher-ranked line and deleted, cut, or kept, repeating until
no higher-ranked line changes it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .model import CANONICAL_SIZE, ScoredLine

_EPS = 1e-9
_MAX_ROUNDS = 64


@dataclass(frozen=True)
class OverlapConfig:
    eta_s: float = 0.01
    diagonal: float = math.hypot(CANONICAL_SIZE, CANONICAL_SIZE)

    def __post_init__(self):
        if not self.eta_s > 0:
            raise ValueError("eta_s must be positive")
        if not self.diagonal > 0:
            raise ValueError("diagonal must be positive")


def point_segment_distance(p, seg) -> float:
    (px, py), ((ax, ay), (bx, by)) = p, seg
    dx, dy = bx - ax, by - ay
    len2 = dx * dx + dy * dy
    if len2 == 0:
        return math.hypot(px - ax, py - ay)
    t = min(1.0, max(0.0, ((px - ax) * dx + (py - ay) * dy) / len2))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def _seg(line: ScoredLine):
    return line.p1, line.p2


def lines_close(a: ScoredLine, b: ScoredLine, cfg: OverlapConfig = OverlapConfig()) -> bool:
    sa, sb = _seg(a), _seg(b)
    b_to_a = max(point_segment_distance(b.p1, sa), point_segment_distance(b.p2, sa))
    a_to_b = max(point_segment_distance(a.p1, sb), point_segment_distance(a.p2, sb))
    return min(b_to_a, a_to_b) / cfg.diagonal <= cfg.eta_s


def _project(p, a, b) -> float:
    dx, dy = b[0] - a[0], b[1] - a[1]
    return ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)


def _inside(t: float) -> bool:
    return -_EPS <= t <= 1.0 + _EPS


def _apply(li: ScoredLine, lj: ScoredLine, cfg: OverlapConfig):
    """Outcome of ranking ``li`` above ``lj``: None (delete), ``lj`` itself, or a cut copy."""
    if not lines_close(li, lj, cfg):
        return lj
    t1 = _project(lj.p1, li.p1, li.p2)
    t2 = _project(lj.p2, li.p1, li.p2)
    in1, in2 = _inside(t1), _inside(t2)
    if in1 and in2:
        return None
    if in1 == in2:
        return lj
    # exactly one endpoint projects inside li: move it to where lj leaves li's extent
    if in1:
        t_in, t_out, p_in, p_out = t1, t2, lj.p1, lj.p2
    else:
        t_in, t_out, p_in, p_out = t2, t1, lj.p2, lj.p1
    bound = 1.0 if t_out > 1.0 else 0.0
    if abs(t_in - bound) <= _EPS:
        return lj
    s = (bound - t_out) / (t_in - t_out)
    cut = (p_out[0] + s * (p_in[0] - p_out[0]), p_out[1] + s * (p_in[1] - p_out[1]))
    if cut == tuple(p_out):
        return None
    if in1:
        return ScoredLine(cut, lj.p2, lj.score)
    return ScoredLine(lj.p1, cut, lj.score)


def resolve_overlaps(lines: Sequence[ScoredLine], cfg: OverlapConfig = OverlapConfig()) -> list[ScoredLine]:
    """Delete or cut lower-ranked lines overlapping a higher-ranked one.

    Scores are untouched. Survivors are returned in input order; equal scores
    rank in input order.
    """
    order = sorted(range(len(lines)), key=lambda k: -lines[k].score)
    result: dict[int, ScoredLine] = {}
    ranked: list[int] = []
    for j in order:
        current = lines[j]
        for _ in range(_MAX_ROUNDS):
            changed = False
            for i in ranked:
                nxt = _apply(result[i], current, cfg)
                if nxt is None:
                    current = None
                    break
                if nxt is not current:
                    current, changed = nxt, True
            if current is None or not changed:
                break
        if current is not None:
            result[j] = current
            ranked.append(j)
    return [result[k] for k in sorted(result)]
