"""Slow reference implementations used only to check the library.

None of these share code with ``wfkit``; each recomputes its answer from the
definition by brute force.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def cell_hit_exact(x0, y0, x1, y1, col: int, row: int) -> bool:
    """Does the closed segment meet the half-open cell [col, col+1) x [row, row+1)?

    Exact rational arithmetic: clip the segment to the closed square, then
    reject pieces that only touch the excluded right/bottom edges.
    """
    x0, y0, x1, y1 = (Fraction(v) for v in (x0, y0, x1, y1))
    dx, dy = x1 - x0, y1 - y0
    lo, hi = Fraction(0), Fraction(1)
    for p, q in ((-dx, x0 - col), (dx, col + 1 - x0), (-dy, y0 - row), (dy, row + 1 - y0)):
        if p == 0:
            if q < 0:
                return False
            continue
        t = q / p
        if p < 0:
            lo = max(lo, t)
        else:
            hi = min(hi, t)
    if lo > hi:
        return False
    if lo == hi or (dx == 0 and dy == 0):
        x, y = x0 + lo * dx, y0 + lo * dy
        return x < col + 1 and y < row + 1
    if dx == 0 and x0 == col + 1:
        return False
    if dy == 0 and y0 == row + 1:
        return False
    return True


def supercover_exact(x0, y0, x1, y1, shape) -> set[tuple[int, int]]:
    h, w = shape
    cols = range(max(0, math.floor(min(x0, x1))), min(w, math.floor(max(x0, x1)) + 1))
    rows = range(max(0, math.floor(min(y0, y1))), min(h, math.floor(max(y0, y1)) + 1))
    return {(r, c) for r in rows for c in cols if cell_hit_exact(x0, y0, x1, y1, c, r)}


def supercover_numpy(x0, y0, x1, y1, shape) -> set[tuple[int, int]]:
    """Float, vectorized version of the same cell-clipping test (fast enough for sweeps)."""
    h, w = shape
    c0, c1 = max(0, math.floor(min(x0, x1))), min(w - 1, math.floor(max(x0, x1)))
    r0, r1 = max(0, math.floor(min(y0, y1))), min(h - 1, math.floor(max(y0, y1)))
    if c0 > c1 or r0 > r1:
        return set()
    R, C = np.meshgrid(np.arange(r0, r1 + 1), np.arange(c0, c1 + 1), indexing="ij")
    R, C = R.ravel().astype(float), C.ravel().astype(float)
    dx, dy = x1 - x0, y1 - y0

    def interval(a0, d, cell):
        if d == 0:
            inside = (cell <= a0) & (a0 <= cell + 1)
            return np.where(inside, -np.inf, np.inf), np.where(inside, np.inf, -np.inf)
        ta, tb = (cell - a0) / d, (cell + 1 - a0) / d
        return np.minimum(ta, tb), np.maximum(ta, tb)

    lx, hx = interval(x0, dx, C)
    ly, hy = interval(y0, dy, R)
    lo = np.maximum(0.0, np.maximum(lx, ly))
    hi = np.minimum(1.0, np.minimum(hx, hy))
    ok = lo <= hi
    point = ok & (lo == hi)
    px, py = x0 + lo * dx, y0 + lo * dy
    ok &= ~point | ((px < C + 1) & (py < R + 1))
    if dx == 0:
        ok &= ~(x0 == C + 1)
    if dy == 0:
        ok &= ~(y0 == R + 1)
    return set(zip(R[ok].astype(int).tolist(), C[ok].astype(int).tolist()))


def hardness_bruteforce(p, q, bitmap, size=128.0) -> float:
    h, w = bitmap.shape
    s = w / size
    cells = supercover_numpy(p[0] * s, p[1] * s, q[0] * s, q[1] * s, bitmap.shape)
    if not cells:
        cells = {(min(max(math.floor(p[1] * s), 0), h - 1), min(max(math.floor(p[0] * s), 0), w - 1))}
    return sum(bitmap[r, c] for r, c in cells) / len(cells)


def static_negatives_bruteforce(junctions, edges, pool_size, raster=64, size=128.0):
    bitmap = np.zeros((raster, raster))
    s = raster / size
    for i, j in edges:
        (ax, ay), (bx, by) = junctions[i], junctions[j]
        for r, c in supercover_numpy(ax * s, ay * s, bx * s, by * s, bitmap.shape):
            bitmap[r, c] = 1.0
    edge_set = {(min(e), max(e)) for e in edges}
    scored = []
    for i in range(len(junctions)):
        for j in range(len(junctions)):
            if i < j and (i, j) not in edge_set:
                scored.append((-hardness_bruteforce(junctions[i], junctions[j], bitmap, size), i, j))
    scored.sort()
    return scored[:pool_size]


def sap_replay(preds, gts, theta):
    """Literal replay of the structural-AP matching rules for one image.

    ``preds``: list of (x1, y1, x2, y2, score); ``gts``: list of (x1, y1, x2, y2).
    Returns TP flags in input order.
    """
    order = sorted(range(len(preds)), key=lambda k: (-preds[k][4], k))

    def dist(p, g):
        a = (p[0] - g[0]) ** 2 + (p[1] - g[1]) ** 2 + (p[2] - g[2]) ** 2 + (p[3] - g[3]) ** 2
        b = (p[0] - g[2]) ** 2 + (p[1] - g[3]) ** 2 + (p[2] - g[0]) ** 2 + (p[3] - g[1]) ** 2
        return min(a, b)

    def argmin(p):
        best, arg = math.inf, None
        for k, g in enumerate(gts):
            d = dist(p, g)
            if d < best:
                best, arg = d, k
        return arg, best

    tp = [False] * len(preds)
    for rank, j in enumerate(order):
        arg_j, d_j = argmin(preds[j])
        if arg_j is None or d_j > theta:
            continue
        shadowed = any(argmin(preds[i])[0] == arg_j for i in order[:rank])
        tp[j] = not shadowed
    return tp


def ap_replay(scores, tps, n_gt):
    """Area under the pooled PR curve, one point per distinct score, envelope by definition."""
    points = []
    for s in sorted(set(scores), reverse=True):
        kept = [t for sc, t in zip(scores, tps) if sc >= s]
        points.append((sum(kept) / len(kept), sum(kept) / n_gt))
    area, prev_recall = 0.0, 0.0
    for precision, recall in points:
        best = max(p for p, r in points if r >= recall)
        area += (recall - prev_recall) * best
        prev_recall = recall
    return area


def greedy_pixels_bruteforce(pred_on, gt_on, tol):
    """Sort every admissible pixel pair globally, then accept greedily."""
    gts = list(zip(*np.nonzero(gt_on)))
    preds = list(zip(*np.nonzero(pred_on)))
    pairs = []
    for g in gts:
        for p in preds:
            d2 = (g[0] - p[0]) ** 2 + (g[1] - p[1]) ** 2
            if math.sqrt(d2) <= tol:
                pairs.append((d2, int(g[0]), int(g[1]), int(p[0]), int(p[1])))
    pairs.sort()
    used_g, used_p, out = set(), set(), []
    for _, gr, gc, pr, pc in pairs:
        if (gr, gc) in used_g or (pr, pc) in used_p:
            continue
        used_g.add((gr, gc))
        used_p.add((pr, pc))
        out.append(((gr, gc), (pr, pc)))
    return out


def point_segment_distance_bruteforce(p, a, b, steps=20001) -> float:
    t = np.linspace(0.0, 1.0, steps)
    xs = a[0] + t * (b[0] - a[0])
    ys = a[1] + t * (b[1] - a[1])
    return float(np.min(np.hypot(xs - p[0], ys - p[1])))


def overlap_violations(lines, eta_s=0.01, diagonal=128 * math.sqrt(2), eps=1e-9):
    """All (higher, lower) index pairs breaking the overlap-removal postcondition.

    ``lines``: list of (x1, y1, x2, y2, score). A pair violates it when the two
    lines are close and both endpoints of the lower one project inside the
    higher one's extent.
    """
    def dist(p, a, b):
        ax, ay = a
        dx, dy = b[0] - ax, b[1] - ay
        n = dx * dx + dy * dy
        t = 0.0 if n == 0 else min(1.0, max(0.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / n))
        return math.hypot(p[0] - ax - t * dx, p[1] - ay - t * dy)

    def proj(p, a, b):
        dx, dy = b[0] - a[0], b[1] - a[1]
        return ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)

    bad = []
    for i, li in enumerate(lines):
        for j, lj in enumerate(lines):
            if i == j or lj[4] > li[4] or (lj[4] == li[4] and j < i):
                continue
            a1, a2, b1, b2 = li[0:2], li[2:4], lj[0:2], lj[2:4]
            close = min(max(dist(b1, a1, a2), dist(b2, a1, a2)), max(dist(a1, b1, b2), dist(a2, b1, b2)))
            if close / diagonal > eta_s:
                continue
            if all(-eps <= proj(p, a1, a2) <= 1 + eps for p in (b1, b2)):
                bad.append((i, j))
    return bad
