"""Supercover line traversal on a unit grid.

Cell ``(col, row)`` covers the half-open square ``[col, col+1) x [row, row+1)``.
A segment visits every cell that contains at least one of its points, so the
visited set does not depend on endpoint order.
"""
from __future__ import annotations

import numpy as np

_CORNER_T = 1e-12


def _lerp(a0, a1, t):
    # interpolate from the nearer endpoint so t=0 and t=1 reproduce them exactly
    d = a1 - a0
    return np.where(t <= 0.5, a0 + t * d, a1 - (1.0 - t) * d)


def _expand(counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(owner, rank)`` for ``counts[i]`` consecutive items owned by each i."""
    owner = np.repeat(np.arange(counts.size), counts)
    rank = np.arange(owner.size) - np.repeat(np.cumsum(counts) - counts, counts)
    return owner, rank


def _crossings(a0: np.ndarray, a1: np.ndarray):
    """Owner, parameter and lattice value of every crossing of ``a`` with an integer."""
    lo, hi = np.minimum(a0, a1), np.maximum(a0, a1)
    first = np.ceil(lo)
    counts = np.where(a0 == a1, 0, np.floor(hi) - first + 1).astype(np.int64)
    owner, rank = _expand(np.maximum(counts, 0))
    k = first[owner] + rank
    return owner, (k - a0[owner]) / (a1 - a0)[owner], k


def _snap(other0, other1, t, value):
    """Replace ``value`` by the lattice line it meets when the crossing is a lattice corner."""
    k = np.round(value)
    d = other1 - other0
    inside = (k >= np.minimum(other0, other1)) & (k <= np.maximum(other0, other1)) & (d != 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        tk = (k - other0) / d
    return np.where(inside & (np.abs(tk - t) < _CORNER_T), k, value)


def supercover_many(segs, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cells visited by each row ``(x0, y0, x1, y1)`` of ``segs``.

    Returns ``(owner, rows, cols)``: one entry per visited in-grid cell, with
    no repeats within a segment. A degenerate segment visits the cell holding
    its point; cells outside ``shape`` (rows, cols) are dropped.
    """
    segs = np.asarray(segs, dtype=float).reshape(-1, 4)
    x0, y0, x1, y1 = segs.T
    n = segs.shape[0]
    if n == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    ox, tx, kx = _crossings(x0, x1)
    oy, ty, ky = _crossings(y0, y1)
    # on a lattice crossing the crossed coordinate is exact; the other one is
    # exact too when an x and a y crossing coincide (a lattice corner)
    ys_at_x = _snap(y0[ox], y1[ox], tx, _lerp(y0[ox], y1[ox], tx))
    xs_at_y = _snap(x0[oy], x1[oy], ty, _lerp(x0[oy], x1[oy], ty))

    # breakpoints per segment, then the midpoint of every piece between them
    owner_t = np.concatenate([np.arange(n), np.arange(n), ox, oy])
    t = np.concatenate([np.zeros(n), np.ones(n), tx, ty])
    order = np.lexsort((t, owner_t))
    owner_t, t = owner_t[order], t[order]
    keep = np.r_[True, (owner_t[1:] != owner_t[:-1]) | (t[1:] != t[:-1])]
    owner_t, t = owner_t[keep], t[keep]
    same = owner_t[1:] == owner_t[:-1]
    om = owner_t[1:][same]
    mids = 0.5 * (t[1:][same] + t[:-1][same])

    owner = np.concatenate([np.arange(n), np.arange(n), ox, oy, om])
    xs = np.concatenate([x0, x1, kx, xs_at_y, _lerp(x0[om], x1[om], mids)])
    ys = np.concatenate([y0, y1, ys_at_x, ky, _lerp(y0[om], y1[om], mids)])
    cols = np.floor(xs).astype(np.int64)
    rows = np.floor(ys).astype(np.int64)
    h, w = shape
    ok = (cols >= 0) & (cols < w) & (rows >= 0) & (rows < h)
    key = np.unique(owner[ok] * (h * w) + rows[ok] * w + cols[ok])
    flat = key % (h * w)
    return key // (h * w), flat // w, flat % w


def supercover(x0: float, y0: float, x1: float, y1: float, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(rows, cols)`` of grid cells visited by one segment."""
    _, rows, cols = supercover_many([[x0, y0, x1, y1]], shape)
    return rows, cols


def visited_cells(x0: float, y0: float, x1: float, y1: float, shape: tuple[int, int]) -> set[tuple[int, int]]:
    rows, cols = supercover(x0, y0, x1, y1, shape)
    return set(zip(rows.tolist(), cols.tolist()))
