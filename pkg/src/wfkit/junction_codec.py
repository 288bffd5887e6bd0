"""Junction likelihood/offset map encoding and top-K decoding with NMS.

Offsets follow ``O(b) = p - center(b)`` with ``center(bx, by) = (bx + 0.5, by + 0.5)``,
so every component lies in ``[-0.5, 0.5)`` and decoding is ``center(b) + O(b)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import Point2, Wireframe, check


class JunctionMaps(NamedTuple):
    J: np.ndarray  # (H_b, W_b)
    O: np.ndarray  # (2, H_b, W_b); channel 0 is x, channel 1 is y


@dataclass(frozen=True)
class ScoredJunction:
    p: Point2
    score: float


def encode(w: Wireframe, bins: tuple[int, int] = (128, 128)) -> JunctionMaps:
    """Rasterize ground-truth junctions into likelihood and offset maps.

    Junction coordinates are scaled from the wireframe's coordinate space onto
    the ``(H_b, W_b)`` bin lattice. When several junctions share a bin, the one
    nearest the bin center is kept (lowest index on ties).
    """
    check(w)
    hb, wb = int(bins[0]), int(bins[1])
    if hb <= 0 or wb <= 0:
        raise ValueError(f"bins must be positive, got {bins}")
    J = np.zeros((hb, wb))
    O = np.zeros((2, hb, wb))
    best = {}
    sx, sy = wb / w.width, hb / w.height
    for k, (x, y) in enumerate(w.junctions):
        px, py = x * sx, y * sy
        bx, by = int(np.floor(px)), int(np.floor(py))
        if not (0 <= bx < wb and 0 <= by < hb):
            raise ValueError(f"junction {k} at ({x}, {y}) falls outside the {hb}x{wb} bin grid")
        ox, oy = px - (bx + 0.5), py - (by + 0.5)
        d = ox * ox + oy * oy
        if (by, bx) in best and best[(by, bx)] <= d:
            continue
        best[(by, bx)] = d
        J[by, bx] = 1.0
        O[0, by, bx] = ox
        O[1, by, bx] = oy
    return JunctionMaps(J, O)


def nms(J: np.ndarray) -> np.ndarray:
    """Zero every cell that is not the maximum of its 3x3 neighborhood.

    Border cells compare against the truncated neighborhood. Ties survive.
    """
    J = np.asarray(J, dtype=float)
    padded = np.pad(J, 1, mode="constant", constant_values=-np.inf)
    h, w = J.shape
    local_max = np.full_like(J, -np.inf)
    for dy in range(3):
        for dx in range(3):
            np.maximum(local_max, padded[dy:dy + h, dx:dx + w], out=local_max)
    return np.where(J == local_max, J, 0.0)


def decode_topk(m: JunctionMaps, k: int = 300) -> list[ScoredJunction]:
    """Return up to ``k`` junctions from the NMS-filtered likelihood map, best first.

    Coordinates are in bin units. Equal scores are ordered row-major.
    """
    Jp = nms(m.J)
    flat = Jp.ravel()
    pos = np.flatnonzero(flat > 0)
    order = pos[np.lexsort((pos, -flat[pos]))][: max(int(k), 0)]
    rows, cols = np.divmod(order, Jp.shape[1])
    out = []
    for idx, r, c in zip(order, rows, cols):
        p = Point2(c + 0.5 + float(m.O[0, r, c]), r + 0.5 + float(m.O[1, r, c]))
        out.append(ScoredJunction(p, float(flat[idx])))
    return out
