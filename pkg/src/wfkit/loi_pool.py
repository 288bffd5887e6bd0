"""Line-of-Interest pooling over a ``C x H x W`` feature map, with its backward pass."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Point2


@dataclass(frozen=True)
class LoiConfig:
    n_points: int = 32
    pool_stride: int = 4

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError("n_points must be at least 2")
        if not 1 <= self.pool_stride <= self.n_points:
            raise ValueError("pool_stride must lie in [1, n_points]")

    @property
    def n_slots(self) -> int:
        return -(-self.n_points // self.pool_stride)


@dataclass(frozen=True)
class LoiFeature:
    values: np.ndarray  # (C * n_slots,), channel-major
    argmax_index: np.ndarray  # (C * n_slots,), winning sample index per slot


def _check_fm(fm: np.ndarray) -> np.ndarray:
    fm = np.asarray(fm, dtype=float)
    if fm.ndim != 3 or min(fm.shape) < 1:
        raise ValueError(f"feature map must be C x H x W with positive sizes, got {fm.shape}")
    return fm


def sample_points(p1, p2, n_points: int) -> list[Point2]:
    """``n_points`` evenly spaced points from ``p1`` to ``p2`` inclusive."""
    return [Point2(*q) for q in _sample_array(p1, p2, n_points)]


def _sample_array(p1, p2, n_points: int) -> np.ndarray:
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    t = np.arange(n_points) / (n_points - 1)
    a, b = np.asarray(p1, dtype=float), np.asarray(p2, dtype=float)
    q = (1.0 - t)[:, None] * a + t[:, None] * b
    q[0], q[-1] = a, b
    return q


def _corners(shape, xs: np.ndarray, ys: np.ndarray):
    """Clamped bilinear corner indices and weights for query points."""
    _, h, w = shape
    x = np.clip(xs, 0.0, w - 1)
    y = np.clip(ys, 0.0, h - 1)
    x0 = np.minimum(np.floor(x), max(w - 2, 0)).astype(np.int64)
    y0 = np.minimum(np.floor(y), max(h - 2, 0)).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx, fy = x - x0, y - y0
    idx = ((y0, x0), (y0, x1), (y1, x0), (y1, x1))
    wts = ((1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy)
    return idx, wts


def _bilinear_many(fm: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    idx, wts = _corners(fm.shape, xs, ys)
    out = np.zeros((fm.shape[0], xs.size))
    for (r, c), wt in zip(idx, wts):
        out += fm[:, r, c] * wt
    return out


def bilinear(fm: np.ndarray, q) -> np.ndarray:
    """Interpolated feature vector at ``q``; integer ``(x, y)`` reads ``fm[:, y, x]``.

    Points outside the map are clamped to the border first.
    """
    fm = _check_fm(fm)
    return _bilinear_many(fm, np.array([float(q[0])]), np.array([float(q[1])]))[:, 0]


def _forward(fm: np.ndarray, line, cfg: LoiConfig):
    q = _sample_array(line[0], line[1], cfg.n_points)
    samples = _bilinear_many(fm, q[:, 0], q[:, 1])  # (C, N_p)
    c, n, s = fm.shape[0], cfg.n_points, cfg.pool_stride
    padded = np.full((c, cfg.n_slots * s), -np.inf)
    padded[:, :n] = samples
    windows = padded.reshape(c, cfg.n_slots, s)
    local = np.argmax(windows, axis=2)  # first maximum wins ties
    values = np.take_along_axis(windows, local[..., None], axis=2)[..., 0]
    argmax = local + np.arange(cfg.n_slots) * s
    return q, values.ravel(), argmax.ravel()


def loi_pool_forward(fm: np.ndarray, line, cfg: LoiConfig = LoiConfig()) -> LoiFeature:
    fm = _check_fm(fm)
    _, values, argmax = _forward(fm, line, cfg)
    return LoiFeature(values, argmax)


def loi_pool_backward(fm: np.ndarray, line, cfg: LoiConfig, upstream) -> np.ndarray:
    """Gradient of ``<upstream, loi_pool_forward(fm).values>`` with respect to ``fm``.

    Line endpoints are treated as constants.
    """
    fm = _check_fm(fm)
    upstream = np.asarray(upstream, dtype=float).ravel()
    c = fm.shape[0]
    if upstream.size != c * cfg.n_slots:
        raise ValueError(f"upstream has length {upstream.size}, expected {c * cfg.n_slots}")
    q, _, argmax = _forward(fm, line, cfg)
    chan = np.repeat(np.arange(c), cfg.n_slots)
    winners = q[argmax]
    idx, wts = _corners(fm.shape, winners[:, 0], winners[:, 1])
    grad = np.zeros_like(fm)
    for (r, col), wt in zip(idx, wts):
        np.add.at(grad, (chan, r, col), upstream * wt)
    return grad


def manual_feature(line) -> np.ndarray:
    """Endpoint coordinates followed by the unit direction from the second to the first endpoint."""
    (x1, y1), (x2, y2) = line
    norm = math.hypot(x1 - x2, y1 - y2)
    if norm == 0:
        raise ValueError("manual feature is undefined for a degenerate line")
    return np.array([x1, y1, x2, y2, (x1 - x2) / norm, (y1 - y2) / norm], dtype=float)
