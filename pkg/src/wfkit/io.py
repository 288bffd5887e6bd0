"""Wireframe JSON, ``WFT1`` tensor files and PR-curve CSV output.

Tensor layout: the 4-byte magic ``WFT1``, a little-endian uint32 ``ndim``,
``ndim`` little-endian uint32 dimensions, then the payload as little-endian
float32 in row-major order.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .metrics_structural import PRCurve
from .model import Wireframe, WireframeError, validate

MAGIC = b"WFT1"
_WIREFRAME_KEYS = {"coord_space", "junctions", "edges", "junction_scores", "line_scores"}
_MAX_NDIM = 8


class TensorFormatError(ValueError):
    pass


def wireframe_to_dict(w: Wireframe) -> dict:
    out = {
        "coord_space": [float(w.width), float(w.height)],
        "junctions": [[float(x), float(y)] for x, y in w.junctions],
        "edges": [[int(i), int(j)] for i, j in w.edges],
    }
    if w.junction_scores is not None:
        out["junction_scores"] = [float(s) for s in w.junction_scores]
    if w.line_scores is not None:
        out["line_scores"] = [float(s) for s in w.line_scores]
    return out


def wireframe_from_dict(data: dict) -> Wireframe:
    if not isinstance(data, dict):
        raise WireframeError("wireframe JSON must be an object")
    unknown = set(data) - _WIREFRAME_KEYS
    if unknown:
        raise WireframeError(f"unknown wireframe fields: {sorted(unknown)}")
    for key in ("coord_space", "junctions", "edges"):
        if key not in data:
            raise WireframeError(f"missing wireframe field {key!r}")
    try:
        width, height = (float(v) for v in data["coord_space"])
        junctions = tuple((float(p[0]), float(p[1])) for p in data["junctions"])
        edges = []
        for e in data["edges"]:
            if len(e) != 2 or any(isinstance(v, float) and not v.is_integer() for v in e):
                raise WireframeError(f"malformed edge {e!r}")
            edges.append((int(e[0]), int(e[1])))
        jscores = data.get("junction_scores")
        lscores = data.get("line_scores")
    except (TypeError, ValueError, IndexError) as exc:
        raise WireframeError(f"malformed wireframe JSON: {exc}") from exc
    w = Wireframe(
        junctions=junctions, edges=tuple(edges), width=width, height=height,
        junction_scores=None if jscores is None else tuple(jscores),
        line_scores=None if lscores is None else tuple(lscores),
    )
    problems = validate(w)
    if problems:
        raise WireframeError("invalid wireframe: " + "; ".join(problems))
    return w


def dumps_wireframe(w: Wireframe) -> str:
    return json.dumps(wireframe_to_dict(w), sort_keys=True) + "\n"


def read_wireframe(path) -> Wireframe:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise WireframeError(f"{path}: not valid JSON ({exc})") from exc
    return wireframe_from_dict(data)


def write_wireframe(w: Wireframe, path) -> None:
    Path(path).write_text(dumps_wireframe(w), encoding="utf-8")


def encode_tensor(grid) -> bytes:
    arr = np.asarray(grid)
    if arr.ndim < 1 or arr.ndim > _MAX_NDIM:
        raise TensorFormatError(f"tensor rank {arr.ndim} not supported")
    if not np.all(np.isfinite(arr)):
        raise TensorFormatError("refusing to write non-finite values")
    header = MAGIC + struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def decode_tensor(raw: bytes) -> np.ndarray:
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise TensorFormatError("bad magic: not a WFT1 tensor file")
    (ndim,) = struct.unpack_from("<I", raw, 4)
    if ndim < 1 or ndim > _MAX_NDIM:
        raise TensorFormatError(f"unsupported rank {ndim}")
    head = 8 + 4 * ndim
    if len(raw) < head:
        raise TensorFormatError("truncated header")
    dims = struct.unpack_from(f"<{ndim}I", raw, 8)
    count = math.prod(dims)
    if count * 4 > len(raw) - head:
        raise TensorFormatError(
            f"truncated payload: dims {dims} need {count * 4} bytes, file has {len(raw) - head}"
        )
    if count * 4 != len(raw) - head:
        raise TensorFormatError(f"trailing bytes after payload for dims {dims}")
    return np.frombuffer(raw, dtype="<f4", count=count, offset=head).reshape(dims).astype(np.float32)


def write_tensor(grid, path) -> None:
    Path(path).write_bytes(encode_tensor(grid))


def read_tensor(path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def write_pr_csv(curves: Iterable[tuple[str, PRCurve]], path) -> None:
    """One row per curve point plus a ``# label AP=...`` summary line per curve."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label", "threshold", "precision", "recall"])
        for label, curve in curves:
            for t, p, r in curve.points:
                writer.writerow([label, _fmt(t), _fmt(p), _fmt(r)])
            fh.write(f"# {label} AP={_fmt(curve.ap)}\n")


def read_pr_csv(path) -> dict[str, dict]:
    """Parse a file written by :func:`write_pr_csv` back into rows and AP per label."""
    out: dict[str, dict] = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    for line in lines[1:]:
        if line.startswith("# "):
            label, ap = line[2:].rsplit(" AP=", 1)
            out.setdefault(label, {"rows": []})["ap"] = float(ap)
            continue
        label, t, p, r = next(csv.reader([line]))
        out.setdefault(label, {"rows": []})["rows"].append((float(t), float(p), float(r)))
    return out


def json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=None) + "\n"


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def list_image_ids(directory) -> list[str]:
    return sorted(p[:-5] for p in os.listdir(directory) if p.endswith(".json"))
