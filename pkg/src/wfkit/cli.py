"""``wfkit`` command line entry point.

Exit codes: 0 success, 1 validation or usage error, 2 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io as wio
from .junction_codec import JunctionMaps, ScoredJunction, decode_topk, encode
from .loi_pool import LoiConfig, loi_pool_forward
from .metrics_heatmap import HeatmapEvalConfig, heatmap_image_counts, pr_from_counts
from .metrics_structural import (
    JUNCTION_THRESHOLDS,
    SAP_THRESHOLDS,
    junction_image_outcomes,
    pr_curve,
    rank_order,
    sap_image_outcomes,
)
from .model import CANONICAL_SIZE, Wireframe, from_scored_lines, rescale, to_scored_lines
from .postprocess import OverlapConfig, resolve_overlaps
from .sampler import SamplerConfig, sample_dynamic, sample_static, static_negatives
from .synth import DEGRADE_MODES, LAYOUTS, DegradeSpec, SceneSpec, degrade, gen_scene


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _pair(text: str) -> tuple[int, int]:
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated values, got {text!r}")
    return int(vals[0]), int(vals[1])


class Run:
    """Collects what a command read, how it was configured and what it measured."""

    def __init__(self, command: str):
        self.command = command
        self.inputs: list[str] = []
        self.config: dict = {}
        self.metrics: dict = {}
        self.start = time.perf_counter()

    def read(self, path) -> Path:
        self.inputs.append(str(path))
        return Path(path)

    def report(self) -> dict:
        return {
            "command": self.command,
            "inputs": [{"path": p, "sha256": wio.file_sha256(p)} for p in self.inputs if Path(p).is_file()],
            "config": self.config,
            "metrics": self.metrics,
            "wall_time": time.perf_counter() - self.start,
        }


def _write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def cmd_encode(args, run: Run) -> None:
    w = wio.read_wireframe(run.read(args.inp))
    maps = encode(w, args.bins)
    wio.write_tensor(np.concatenate([maps.J[None], maps.O], axis=0), args.out)
    run.config.update(bins=list(args.bins))
    run.metrics["occupied_bins"] = int(maps.J.sum())


def cmd_decode(args, run: Run) -> None:
    t = wio.read_tensor(run.read(args.inp)).astype(float)
    if t.ndim != 3 or t.shape[0] != 3:
        raise ValueError(f"expected a 3 x H x W junction map tensor (J, Ox, Oy), got shape {t.shape}")
    hb, wb = t.shape[1:]
    found = decode_topk(JunctionMaps(t[0], t[1:]), args.k)
    width, height = args.coord_space or (float(wb), float(hb))
    sx, sy = width / wb, height / hb
    w = Wireframe(
        junctions=tuple((j.p.x * sx, j.p.y * sy) for j in found), edges=(),
        width=width, height=height, junction_scores=tuple(j.score for j in found),
    )
    wio.write_wireframe(w, args.out)
    run.config.update(k=args.k)
    run.metrics["junctions"] = len(found)


def cmd_sample(args, run: Run) -> None:
    gt = wio.read_wireframe(run.read(args.gt))
    pred = wio.read_wireframe(run.read(args.pred))
    if (pred.width, pred.height) != (gt.width, gt.height):
        pred = rescale(pred, gt.width, gt.height)
    cfg = SamplerConfig(
        n_s_pos=args.n_s_pos, n_s_neg=args.n_s_neg, n_d_pos=args.n_d_pos, n_d_neg=args.n_d_neg,
        n_d_rand=args.n_d_rand, eta=args.eta, hard_pool_size=args.hard_pool_size,
        raster_size=args.raster_size,
    )
    pool = static_negatives(gt, cfg)
    junctions = [ScoredJunction(p, s) for p, s in zip(pred.junctions, pred.junction_score_array().tolist())]
    samples = sample_static(gt, cfg, args.seed) + sample_dynamic(junctions, gt, pool, cfg, args.seed + 1)
    _write_text(args.out, wio.json_dumps([s.to_json() for s in samples]))
    run.config.update(vars(cfg), seed=args.seed)
    for origin in ("S+", "S-", "D+", "D-", "D*"):
        run.metrics[f"count_{origin}"] = sum(s.origin == origin for s in samples)


def cmd_loipool(args, run: Run) -> None:
    fm = wio.read_tensor(run.read(args.fm)).astype(float)
    if fm.ndim == 2:
        fm = fm[None]
    coords = args.line
    if len(coords) != 4:
        raise ValueError("--line needs four comma-separated numbers x1,y1,x2,y2")
    cfg = LoiConfig(args.np, args.stride)
    feat = loi_pool_forward(fm, ((coords[0], coords[1]), (coords[2], coords[3])), cfg)
    text = wio.json_dumps([float(f"{v:.9g}") for v in feat.values.tolist()])
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    run.config.update(n_points=cfg.n_points, pool_stride=cfg.pool_stride, line=coords)


def _load_pairs(run: Run, gt_dir, pred_dir) -> tuple[list[str], dict, dict]:
    gt_ids = wio.list_image_ids(gt_dir)
    pred_ids = wio.list_image_ids(pred_dir)
    if gt_ids != pred_ids:
        missing = sorted(set(gt_ids) ^ set(pred_ids))
        raise ValueError(f"gt and pred directories disagree on image ids: {missing[:10]}")
    gts, preds = {}, {}
    for image_id in gt_ids:
        gts[image_id] = rescale(wio.read_wireframe(run.read(Path(gt_dir) / f"{image_id}.json")))
        preds[image_id] = rescale(wio.read_wireframe(run.read(Path(pred_dir) / f"{image_id}.json")))
    return gt_ids, gts, preds


def _sap_job(item):
    lines, scores, gt, thetas = item
    return [sap_image_outcomes((lines, scores), gt, t) for t in thetas]


def _jmap_job(item):
    pts, scores, gt, taus = item
    return [junction_image_outcomes((pts, scores), gt, t) for t in taus]


def _aph_job(item):
    lines, scores, gt, cfg, scale = item
    return heatmap_image_counts((lines, scores), gt, cfg, scale)


def parallel_map(fn, items: list, threads: int) -> list:
    """Map in input order; results never depend on the worker count."""
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))


def _pooled(per_image: list[tuple], k: int):
    scores = np.concatenate([r[k][0] for r in per_image]) if per_image else np.zeros(0)
    tps = np.concatenate([r[k][1] for r in per_image]) if per_image else np.zeros(0, dtype=bool)
    n_gt = sum(r[k][2] for r in per_image)
    order = rank_order(scores)
    return pr_curve(scores[order], tps[order], n_gt)


def _emit(run: Run, args, curves: list[tuple[str, object]]) -> None:
    for label, curve in curves:
        run.metrics[label] = curve.ap
        sys.stdout.write(f"{label} {curve.ap:.6g}\n")
    if args.pr_out:
        wio.write_pr_csv(curves, args.pr_out)


def eval_sap(ids, gts, preds, thetas, threads: int) -> list:
    items = [(preds[i].line_array(), preds[i].line_score_array(), gts[i].line_array(), thetas) for i in ids]
    per_image = parallel_map(_sap_job, items, threads)
    return [(f"sAP{t:g}", _pooled(per_image, k)) for k, t in enumerate(thetas)]


def eval_jmap(ids, gts, preds, taus, threads: int) -> list:
    items = [(preds[i].junction_array(), preds[i].junction_score_array(), gts[i].junction_array(), taus) for i in ids]
    per_image = parallel_map(_jmap_job, items, threads)
    return [(f"APJ{t:g}", _pooled(per_image, k)) for k, t in enumerate(taus)]


def eval_aph(ids, gts, preds, cfg: HeatmapEvalConfig, threads: int):
    scale = (cfg.resolution / CANONICAL_SIZE,) * 2
    items = [(preds[i].line_array(), preds[i].line_score_array(), gts[i].line_array(), cfg, scale) for i in ids]
    counts = parallel_map(_aph_job, items, threads)
    total = np.sum(counts, axis=0) if counts else np.zeros((len(cfg.thresholds), 3), dtype=np.int64)
    return pr_from_counts(total, cfg)


def cmd_eval(args, run: Run) -> None:
    ids, gts, preds = _load_pairs(run, args.gt, args.pred)
    run.config.update(metric=args.metric, threads=args.threads, images=len(ids))
    if args.metric == "sap":
        thetas = args.theta or list(SAP_THRESHOLDS)
        run.config["theta"] = thetas
        _emit(run, args, eval_sap(ids, gts, preds, thetas, args.threads))
    elif args.metric == "jmap":
        taus = args.tau or list(JUNCTION_THRESHOLDS)
        run.config["tau"] = taus
        curves = eval_jmap(ids, gts, preds, taus, args.threads)
        _emit(run, args, curves)
        mean = float(np.mean([c.ap for _, c in curves]))
        run.metrics["mAPJ"] = mean
        sys.stdout.write(f"mAPJ {mean:.6g}\n")
        if args.pr_out:
            with open(args.pr_out, "a", encoding="utf-8") as fh:
                fh.write(f"# mAPJ={mean:.6g}\n")
    else:
        cfg = HeatmapEvalConfig(resolution=args.resolution, tolerance=args.tolerance)
        run.config.update(resolution=cfg.resolution, tolerance=cfg.tol, n_thresholds=len(cfg.thresholds))
        result = eval_aph(ids, gts, preds, cfg, args.threads)
        _emit(run, args, [("APH", result.curve)])
        run.metrics["FH"] = result.f_h
        sys.stdout.write(f"FH {result.f_h:.6g}\n")
        if args.pr_out:
            with open(args.pr_out, "a", encoding="utf-8") as fh:
                fh.write(f"# FH={result.f_h:.6g}\n")


def cmd_postprocess(args, run: Run) -> None:
    w = wio.read_wireframe(run.read(args.inp))
    cfg = OverlapConfig(eta_s=args.eta_s, diagonal=w.diagonal)
    lines = resolve_overlaps(to_scored_lines(w), cfg)
    wio.write_wireframe(from_scored_lines(lines, w.width, w.height), args.out)
    run.config.update(eta_s=args.eta_s)
    run.metrics.update(lines_in=len(w.edges), lines_out=len(lines))


def cmd_synth(args, run: Run) -> None:
    spec = SceneSpec(
        seed=args.seed, n_junctions=args.n_junctions, n_lines=args.n_lines,
        min_length=args.min_length, layout=args.layout,
    )
    w = gen_scene(spec)
    wio.write_wireframe(w, args.out)
    run.config.update(vars(spec))
    run.metrics.update(junctions=len(w.junctions), lines=len(w.edges))


def cmd_degrade(args, run: Run) -> None:
    w = wio.read_wireframe(run.read(args.inp))
    out = degrade(w, DegradeSpec(args.mode, args.param), args.seed)
    wio.write_wireframe(out, args.out)
    run.config.update(mode=args.mode, param=args.param, seed=args.seed)
    run.metrics.update(lines=len(out.edges))


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json-report", metavar="PATH", help="write a JSON run report")

    parser = _Parser(prog="wfkit", description="Wireframe parsing geometry and evaluation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", parents=[common], help="junctions -> J/O map tensor")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bins", type=_pair, default=(128, 128), help="H_b,W_b")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", parents=[common], help="J/O map tensor -> top-K junctions")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=300)
    p.add_argument("--coord-space", type=_floats, default=None, help="W,H of the output coordinates")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("sample", parents=[common], help="static + dynamic line samples")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    defaults = SamplerConfig()
    for name in ("n_s_pos", "n_s_neg", "n_d_pos", "n_d_neg", "n_d_rand", "hard_pool_size", "raster_size"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=int, default=getattr(defaults, name))
    p.add_argument("--eta", type=float, default=defaults.eta)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("loipool", parents=[common], help="pool one line from a feature map")
    p.add_argument("--fm", required=True)
    p.add_argument("--line", type=_floats, required=True, help="x1,y1,x2,y2")
    p.add_argument("--np", type=int, default=32)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_loipool)

    p = sub.add_parser("eval", help="dataset-level metrics over gt/pred directories")
    esub = p.add_subparsers(dest="metric", required=True, parser_class=_Parser)
    for metric in ("sap", "jmap", "aph"):
        e = esub.add_parser(metric, parents=[common])
        e.add_argument("--gt", required=True)
        e.add_argument("--pred", required=True)
        e.add_argument("--pr-out")
        e.add_argument("--threads", type=int, default=1)
        if metric == "sap":
            e.add_argument("--theta", type=_floats)
        elif metric == "jmap":
            e.add_argument("--tau", type=_floats)
        else:
            e.add_argument("--resolution", type=int, default=128)
            e.add_argument("--tolerance", type=float, default=None)
        e.set_defaults(func=cmd_eval)

    p = sub.add_parser("postprocess", parents=[common], help="remove overlapped lines")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--eta-s", type=float, default=0.01)
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic scene")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--layout", choices=LAYOUTS, default="grid")
    p.add_argument("--n-junctions", type=int, default=16)
    p.add_argument("--n-lines", type=int, default=24)
    p.add_argument("--min-length", type=float, default=16.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("degrade", parents=[common], help="apply a controlled degradation")
    p.add_argument("--mode", choices=DEGRADE_MODES, required=True)
    p.add_argument("--param", type=float, default=0.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_degrade)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    command = args.command if args.command != "eval" else f"eval {args.metric}"
    run = Run(command)
    try:
        args.func(args, run)
        if args.json_report:
            _write_text(args.json_report, json.dumps(run.report(), sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        print(f"wfkit: I/O error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"wfkit: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
