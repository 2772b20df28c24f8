"""Command-line entry point: ``mtd {run,segment,sample,eval,potential,synth}``.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 empty evaluation mask.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import BASES, DOMAINS, FIT_MODES, PipelineConfig, format_config
from .errors import InputError, MTDError
from .metrics import MetricReport, evaluate
from .pipeline import params_table, run_pipeline, stage
from .refine import geodesic_dp, potential
from .sampler import lidar_scan_sample, random_sample
from .segmentation import felzenszwalb, relabel_external
from .synthetic import piecewise_scene

log = logging.getLogger("mtdepth")


def _existing(path: str | None, what: str):
    if path is not None and not Path(path).is_file():
        raise InputError(f"{what} file not found: {path}")
    return path


def _load_config(args) -> PipelineConfig:
    cfg = io.read_config(_existing(args.config, "config")) if getattr(args, "config", None) else PipelineConfig()
    overrides = {}
    if getattr(args, "fit", None):
        overrides["fit_mode"] = args.fit
    if getattr(args, "domain", None):
        overrides["domain"] = args.domain
    if getattr(args, "basis", None):
        overrides["basis"] = args.basis
    return cfg.replace(**overrides) if overrides else cfg


def _write_report(report: MetricReport, csv_path: str | None) -> None:
    sys.stdout.write(report.to_text())
    if csv_path:
        Path(csv_path).write_text(MetricReport.csv_header() + "\n" + report.to_csv_row() + "\n")


def _set_threads(n: int | None) -> None:
    if n:
        import numba

        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def cmd_run(args) -> int:
    _set_threads(args.threads)
    cfg = _load_config(args)
    with stage("load"):
        rel = io.read_float_map(_existing(args.rel, "relative depth"))
        seeds = io.read_seeds(_existing(args.seeds, "seeds"))
        rgb = io.read_ppm(_existing(args.rgb, "RGB")) if args.rgb else None
        segments = None
        if args.segments:
            segments = relabel_external(io.read_label_map(_existing(args.segments, "segments")))
        gt = io.read_float_map(_existing(args.gt, "ground truth")) if args.gt else None
        try:
            seeds.check_bounds(*rel.shape)
        except InputError as exc:
            raise InputError(f"{args.seeds}: {exc}") from None
        if rgb is not None and rgb.shape != rel.shape:
            raise InputError(f"{args.rgb} is {rgb.shape[1]}x{rgb.shape[0]} but {args.rel} is {rel.width}x{rel.height}")
        if segments is not None and segments.shape != rel.shape:
            raise InputError(f"{args.segments} does not match the shape of {args.rel}")
        if rgb is None and segments is None:
            raise InputError("either --rgb or --segments is required")

    result = run_pipeline(
        rel,
        seeds,
        cfg,
        rgb=rgb,
        segments=segments,
        use_graph=not args.no_graph,
        use_refine=not args.no_refine,
        filter_transfer=args.dump_intermediate is not None,
    )
    io.write_float_map(args.out, result.depth)

    if args.dump_intermediate:
        d = io.ensure_dir(args.dump_intermediate)
        io.write_label_map(d / "segments.pgm", result.segments.labels)
        io.write_float_map(d / "transfer.pfm", result.calibration.transfer)
        if result.filtered_transfer is not None:
            io.write_float_map(d / "transfer_filtered.pfm", result.filtered_transfer)
        io.write_float_map(d / "coarse.pfm", result.coarse)
        if result.potential is not None:
            io.write_float_map(d / "potential.pfm", result.potential)
            io.write_float_map(d / "geodesic.pfm", result.geodesic.cost)
        (d / "params.csv").write_text(params_table(result))
        (d / "config.txt").write_text(format_config(cfg))

    if gt is not None:
        with stage("eval"):
            report = evaluate(result.depth, gt, args.min_depth, args.max_depth)
        _write_report(report, args.report_csv)
    return 0


def cmd_segment(args) -> int:
    cfg = _load_config(args)
    rgb = io.read_ppm(_existing(args.rgb, "RGB"))
    scale = args.scale if args.scale is not None else cfg.seg_scale
    min_size = args.min_size if args.min_size is not None else cfg.seg_min_size
    seg = felzenszwalb(rgb, scale, min_size)
    io.write_label_map(args.out, seg.labels)
    print(f"segments = {seg.n_segments}")
    return 0


def cmd_sample(args) -> int:
    gt = io.read_float_map(_existing(args.gt, "ground truth"))
    if args.mode == "random":
        seeds = random_sample(gt, args.fraction, args.noise_fraction, args.noise_sigma, args.rng_seed)
    else:
        seeds = lidar_scan_sample(gt, args.lines, args.rng_seed, args.jitter, args.col_step)
    io.write_seeds(args.out, seeds)
    print(f"seeds = {len(seeds)}")
    return 0


def cmd_eval(args) -> int:
    pred = io.read_float_map(_existing(args.pred, "prediction"))
    gt = io.read_float_map(_existing(args.gt, "ground truth"))
    _write_report(evaluate(pred, gt, args.min_depth, args.max_depth), args.report_csv)
    return 0


def cmd_potential(args) -> int:
    depth = io.read_float_map(_existing(args.depth, "depth"))
    phi = potential(depth)
    io.write_float_map(args.out, phi)
    if args.geodesic_out:
        if not args.seeds:
            raise InputError("--geodesic-out needs --seeds")
        seeds = io.read_seeds(_existing(args.seeds, "seeds"))
        seeds.check_bounds(*depth.shape)
        io.write_float_map(args.geodesic_out, geodesic_dp(phi, seeds).cost)
    return 0


def cmd_synth(args) -> int:
    scene = piecewise_scene(
        args.height,
        args.width,
        args.grid_rows,
        args.grid_cols,
        seeds_per_segment=args.seeds_per_segment,
        unseeded=args.unseeded,
        rng_seed=args.rng_seed,
    )
    d = io.ensure_dir(args.out_dir)
    io.write_ppm(d / "rgb.ppm", scene.rgb)
    io.write_float_map(d / "rel.pfm", scene.relative)
    io.write_float_map(d / "gt.pfm", scene.gt)
    io.write_seeds(d / "seeds.csv", scene.seeds)
    io.write_label_map(d / "segments.pgm", scene.labels)
    print(f"wrote {d}")
    return 0


def _add_eval_range(p):
    p.add_argument("--min-depth", type=float, default=0.0, help="exclude gt <= this (default 0)")
    p.add_argument("--max-depth", type=float, default=np.inf, help="exclude gt > this (default inf)")
    p.add_argument("--report-csv", metavar="PATH", help="also write the report as a CSV row")


def build_parser() -> argparse.ArgumentParser:
    defaults = PipelineConfig()
    cfg_help = "config file (key = value); defaults: " + ", ".join(
        f"{k}={v}" for k, v in vars(defaults).items()
    )
    parser = argparse.ArgumentParser(prog="mtd", description="Relative-to-metric depth from sparse seeds.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full pipeline")
    p.add_argument("--config", metavar="PATH", help=cfg_help)
    p.add_argument("--rgb", metavar="PATH", help="binary PPM colour image")
    p.add_argument("--rel", metavar="PATH", required=True, help="relative depth PFM")
    p.add_argument("--seeds", metavar="PATH", required=True, help="row,col,depth_m text file")
    p.add_argument("--out", metavar="PATH", required=True, help="output metric depth PFM")
    p.add_argument("--gt", metavar="PATH", help="ground-truth PFM; prints metrics")
    p.add_argument("--segments", metavar="PATH", help="external 16-bit PGM label map")
    p.add_argument("--no-refine", action="store_true", help="stop after the coarse stage")
    p.add_argument("--no-graph", action="store_true", help="unseeded segments use one global fit")
    p.add_argument("--fit", choices=FIT_MODES, help=f"fit mode (default {defaults.fit_mode})")
    p.add_argument("--domain", choices=DOMAINS, help=f"proxy domain (default {defaults.domain})")
    p.add_argument("--basis", choices=BASES, help=f"refinement basis (default {defaults.basis})")
    p.add_argument("--dump-intermediate", metavar="DIR", help="write every stage's output")
    p.add_argument("--threads", type=int, metavar="N", help="numba thread count (kernels are serial)")
    _add_eval_range(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("segment", help="Felzenszwalb superpixels")
    p.add_argument("--config", metavar="PATH", help=cfg_help)
    p.add_argument("--rgb", metavar="PATH", required=True)
    p.add_argument("--out", metavar="PATH", required=True, help="16-bit PGM label map")
    p.add_argument("--scale", type=float, help=f"merge scale (default {defaults.seg_scale})")
    p.add_argument("--min-size", type=int, help=f"minimum segment size (default {defaults.seg_min_size})")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("sample", help="draw seeds from dense ground truth")
    p.add_argument("--gt", metavar="PATH", required=True)
    p.add_argument("--out", metavar="PATH", required=True)
    p.add_argument("--mode", choices=("random", "lidar"), default="random")
    p.add_argument("--fraction", type=float, default=0.0005, help="random mode (default 0.0005)")
    p.add_argument("--noise-fraction", type=float, default=0.0, help="random mode (default 0)")
    p.add_argument("--noise-sigma", type=float, default=0.05, help="random mode (default 0.05)")
    p.add_argument("--lines", type=int, default=64, help="lidar mode (default 64)")
    p.add_argument("--jitter", type=int, default=1, help="lidar mode row jitter (default 1)")
    p.add_argument("--col-step", type=int, default=1, help="lidar mode column stride (default 1)")
    p.add_argument("--rng-seed", type=int, default=0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="depth metrics")
    p.add_argument("--pred", metavar="PATH", required=True)
    p.add_argument("--gt", metavar="PATH", required=True)
    _add_eval_range(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("potential", help="discontinuity potential (and geodesic cost)")
    p.add_argument("--depth", metavar="PATH", required=True)
    p.add_argument("--out", metavar="PATH", required=True)
    p.add_argument("--seeds", metavar="PATH")
    p.add_argument("--geodesic-out", metavar="PATH")
    p.set_defaults(func=cmd_potential)

    p = sub.add_parser("synth", help="write a synthetic piecewise scene")
    p.add_argument("--out-dir", metavar="DIR", required=True)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--grid-rows", type=int, default=2)
    p.add_argument("--grid-cols", type=int, default=3)
    p.add_argument("--seeds-per-segment", type=int, default=4)
    p.add_argument("--unseeded", type=int, nargs="*", default=[])
    p.add_argument("--rng-seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except MTDError as exc:
        where = getattr(exc, "stage", None)
        prefix = f"error [{where}]" if where else "error"
        print(f"{prefix}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
