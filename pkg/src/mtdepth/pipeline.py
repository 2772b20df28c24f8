"""Coarse-to-fine conversion of relative depth to metric depth."""

from __future__ import annotations

import contextlib
import logging
import time
from dataclasses import dataclass, field

from . import calibrate, graphopt, refine
from .calibrate import CalibParams, CalibrationResult
from .config import PipelineConfig
from .errors import InputError, MTDError
from .grid import RgbImage, ScalarGrid, SeedSet
from .segmentation import SegmentMap, felzenszwalb

log = logging.getLogger(__name__)


@dataclass
class PipelineResult:
    depth: ScalarGrid
    coarse: ScalarGrid
    segments: SegmentMap
    calibration: CalibrationResult
    params: list
    filtered_transfer: ScalarGrid | None = None
    graph: graphopt.SegmentGraph | None = None
    propagation: graphopt.PropagationResult | None = None
    potential: ScalarGrid | None = None
    geodesic: refine.GeodesicField | None = None
    timings: dict = field(default_factory=dict)


@contextlib.contextmanager
def stage(name: str, timings: dict | None = None):
    t0 = time.perf_counter()
    try:
        yield
    except MTDError as exc:
        if getattr(exc, "stage", None) is None:
            exc.stage = name
        raise
    finally:
        if timings is not None:
            timings[name] = time.perf_counter() - t0


def _global_fit(d: ScalarGrid, seeds: SeedSet, cfg: PipelineConfig) -> CalibParams:
    keep = d.valid[seeds.rows, seeds.cols]
    d_at = d.values[seeds.rows[keep], seeds.cols[keep]]
    p = calibrate.fit_segment(d_at, calibrate.to_proxy(seeds.values[keep], cfg), cfg.fit_mode)
    return CalibParams(p.a, p.b, False)


def run_pipeline(
    relative: ScalarGrid,
    seeds: SeedSet,
    cfg: PipelineConfig | None = None,
    rgb: RgbImage | None = None,
    segments: SegmentMap | None = None,
    use_graph: bool = True,
    use_refine: bool = True,
    filter_transfer: bool = False,
) -> PipelineResult:
    """Run segmentation, calibration, graph propagation and refinement.

    Either ``rgb`` or ``segments`` must be given. The bilateral transfer-map
    filter only produces an inspection product, so it runs when
    ``filter_transfer`` is set and an image is available.
    """
    cfg = cfg or PipelineConfig()
    t = {}
    with stage("input", t):
        if rgb is not None and rgb.shape != relative.shape:
            raise InputError(f"RGB image {rgb.shape} and relative depth {relative.shape} differ in shape")
        seeds.check_bounds(*relative.shape)
        if len(seeds) == 0:
            raise InputError("no seeds supplied")

    with stage("segment", t):
        if segments is None:
            if rgb is None:
                raise InputError("need an RGB image or an external segment map")
            segments = felzenszwalb(rgb, cfg.seg_scale, cfg.seg_min_size)
        elif segments.shape != relative.shape:
            raise InputError(f"segment map {segments.shape} and relative depth {relative.shape} differ in shape")

    with stage("calibrate", t):
        calib = calibrate.calibrate_anchored(relative, seeds, segments, cfg)
        if not calib.anchored.any():
            raise InputError("no seed lands on valid relative depth")

    filtered = None
    if filter_transfer and rgb is not None and cfg.bilateral_iters > 0:
        with stage("bilateral", t):
            filtered = calibrate.bilateral_suppress(calib.transfer, rgb, cfg)

    graph = prop = None
    with stage("graph", t):
        if use_graph:
            points = None
            if cfg.centroid_space == "3d":
                glob = _global_fit(relative, seeds, cfg)
                prelim = graphopt.lift_to_pixels(segments, [glob] * segments.n_segments, relative, cfg)
                points = graphopt.segment_points_3d(segments, prelim)
            graph = graphopt.build_graph(segments, calib.params, cfg.knn, points)
            prop = graphopt.propagate(graph)
            params = prop.params
            if cfg.anchor_mode == "keep":
                params = [fit if fit.anchored else sol for fit, sol in zip(calib.params, params)]
        else:
            glob = _global_fit(relative, seeds, cfg)
            params = [p if p.anchored else glob for p in calib.params]

    with stage("lift", t):
        coarse = graphopt.lift_to_pixels(segments, params, relative, cfg)

    phi = geo = None
    depth = coarse
    if use_refine:
        with stage("potential", t):
            phi = refine.potential(coarse)
        with stage("geodesic", t):
            geo = refine.geodesic_dp(phi, seeds, sweeps=cfg.dp_sweeps)
        with stage("refine", t):
            depth = refine.refine_depth(coarse, seeds, geo, cfg)

    return PipelineResult(
        depth=depth,
        coarse=coarse,
        segments=segments,
        calibration=calib,
        params=params,
        filtered_transfer=filtered,
        graph=graph,
        propagation=prop,
        potential=phi,
        geodesic=geo,
        timings=t,
    )


def params_table(result: PipelineResult) -> str:
    lines = ["segment,a,b,anchored,seeds"]
    counts = result.calibration.seeds_per_segment
    for i, p in enumerate(result.params):
        lines.append(f"{i},{p.a!r},{p.b!r},{int(p.anchored)},{int(counts[i])}")
    return "\n".join(lines) + "\n"
