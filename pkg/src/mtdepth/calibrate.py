"""Per-segment calibration of relative depth against sparse metric seeds.

Each segment gets an affine map g(x) = max(a*x + b, d_min) from relative depth
to a proxy value. In the default inverse domain the proxy is
kappa / (z + epsilon); in the depth domain it is z itself.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .config import PipelineConfig
from .errors import InputError
from .grid import RgbImage, ScalarGrid, SeedSet
from .segmentation import SegmentMap

log = logging.getLogger(__name__)


@dataclass
class CalibParams:
    a: float
    b: float
    anchored: bool = False

    def __call__(self, d, d_min: float):
        return np.maximum(self.a * np.asarray(d) + self.b, d_min)


@dataclass
class CalibrationResult:
    transfer: ScalarGrid  # proxy per pixel, invalid outside anchored segments
    params: list  # CalibParams per segment; unanchored entries are placeholders
    dropped_seeds: int = 0
    seeds_per_segment: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def anchored(self) -> np.ndarray:
        return np.array([p.anchored for p in self.params], dtype=bool)


def depth_to_proxy(z, kappa: float = 1.0, epsilon: float = 0.0):
    z = np.asarray(z, dtype=np.float64)
    if np.any(~(z > 0)):
        raise InputError("depth must be positive")
    out = kappa / (z + epsilon)
    return out if out.ndim else float(out)


def proxy_to_depth(xi, kappa: float = 1.0, epsilon: float = 0.0):
    xi = np.asarray(xi, dtype=np.float64)
    if np.any(~(xi > 0)):
        raise InputError("proxy must be positive")
    out = np.maximum(kappa / xi - epsilon, 0.0)
    return out if out.ndim else float(out)


def to_proxy(z, cfg: PipelineConfig):
    if cfg.domain == "depth":
        z = np.asarray(z, dtype=np.float64)
        if np.any(~(z > 0)):
            raise InputError("depth must be positive")
        return z
    return depth_to_proxy(z, cfg.kappa, cfg.epsilon)


def from_proxy(xi, cfg: PipelineConfig):
    if cfg.domain == "depth":
        return np.asarray(xi, dtype=np.float64)
    return proxy_to_depth(xi, cfg.kappa, cfg.epsilon)


def _mean_scaling(d, xi) -> CalibParams:
    return CalibParams(float(np.mean(xi) / np.mean(d)), 0.0, True)


def fit_segment(d_samples, xi_samples, mode: str = "least_squares") -> CalibParams:
    """Fit (a, b) so that a*d + b matches the proxies under ``mode``.

    A single sample or constant ``d`` makes every mode fall back to mean
    scaling (a = mean(xi) / mean(d), b = 0). Quantile matching with a zero
    interquartile range in ``d`` does the same.
    """
    d = np.asarray(d_samples, dtype=np.float64).ravel()
    xi = np.asarray(xi_samples, dtype=np.float64).ravel()
    if d.size == 0:
        raise InputError("cannot fit a segment without samples")
    if d.size != xi.size:
        raise InputError("d and xi sample counts differ")
    if np.any(~(xi > 0)):
        raise InputError("proxy samples must be positive")
    if not np.all(np.isfinite(d)):
        raise InputError("relative depth samples must be finite")

    if mode == "median":
        return CalibParams(float(np.median(xi) / np.median(d)), 0.0, True)
    if mode == "mean" or d.size == 1 or np.ptp(d) == 0.0:
        return _mean_scaling(d, xi)

    if mode == "least_squares":
        md, mx = d.mean(), xi.mean()
        dc = d - md
        a = float(np.dot(dc, xi - mx) / np.dot(dc, dc))
        return CalibParams(a, float(mx - a * md), True)
    if mode == "moment":
        a = float(np.std(xi) / np.std(d))
        return CalibParams(a, float(xi.mean() - a * d.mean()), True)
    if mode == "quantile":
        qd = np.quantile(d, [0.25, 0.5, 0.75])
        qx = np.quantile(xi, [0.25, 0.5, 0.75])
        iqr_d = qd[2] - qd[0]
        if iqr_d == 0.0:
            return _mean_scaling(d, xi)
        a = float((qx[2] - qx[0]) / iqr_d)
        return CalibParams(a, float(qx[1] - a * qd[1]), True)
    raise InputError(f"unknown fit mode {mode!r}")


def seed_segments(seeds: SeedSet, d: ScalarGrid, seg: SegmentMap):
    """Return (segment id, keep mask) for each seed; seeds on invalid d are dropped."""
    seeds.check_bounds(*d.shape)
    keep = d.valid[seeds.rows, seeds.cols]
    return seg.labels[seeds.rows, seeds.cols], keep


def calibrate_anchored(d: ScalarGrid, seeds: SeedSet, seg: SegmentMap, cfg: PipelineConfig) -> CalibrationResult:
    if d.shape != seg.shape:
        raise InputError(f"relative depth {d.shape} and segments {seg.shape} differ in shape")
    ids, keep = seed_segments(seeds, d, seg)
    dropped = int((~keep).sum())
    if dropped:
        log.warning("dropped %d seeds on invalid relative depth", dropped)
    ids = ids[keep]
    d_at = d.values[seeds.rows[keep], seeds.cols[keep]]
    xi_at = to_proxy(seeds.values[keep], cfg)

    n = seg.n_segments
    counts = np.bincount(ids, minlength=n)
    params = [CalibParams(0.0, 0.0, False) for _ in range(n)]
    order = np.argsort(ids, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)])
    for i in np.flatnonzero(counts):
        sel = order[starts[i] : starts[i + 1]]
        params[i] = fit_segment(d_at[sel], xi_at[sel], cfg.fit_mode)

    a = np.array([p.a for p in params])
    b = np.array([p.b for p in params])
    anchored = counts > 0
    lab = seg.labels
    vals = np.maximum(a[lab] * d.values + b[lab], cfg.d_min)
    valid = anchored[lab] & d.valid
    return CalibrationResult(ScalarGrid(np.where(valid, vals, 0.0), valid), params, dropped, counts)


@numba.njit(cache=True)
def _bilateral_pass(t, ok, lum, radius, sigma_s, sigma_r):
    h, w = t.shape
    out = np.zeros_like(t)
    out_ok = np.zeros_like(ok)
    inv_s = 1.0 / (2.0 * sigma_s * sigma_s)
    inv_r = 1.0 / (2.0 * sigma_r * sigma_r)
    for r in range(h):
        for c in range(w):
            # shift by the window minimum so exp(-t) cannot underflow to zero
            tmin = np.inf
            for rr in range(max(0, r - radius), min(h, r + radius + 1)):
                for cc in range(max(0, c - radius), min(w, c + radius + 1)):
                    if ok[rr, cc] and t[rr, cc] < tmin:
                        tmin = t[rr, cc]
            if tmin == np.inf:
                continue
            num = 0.0
            den = 0.0
            for rr in range(max(0, r - radius), min(h, r + radius + 1)):
                for cc in range(max(0, c - radius), min(w, c + radius + 1)):
                    if ok[rr, cc]:
                        dr = rr - r
                        dc = cc - c
                        di = lum[rr, cc] - lum[r, c]
                        k = math.exp(-(dr * dr + dc * dc) * inv_s - di * di * inv_r)
                        num += k * math.exp(-(t[rr, cc] - tmin))
                        den += k
            v = tmin - math.log(num / den)
            # soft-min stays within the window range; clamp rounding drift
            out[r, c] = v if v >= tmin else tmin
            out_ok[r, c] = True
    return out, out_ok


def bilateral_suppress(t: ScalarGrid, img: RgbImage, cfg: PipelineConfig) -> ScalarGrid:
    """Iterated bilateral soft-min: T <- -log(sum k exp(-T) / sum k) over defined neighbors.

    Undefined pixels with at least one defined neighbor in the window acquire
    a value; others stay undefined.
    """
    if t.shape != img.shape:
        raise InputError("transfer map and image differ in shape")
    if not t.valid.any():
        raise InputError("transfer map has no defined pixels")
    radius = int(math.ceil(2.0 * cfg.sigma_spatial))
    lum = img.luminance()
    vals, ok = t.values, t.valid
    for _ in range(cfg.bilateral_iters):
        vals, ok = _bilateral_pass(vals, ok, lum, radius, cfg.sigma_spatial, cfg.sigma_range)
    return ScalarGrid(vals, ok)
