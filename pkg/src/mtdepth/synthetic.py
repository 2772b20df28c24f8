"""Synthetic scenes with known metric depth for end-to-end checks and benchmarks.

The scene is a grid of rectangular segments. Inside each segment the proxy
kappa / (z + epsilon) is affine in pixel coordinates, and the relative depth is
an affine distortion of that proxy with its own (scale, shift), so a per-segment
affine calibration recovers the ground truth exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibrate import proxy_to_depth
from .grid import RgbImage, ScalarGrid, SeedSet


@dataclass
class SyntheticScene:
    rgb: RgbImage
    relative: ScalarGrid
    gt: ScalarGrid
    labels: np.ndarray
    seeds: SeedSet
    proxy_planes: np.ndarray  # (n, 3): xi = c0 + cu * col + cv * row
    distortions: np.ndarray  # (n, 2): xi = a * d + b
    unseeded: tuple

    @property
    def n_segments(self) -> int:
        return len(self.distortions)


def rectangle_labels(height: int, width: int, grid_rows: int, grid_cols: int) -> np.ndarray:
    rb = np.minimum(np.arange(height) * grid_rows // height, grid_rows - 1)
    cb = np.minimum(np.arange(width) * grid_cols // width, grid_cols - 1)
    return rb[:, None] * grid_cols + cb[None, :]


def piecewise_scene(
    height: int = 128,
    width: int = 128,
    grid_rows: int = 2,
    grid_cols: int = 3,
    seeds_per_segment: int = 4,
    unseeded=(),
    kappa: float = 1.0,
    epsilon: float = 1e-6,
    proxy_range=(0.12, 0.45),
    scale_jitter: float = 0.10,
    shift_jitter: float = 0.02,
    rng_seed: int = 0,
) -> SyntheticScene:
    """Build a piecewise scene; ``unseeded`` lists segment ids that receive no seeds.

    Each segment's proxy plane has a base value drawn from ``proxy_range`` and
    a tilt of at most 0.15 of that base across the image. Relative depth is
    roughly twice the proxy: each segment's calibration slope is 0.5 perturbed
    by +-``scale_jitter`` (relative) and its shift is drawn from
    +-``shift_jitter`` proxy units.
    """
    rng = np.random.default_rng(rng_seed)
    labels = rectangle_labels(height, width, grid_rows, grid_cols)
    n = grid_rows * grid_cols
    rows, cols = np.indices((height, width), dtype=np.float64)

    base = rng.uniform(*proxy_range, size=n)
    tilt = rng.uniform(-0.15, 0.15, size=(n, 2)) * base[:, None]
    planes = np.column_stack([base, tilt[:, 0] / width, tilt[:, 1] / height])
    # centre each plane on its segment so the base value is the segment mean
    cen_r = np.array([rows[labels == i].mean() for i in range(n)])
    cen_c = np.array([cols[labels == i].mean() for i in range(n)])
    planes[:, 0] = base - planes[:, 1] * cen_c - planes[:, 2] * cen_r
    xi = planes[labels, 0] + planes[labels, 1] * cols + planes[labels, 2] * rows
    z = proxy_to_depth(xi, kappa, epsilon)

    scale = 0.5 * (1.0 + rng.uniform(-scale_jitter, scale_jitter, size=n))
    shift = rng.uniform(-shift_jitter, shift_jitter, size=n)
    distort = np.column_stack([scale, shift])
    d = (xi - shift[labels]) / scale[labels]

    palette = rng.uniform(0.1, 0.9, size=(n, 3))
    rgb = RgbImage(palette[labels])

    unseeded = tuple(sorted(set(int(u) for u in unseeded)))
    sr, sc, sv = [], [], []
    for i in range(n):
        if i in unseeded:
            continue
        idx = np.flatnonzero(labels.ravel() == i)
        pick = np.sort(rng.choice(idx, size=seeds_per_segment, replace=False))
        r, c = np.divmod(pick, width)
        sr.append(r)
        sc.append(c)
        sv.append(z[r, c])
    seeds = SeedSet(np.concatenate(sr), np.concatenate(sc), np.concatenate(sv)) if sr else SeedSet()

    return SyntheticScene(
        rgb=rgb,
        relative=ScalarGrid(d),
        gt=ScalarGrid(z),
        labels=labels,
        seeds=seeds,
        proxy_planes=planes,
        distortions=distort,
        unseeded=unseeded,
    )
