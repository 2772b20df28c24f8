"""Sparse seed generation from dense ground truth for synthetic benchmarks."""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .grid import ScalarGrid, SeedSet


def random_sample(
    gt: ScalarGrid,
    fraction: float,
    noise_fraction: float = 0.0,
    noise_sigma: float = 0.05,
    rng_seed: int = 0,
    return_noise_mask: bool = False,
):
    """Uniformly sample round(fraction * n_valid) valid pixels without replacement.

    A ``noise_fraction`` share of the samples is multiplied by 1 + N(0, noise_sigma);
    factors are floored at 0.05 so depths stay positive.
    """
    if not 0 < fraction <= 1:
        raise InputError("fraction must lie in (0, 1]")
    if not 0 <= noise_fraction <= 1:
        raise InputError("noise_fraction must lie in [0, 1]")
    valid_idx = np.flatnonzero(gt.valid.ravel() & (gt.values.ravel() > 0))
    if valid_idx.size == 0:
        raise InputError("ground truth has no valid pixels")
    n = int(round(fraction * valid_idx.size))
    if n < 1:
        raise InputError(
            f"fraction {fraction} selects no points out of {valid_idx.size} valid pixels"
        )
    rng = np.random.default_rng(rng_seed)
    picked = np.sort(rng.choice(valid_idx, size=n, replace=False))
    values = gt.values.ravel()[picked].copy()

    noisy = np.zeros(n, dtype=bool)
    n_noisy = int(round(noise_fraction * n))
    if n_noisy:
        noisy[rng.choice(n, size=n_noisy, replace=False)] = True
        factor = np.maximum(1.0 + rng.normal(0.0, noise_sigma, size=n_noisy), 0.05)
        values[noisy] *= factor
    rows, cols = np.divmod(picked, gt.width)
    seeds = SeedSet(rows, cols, values)
    return (seeds, noisy) if return_noise_mask else seeds


def scanline_rows(height: int, lines: int) -> np.ndarray:
    return np.floor(height * (np.arange(lines) + 0.5) / lines).astype(np.int64)


def lidar_scan_sample(
    gt: ScalarGrid,
    lines: int,
    rng_seed: int = 0,
    jitter: int = 1,
    col_step: int = 1,
) -> SeedSet:
    """Seeds along evenly spaced horizontal scanlines with per-column vertical jitter.

    Line i sits on row floor(H * (i + 0.5) / lines); each sampled column is
    shifted by an integer drawn uniformly from [-jitter, jitter]. Samples on
    invalid pixels are discarded, as are repeats of an already-sampled pixel.
    """
    if lines < 1:
        raise InputError("lines must be >= 1")
    if jitter < 0 or col_step < 1:
        raise InputError("jitter must be >= 0 and col_step >= 1")
    h, w = gt.shape
    rng = np.random.default_rng(rng_seed)
    base = scanline_rows(h, lines)
    cols = np.arange(0, w, col_step)
    rr = base[:, None] + rng.integers(-jitter, jitter + 1, size=(lines, len(cols)))
    rr = np.clip(rr, 0, h - 1).ravel()
    cc = np.broadcast_to(cols, (lines, len(cols))).ravel()
    flat = rr * w + cc
    _, first = np.unique(flat, return_index=True)
    flat = flat[np.sort(first)]
    flat = flat[gt.valid.ravel()[flat] & (gt.values.ravel()[flat] > 0)]
    flat = np.sort(flat)
    rows, cols_ = np.divmod(flat, w)
    return SeedSet(rows, cols_, gt.values.ravel()[flat])
