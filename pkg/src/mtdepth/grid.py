"""Dense and sparse raster types shared by every pipeline stage."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import InputError


@dataclass
class ScalarGrid:
    """H x W real-valued raster with a per-pixel validity mask.

    Values at invalid pixels carry no meaning; constructors zero them so that
    serialization stays stable.
    """

    values: np.ndarray
    valid: np.ndarray = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise InputError(f"grid must be a non-empty 2D array, got shape {values.shape}")
        if self.valid is None:
            valid = np.isfinite(values)
        else:
            valid = np.array(self.valid, dtype=bool, copy=True)
            if valid.shape != values.shape:
                raise InputError("valid mask shape does not match values")
            if not np.all(np.isfinite(values[valid])):
                raise InputError("grid has non-finite values at valid pixels")
        values[~valid] = 0.0
        self.values = values
        self.valid = valid

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def masked(self, fill=np.nan) -> np.ndarray:
        out = self.values.copy()
        out[~self.valid] = fill
        return out

    def same_as(self, other: "ScalarGrid") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.valid, other.valid)
            and np.array_equal(self.values, other.values)
        )


@dataclass
class RgbImage:
    """H x W x 3 color image with intensities in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != 3 or data.shape[0] < 1 or data.shape[1] < 1:
            raise InputError(f"RGB image must have shape (H, W, 3), got {data.shape}")
        if not np.all(np.isfinite(data)) or data.min() < 0.0 or data.max() > 1.0:
            raise InputError("RGB intensities must lie in [0, 1]")
        self.data = data

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    def luminance(self) -> np.ndarray:
        return self.data @ np.array([0.299, 0.587, 0.114])


@dataclass
class SeedSet:
    """Sparse metric depth samples already projected to pixel coordinates."""

    rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    cols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    values: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.float64))

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64).reshape(-1)
        self.cols = np.asarray(self.cols, dtype=np.int64).reshape(-1)
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        n = len(self.rows)
        if len(self.cols) != n or len(self.values) != n:
            raise InputError("seed rows, cols and values must have equal length")
        if n and (np.any(self.rows < 0) or np.any(self.cols < 0)):
            raise InputError("seed coordinates must be non-negative")
        if n and not np.all(np.isfinite(self.values) & (self.values > 0)):
            raise InputError("seed depths must be positive and finite")
        if n:
            keys = np.stack([self.rows, self.cols], axis=1)
            if len(np.unique(keys, axis=0)) != n:
                raise InputError("duplicate seed coordinates")

    @classmethod
    def from_triples(cls, triples) -> "SeedSet":
        triples = list(triples)
        if not triples:
            return cls()
        r, c, v = zip(*triples)
        return cls(np.array(r), np.array(c), np.array(v, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[tuple[int, int, float]]:
        for r, c, v in zip(self.rows, self.cols, self.values):
            yield int(r), int(c), float(v)

    def check_bounds(self, height: int, width: int) -> None:
        bad = (self.rows >= height) | (self.cols >= width)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise InputError(
                f"seed ({self.rows[i]}, {self.cols[i]}) outside {height}x{width} grid"
            )

    def mask(self, height: int, width: int) -> np.ndarray:
        self.check_bounds(height, width)
        m = np.zeros((height, width), dtype=bool)
        m[self.rows, self.cols] = True
        return m

    def subset(self, keep: np.ndarray) -> "SeedSet":
        return SeedSet(self.rows[keep], self.cols[keep], self.values[keep])


def second_differences(g: ScalarGrid) -> tuple[ScalarGrid, ScalarGrid]:
    """Central second differences along columns (z_uu) and rows (z_vv).

    Border pixels copy the second difference of their nearest interior pixel,
    so affine grids give zero everywhere. A difference whose stencil touches an
    invalid pixel is marked invalid.
    """
    h, w = g.shape
    if h < 3 or w < 3:
        raise InputError(f"second differences need a grid of at least 3x3, got {h}x{w}")
    z, ok = g.values, g.valid

    zuu = np.empty_like(z)
    zuu[:, 1:-1] = z[:, :-2] - 2.0 * z[:, 1:-1] + z[:, 2:]
    ok_uu = np.zeros_like(ok)
    ok_uu[:, 1:-1] = ok[:, :-2] & ok[:, 1:-1] & ok[:, 2:]
    zuu[:, 0], zuu[:, -1] = zuu[:, 1], zuu[:, -2]
    ok_uu[:, 0], ok_uu[:, -1] = ok_uu[:, 1], ok_uu[:, -2]

    zvv = np.empty_like(z)
    zvv[1:-1, :] = z[:-2, :] - 2.0 * z[1:-1, :] + z[2:, :]
    ok_vv = np.zeros_like(ok)
    ok_vv[1:-1, :] = ok[:-2, :] & ok[1:-1, :] & ok[2:, :]
    zvv[0, :], zvv[-1, :] = zvv[1, :], zvv[-2, :]
    ok_vv[0, :], ok_vv[-1, :] = ok_vv[1, :], ok_vv[-2, :]

    return ScalarGrid(zuu, ok_uu), ScalarGrid(zvv, ok_vv)
