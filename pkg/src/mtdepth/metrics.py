"""Standard dense-depth error metrics."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMaskError, InputError
from .grid import ScalarGrid

# smallest depth used for log metrics when min_depth itself is zero
_LOG_FLOOR = 1e-6


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    mae: float
    absrel: float
    sqrel: float
    delta1: float
    delta2: float
    delta3: float
    silog: float
    valid_count: int
    clamped_count: int = 0

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_text(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.as_dict().items())

    @staticmethod
    def csv_header() -> str:
        return ",".join(f.name for f in dataclasses.fields(MetricReport))

    def to_csv_row(self) -> str:
        return ",".join(_fmt(v) for v in self.as_dict().values())


def _fmt(v) -> str:
    return str(v) if isinstance(v, (int, np.integer)) else repr(float(v))


def evaluate(pred: ScalarGrid, gt: ScalarGrid, min_depth: float = 0.0, max_depth: float = np.inf) -> MetricReport:
    """Evaluate where both maps are valid and min_depth < gt <= max_depth.

    Non-positive predictions count as delta failures and are clamped to
    ``min_depth`` (or a tiny floor) for the log metric.
    """
    if pred.shape != gt.shape:
        raise InputError(f"prediction {pred.shape} and ground truth {gt.shape} differ in shape")
    mask = pred.valid & gt.valid & (gt.values > min_depth) & (gt.values <= max_depth)
    n = int(mask.sum())
    if n == 0:
        raise EmptyMaskError("evaluation mask is empty")
    p = pred.values[mask]
    g = gt.values[mask]

    err = p - g
    rmse = float(np.sqrt(np.mean(err ** 2)))
    mae = float(np.mean(np.abs(err)))
    absrel = float(np.mean(np.abs(err) / g))
    sqrel = float(np.mean(err ** 2 / g))

    positive = p > 0
    ratio = np.full(n, np.inf)
    ratio[positive] = np.maximum(p[positive] / g[positive], g[positive] / p[positive])
    d1, d2, d3 = (float(np.mean(ratio < 1.25 ** i)) for i in (1, 2, 3))

    floor = min_depth if min_depth > 0 else _LOG_FLOOR
    clamped = int(np.sum(p < floor))
    # centred form of sqrt(mean(e^2) - mean(e)^2); avoids cancellation
    e = np.log(np.maximum(p, floor) / g)
    silog = float(np.sqrt(np.mean((e - e.mean()) ** 2)))
    return MetricReport(rmse, mae, absrel, sqrel, d1, d2, d3, silog, n, clamped)
