from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import InputError

FIT_MODES = ("least_squares", "median", "mean", "moment", "quantile")
BASES = ("polynomial", "bspline")
DOMAINS = ("inverse", "depth")
CENTROID_SPACES = ("2d", "3d")
ANCHOR_MODES = ("keep", "soft")


@dataclass(frozen=True)
class PipelineConfig:
    kappa: float = 1.0
    epsilon: float = 1e-6
    d_min: float = 1e-6
    seg_scale: float = 300.0
    seg_min_size: int = 20
    knn: int = 8
    sigma_spatial: float = 3.0
    sigma_range: float = 0.1
    bilateral_iters: int = 2
    fit_mode: str = "least_squares"
    basis: str = "polynomial"
    dp_order: int = 3
    dp_sweeps: int = 4
    # proxy domain: inverse -> kappa / (z + epsilon), depth -> z itself
    domain: str = "inverse"
    centroid_space: str = "2d"
    # keep: anchored segments are lifted with their own fit; soft: with the graph solution
    anchor_mode: str = "keep"

    def __post_init__(self):
        checks = [
            (self.kappa > 0, "kappa must be > 0"),
            (self.epsilon >= 0, "epsilon must be >= 0"),
            (self.d_min > 0, "d_min must be > 0"),
            (self.seg_scale > 0, "seg_scale must be > 0"),
            (self.seg_min_size >= 1, "seg_min_size must be >= 1"),
            (self.knn >= 1, "knn must be >= 1"),
            (self.sigma_spatial > 0, "sigma_spatial must be > 0"),
            (self.sigma_range > 0, "sigma_range must be > 0"),
            (self.bilateral_iters >= 0, "bilateral_iters must be >= 0"),
            (self.fit_mode in FIT_MODES, f"fit_mode must be one of {FIT_MODES}"),
            (self.basis in BASES, f"basis must be one of {BASES}"),
            (self.dp_order >= 1, "dp_order must be >= 1"),
            (self.dp_sweeps >= 1, "dp_sweeps must be >= 1"),
            (self.domain in DOMAINS, f"domain must be one of {DOMAINS}"),
            (self.centroid_space in CENTROID_SPACES, f"centroid_space must be one of {CENTROID_SPACES}"),
            (self.anchor_mode in ANCHOR_MODES, f"anchor_mode must be one of {ANCHOR_MODES}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise InputError(msg)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


def _coerce(name: str, raw: str, kind):
    if kind in ("int", int):
        return int(raw)
    if kind in ("float", float):
        return float(raw)
    return raw.strip().strip('"').strip("'")


def parse_config(text: str, source: str = "<config>") -> PipelineConfig:
    """Parse flat ``key = value`` text. Absent keys keep their defaults."""
    from .errors import ParseError

    kinds = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", lineno, source)
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in kinds:
            raise ParseError(f"unknown key {key!r}", lineno, source)
        if key in values:
            raise ParseError(f"key {key!r} given twice", lineno, source)
        try:
            values[key] = _coerce(key, raw, kinds[key])
        except ValueError:
            raise ParseError(f"cannot parse value {raw!r} for {key}", lineno, source) from None
    try:
        return PipelineConfig(**values)
    except InputError as exc:
        raise InputError(f"{source}: {exc}") from None


def format_config(cfg: PipelineConfig) -> str:
    return "".join(f"{f.name} = {getattr(cfg, f.name)}\n" for f in dataclasses.fields(cfg))
