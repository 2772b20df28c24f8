"""Readers and writers for float maps, images, seeds, label maps and configs.

Float maps are PFM (single channel ``Pf``). Missing pixels are stored as 0 and
flagged by an empty sidecar file ``<path>.nodata``; without the sidecar every
finite pixel is valid. Label maps are binary 16-bit PGM, colour images binary
PPM.
"""

from __future__ import annotations

import os
import re
from pathlib import Path

import numpy as np

from .config import PipelineConfig, format_config, parse_config
from .errors import FormatError, InputError, ParseError
from .grid import RgbImage, ScalarGrid, SeedSet

NODATA_SUFFIX = ".nodata"


def nodata_path(path) -> Path:
    return Path(str(path) + NODATA_SUFFIX)


# -- netpbm-style headers -----------------------------------------------------

_TOKEN = re.compile(rb"\S+")


def _header_tokens(buf: bytes, count: int, path, allow_comments: bool):
    """Read ``count`` whitespace-separated tokens; return them and the payload offset."""
    tokens = []
    pos = 0
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos : pos + 1].isspace():
            pos += 1
        if allow_comments and pos < n and buf[pos : pos + 1] == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= n:
            raise FormatError("truncated header", pos, path)
        m = _TOKEN.match(buf, pos)
        tokens.append(m.group())
        pos = m.end()
    # exactly one whitespace byte separates header and payload
    if pos >= n or not buf[pos : pos + 1].isspace():
        raise FormatError("header not terminated by whitespace", pos, path)
    return tokens, pos + 1


def _parse_int(tok: bytes, what: str, offset: int, path) -> int:
    try:
        v = int(tok)
    except ValueError:
        raise FormatError(f"bad {what} {tok!r}", offset, path) from None
    if v < 1:
        raise FormatError(f"{what} must be positive", offset, path)
    return v


# -- PFM ----------------------------------------------------------------------

def read_float_map(path, zero_is_missing: bool | None = None) -> ScalarGrid:
    """Read a single-channel PFM into a top-down grid.

    ``zero_is_missing`` defaults to whether the ``.nodata`` sidecar exists.
    """
    buf = Path(path).read_bytes()
    if len(buf) < 2:
        raise FormatError("truncated file", len(buf), path)
    if buf[:2] != b"Pf":
        if buf[:2] == b"PF":
            raise FormatError("3-channel PFM not supported, expected 'Pf'", 0, path)
        raise FormatError(f"bad magic {buf[:2]!r}, expected 'Pf'", 0, path)
    (magic, wtok, htok, stok), start = _header_tokens(buf, 4, path, allow_comments=False)
    if magic != b"Pf":
        raise FormatError(f"bad magic {magic!r}, expected 'Pf'", 0, path)
    width = _parse_int(wtok, "width", 3, path)
    height = _parse_int(htok, "height", 3, path)
    try:
        scale = float(stok)
    except ValueError:
        raise FormatError(f"bad scale token {stok!r}", start - 1 - len(stok), path) from None
    if scale == 0 or not np.isfinite(scale):
        raise FormatError("scale must be finite and non-zero", start - 1 - len(stok), path)
    need = start + 4 * width * height
    if len(buf) < need:
        raise FormatError("truncated payload", len(buf), path)
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    data = np.frombuffer(buf, dtype=dtype, count=width * height, offset=start)
    values = data.reshape(height, width)[::-1].astype(np.float64)

    if zero_is_missing is None:
        zero_is_missing = nodata_path(path).exists()
    valid = np.isfinite(values)
    if zero_is_missing:
        valid &= values != 0.0
    return ScalarGrid(np.where(valid, values, 0.0), valid)


def write_float_map(path, grid: ScalarGrid) -> None:
    """Write little-endian PFM; manages the ``.nodata`` sidecar."""
    vals = grid.values.astype("<f4")
    holes = ~grid.valid
    if holes.any():
        if np.any(vals[grid.valid] == 0.0):
            raise InputError("cannot encode a valid zero in a map that has missing pixels")
        vals = np.where(holes, np.float32(0.0), vals).astype("<f4")
    header = f"Pf\n{grid.width} {grid.height}\n-1.0\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(vals[::-1]).tobytes())
    side = nodata_path(path)
    if holes.any():
        side.touch()
    elif side.exists():
        side.unlink()


# -- PPM / PGM ----------------------------------------------------------------

def read_ppm(path) -> RgbImage:
    buf = Path(path).read_bytes()
    if buf[:2] != b"P6":
        raise FormatError(f"bad magic {buf[:2]!r}, expected 'P6'", 0, path)
    (_, wtok, htok, mtok), start = _header_tokens(buf, 4, path, allow_comments=True)
    width = _parse_int(wtok, "width", 3, path)
    height = _parse_int(htok, "height", 3, path)
    maxval = _parse_int(mtok, "maxval", 3, path)
    if maxval > 65535:
        raise FormatError("maxval above 65535", 3, path)
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    need = start + dtype.itemsize * width * height * 3
    if len(buf) < need:
        raise FormatError("truncated payload", len(buf), path)
    data = np.frombuffer(buf, dtype=dtype, count=width * height * 3, offset=start)
    return RgbImage(data.reshape(height, width, 3).astype(np.float64) / maxval)


def write_ppm(path, img: RgbImage) -> None:
    data = np.round(img.data * 255.0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P6\n{img.width} {img.height}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_label_map(path) -> np.ndarray:
    """Read a binary PGM label map (16-bit when maxval > 255)."""
    buf = Path(path).read_bytes()
    if buf[:2] != b"P5":
        raise FormatError(f"bad magic {buf[:2]!r}, expected 'P5'", 0, path)
    (_, wtok, htok, mtok), start = _header_tokens(buf, 4, path, allow_comments=True)
    width = _parse_int(wtok, "width", 3, path)
    height = _parse_int(htok, "height", 3, path)
    maxval = _parse_int(mtok, "maxval", 3, path)
    if maxval > 65535:
        raise FormatError("maxval above 65535", 3, path)
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    need = start + dtype.itemsize * width * height
    if len(buf) < need:
        raise FormatError("truncated payload", len(buf), path)
    data = np.frombuffer(buf, dtype=dtype, count=width * height, offset=start)
    return data.reshape(height, width).astype(np.int64)


def write_label_map(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise InputError("label map must be 2D")
    if labels.size and (labels.min() < 0 or labels.max() > 65535):
        raise InputError("labels must fit in 16 bits")
    h, w = labels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(labels.astype(">u2").tobytes())


# -- seeds --------------------------------------------------------------------

def parse_seeds(text: str, source="<seeds>") -> SeedSet:
    rows, cols, vals = [], [], []
    seen = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise ParseError("expected 'row,col,depth_m'", lineno, source)
        try:
            r, c, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(f"cannot parse {line!r}", lineno, source) from None
        if r < 0 or c < 0:
            raise ParseError("negative pixel index", lineno, source)
        if not (np.isfinite(v) and v > 0):
            raise ParseError(f"depth must be positive and finite, got {parts[2]}", lineno, source)
        if (r, c) in seen:
            raise ParseError(f"duplicate seed at ({r}, {c}), first on line {seen[r, c]}", lineno, source)
        seen[r, c] = lineno
        rows.append(r)
        cols.append(c)
        vals.append(v)
    return SeedSet(np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(vals))


def read_seeds(path) -> SeedSet:
    return parse_seeds(Path(path).read_text(), source=str(path))


def write_seeds(path, seeds: SeedSet) -> None:
    with open(path, "w") as f:
        f.write("# row,col,depth_m\n")
        for r, c, v in seeds:
            f.write(f"{r},{c},{v!r}\n")


# -- config -------------------------------------------------------------------

def read_config(path) -> PipelineConfig:
    return parse_config(Path(path).read_text(), source=str(path))


def write_config(path, cfg: PipelineConfig) -> None:
    Path(path).write_text(format_config(cfg))


def ensure_dir(path) -> Path:
    os.makedirs(path, exist_ok=True)
    return Path(path)
