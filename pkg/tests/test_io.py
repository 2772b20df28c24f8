import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mtdepth import io
from mtdepth.config import PipelineConfig, format_config, parse_config
from mtdepth.errors import FormatError, InputError, ParseError
from mtdepth.grid import RgbImage, ScalarGrid, SeedSet

shapes = st.tuples(st.integers(1, 7), st.integers(1, 7))
f32 = st.floats(-1e6, 1e6, allow_nan=False, width=32)


def _pfm(tmp_path, header: bytes, payload: bytes, name="m.pfm"):
    p = tmp_path / name
    p.write_bytes(header + payload)
    return p


def test_pfm_little_endian_rows_flipped(tmp_path):
    p = _pfm(tmp_path, b"Pf\n2 2\n-1.0\n", struct.pack("<4f", 1, 2, 3, 4))
    g = io.read_float_map(p)
    # file rows are bottom-up: [1,2] is the last image row
    assert g.values.tolist() == [[3.0, 4.0], [1.0, 2.0]]
    assert g.valid.all()


def test_pfm_big_endian(tmp_path):
    p = _pfm(tmp_path, b"Pf\n2 1\n1.0\n", struct.pack(">2f", 1.5, -2.0))
    assert io.read_float_map(p).values.tolist() == [[1.5, -2.0]]


def test_pfm_three_byte_file_truncated_at_three(tmp_path):
    p = _pfm(tmp_path, b"Pf\n", b"")
    with pytest.raises(FormatError) as exc:
        io.read_float_map(p)
    assert exc.value.offset == 3
    assert "offset 3" in str(exc.value)


def test_pfm_bad_magic_and_short_payload(tmp_path):
    with pytest.raises(FormatError) as exc:
        io.read_float_map(_pfm(tmp_path, b"P5\n2 2\n-1\n", b"\0" * 16))
    assert exc.value.offset == 0
    buf = b"Pf\n2 2\n-1.0\n" + b"\0" * 10
    with pytest.raises(FormatError) as exc:
        io.read_float_map(_pfm(tmp_path, buf, b""))
    assert exc.value.offset == len(buf)
    with pytest.raises(FormatError):
        io.read_float_map(_pfm(tmp_path, b"Pf\nx 2\n-1.0\n", b"\0" * 16))


@given(shapes.flatmap(lambda s: arrays(np.float32, s, elements=f32)))
def test_pfm_roundtrip_bit_exact(tmp_path_factory, arr):
    p = tmp_path_factory.mktemp("pfm") / "a.pfm"
    g = ScalarGrid(arr.astype(np.float64))
    io.write_float_map(p, g)
    back = io.read_float_map(p)
    assert back.values.tobytes() == g.values.tobytes()
    assert np.array_equal(back.valid, g.valid)


@given(shapes.flatmap(lambda s: st.tuples(
    arrays(np.float32, s, elements=st.floats(0.25, 100, width=32)),
    arrays(bool, s))))
def test_pfm_roundtrip_with_holes(tmp_path_factory, pair):
    vals, valid = pair
    p = tmp_path_factory.mktemp("pfm") / "h.pfm"
    g = ScalarGrid(vals.astype(np.float64), valid)
    io.write_float_map(p, g)
    assert io.nodata_path(p).exists() == (not valid.all())
    back = io.read_float_map(p)
    assert np.array_equal(back.valid, g.valid)
    assert back.values.tobytes() == g.values.tobytes()


def test_pfm_stale_sidecar_removed(tmp_path):
    p = tmp_path / "s.pfm"
    io.write_float_map(p, ScalarGrid(np.ones((2, 2)), np.array([[True, False], [True, True]])))
    assert io.nodata_path(p).exists()
    io.write_float_map(p, ScalarGrid(np.zeros((2, 2))))
    assert not io.nodata_path(p).exists()
    assert io.read_float_map(p).valid.all()


@given(shapes.flatmap(lambda s: arrays(np.int64, s, elements=st.integers(0, 65535))))
def test_label_map_roundtrip(tmp_path_factory, labels):
    p = tmp_path_factory.mktemp("pgm") / "l.pgm"
    io.write_label_map(p, labels)
    assert np.array_equal(io.read_label_map(p), labels)


@given(shapes.flatmap(lambda s: arrays(np.uint8, s + (3,))))
def test_ppm_roundtrip(tmp_path_factory, raw):
    p = tmp_path_factory.mktemp("ppm") / "i.ppm"
    img = RgbImage(raw / 255.0)
    io.write_ppm(p, img)
    assert np.array_equal(io.read_ppm(p).data, img.data)


def test_ppm_with_comment_and_16bit(tmp_path):
    p = tmp_path / "c.ppm"
    p.write_bytes(b"P6\n# made by hand\n1 1\n65535\n" + struct.pack(">3H", 0, 32768, 65535))
    np.testing.assert_allclose(io.read_ppm(p).data[0, 0], [0, 32768 / 65535, 1])


def test_seeds_examples():
    s = io.parse_seeds("3,4,2.5")
    assert list(s) == [(3, 4, 2.5)]
    assert len(io.parse_seeds("")) == 0
    with pytest.raises(ParseError) as exc:
        io.parse_seeds("3,4,2.5\n3,4,2.6")
    assert exc.value.line == 2


@pytest.mark.parametrize("text, line", [
    ("# c\n1,1,0", 2),
    ("1,1,-1", 1),
    ("1,1", 1),
    ("a,1,2", 1),
    ("1,1,1\n\n-1,2,3", 3),
])
def test_seed_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as exc:
        io.parse_seeds(text)
    assert exc.value.line == line


@given(st.lists(st.tuples(st.integers(0, 500), st.integers(0, 500),
                          st.floats(1e-3, 1e4, allow_nan=False)),
                unique_by=lambda t: t[:2], max_size=30))
def test_seeds_roundtrip(tmp_path_factory, triples):
    p = tmp_path_factory.mktemp("seeds") / "s.csv"
    io.write_seeds(p, SeedSet.from_triples(triples))
    assert list(io.read_seeds(p)) == [(r, c, float(v)) for r, c, v in triples]


def test_config_examples(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("")
    assert io.read_config(p) == PipelineConfig()
    p.write_text("knn = 0\n")
    with pytest.raises(InputError):
        io.read_config(p)
    p.write_text("fit_mode = least_squares\n")
    assert io.read_config(p).fit_mode == "least_squares"
    p.write_text("# tuned\nfit_mode = median  # robust\nknn=4\n")
    cfg = io.read_config(p)
    assert (cfg.fit_mode, cfg.knn) == ("median", 4)


@pytest.mark.parametrize("text", ["bogus = 1", "knn = four", "knn = 3\nknn = 4", "just words"])
def test_config_rejections(text):
    with pytest.raises(InputError):
        parse_config(text)


def test_config_defaults_documented():
    c = PipelineConfig()
    assert (c.kappa, c.epsilon, c.d_min, c.seg_scale, c.seg_min_size, c.knn) == (1.0, 1e-6, 1e-6, 300, 20, 8)
    assert (c.sigma_spatial, c.sigma_range, c.bilateral_iters) == (3.0, 0.1, 2)
    assert (c.fit_mode, c.basis, c.dp_order, c.dp_sweeps) == ("least_squares", "polynomial", 3, 4)


@given(st.builds(
    PipelineConfig,
    kappa=st.floats(0.1, 10), knn=st.integers(1, 20), dp_order=st.integers(1, 9),
    fit_mode=st.sampled_from(["least_squares", "median", "mean", "moment", "quantile"]),
    basis=st.sampled_from(["polynomial", "bspline"]), domain=st.sampled_from(["inverse", "depth"]),
))
def test_config_roundtrip(cfg):
    assert parse_config(format_config(cfg)) == cfg
