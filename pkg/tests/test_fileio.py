"""Raster file format round trips, error paths, PNG export."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image as PILImage

from sphradon.fileio import (MalformedHeaderError, PayloadMismatchError,
                             UnsupportedFormatError, export_png, read_raster,
                             write_raster)
from sphradon.grids import Image, Sinogram

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(st.integers(1, 6), st.integers(1, 6), st.lists(finite, min_size=36,
                                                      max_size=36))
@settings(max_examples=30, deadline=None)
def test_image_round_trip(nx, ny, raw):
    import tempfile
    path = tempfile.mktemp(suffix=".srk")
    img = Image(nx, ny, -1.0, 2.0, 0.5, 3.5,
                np.array(raw[:nx * ny], dtype=float))
    write_raster(img, path)
    back = read_raster(path)
    assert isinstance(back, Image)
    assert (back.nx, back.ny) == (nx, ny)
    assert back.x_min == img.x_min and back.y_max == img.y_max
    assert np.array_equal(back.values, img.values)


def test_sinogram_round_trip(tmp_path):
    a1 = np.linspace(1.5, 2.5, 7)
    a2 = np.arange(5) * (2 * np.pi / 5)
    sino = Sinogram("ConstantR", a1, a2, np.arange(35.0))
    path = tmp_path / "s.srk"
    write_raster(sino, path)
    back = read_raster(path)
    assert isinstance(back, Sinogram)
    assert back.geometry_id == "ConstantR"
    assert np.array_equal(back.axis1, a1)
    assert np.array_equal(back.axis2, a2)
    assert np.array_equal(back.values, sino.values)


def test_payload_bit_exact(tmp_path):
    # denormals, negative zero, and extreme exponents survive unchanged
    vals = np.array([5e-324, -0.0, 1e308, -1e-308])
    img = Image(2, 2, 0, 1, 0, 1, vals)
    path = tmp_path / "bits.srk"
    write_raster(img, path)
    back = read_raster(path)
    assert np.array_equal(back.values.view(np.uint64),
                          vals.view(np.uint64))


def _write_then_mangle(tmp_path, mangle):
    path = tmp_path / "m.srk"
    img = Image(2, 2, 0, 1, 0, 1, np.arange(4.0))
    write_raster(img, path)
    blob = path.read_bytes()
    path.write_bytes(mangle(blob))
    return path


def test_malformed_header(tmp_path):
    path = _write_then_mangle(tmp_path, lambda b: b"not json\n" + b)
    with pytest.raises(MalformedHeaderError):
        read_raster(path)


def test_truncated_payload(tmp_path):
    path = _write_then_mangle(tmp_path, lambda b: b[:-8])
    with pytest.raises(PayloadMismatchError):
        read_raster(path)


def test_unsupported_version(tmp_path):
    def bump(blob):
        head, _, tail = blob.partition(b"\n")
        return head.replace(b'"version": 1', b'"version": 99') + b"\n" + tail

    path = _write_then_mangle(tmp_path, bump)
    with pytest.raises(UnsupportedFormatError):
        read_raster(path)


def test_png_byte_oracle(tmp_path):
    img = Image(3, 1, 0, 3, 0, 1, np.array([-1.0, 0.5, 2.0]))
    path = tmp_path / "o.png"
    export_png(img, path, window=(0.0, 1.0))
    arr = np.asarray(PILImage.open(path))
    assert arr.shape == (1, 3)
    assert list(arr[0]) == [0, 128, 255]


def test_png_row_order_bottom_up(tmp_path):
    # row j = 0 of the raster is the bottom of the physical domain, so it
    # must land at the bottom of the PNG (its last row)
    img = Image(1, 2, 0, 1, 0, 2, np.array([0.0, 1.0]))
    path = tmp_path / "r.png"
    export_png(img, path, window=(0.0, 1.0))
    arr = np.asarray(PILImage.open(path))
    assert arr[1, 0] == 0 and arr[0, 0] == 255


def test_png_requires_increasing_window(tmp_path):
    img = Image(2, 2, 0, 1, 0, 1, np.arange(4.0))
    with pytest.raises(ValueError):
        export_png(img, tmp_path / "bad.png", window=(1.0, 1.0))
