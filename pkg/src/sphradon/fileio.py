"""Bit-exact raster file IO (.srk) and 8-bit PNG export.

An .srk file is a one-line JSON header, a newline, then the row-major
float64 little-endian payload.  The header carries enough metadata to
rebuild either an Image or a Sinogram without loss.
"""

from __future__ import annotations

import json

import numpy as np
from PIL import Image as PILImage

from .grids import Image, Sinogram

FORMAT_VERSION = 1


class RasterIOError(Exception):
    """Base class for raster file errors."""


class MalformedHeaderError(RasterIOError):
    pass


class PayloadMismatchError(RasterIOError):
    pass


class UnsupportedFormatError(RasterIOError):
    pass


def _header_for(obj) -> dict:
    if isinstance(obj, Image):
        return {
            "version": FORMAT_VERSION,
            "dtype": "f64le",
            "kind": "image",
            "shape": [obj.ny, obj.nx],
            "extents": [obj.x_min, obj.x_max, obj.y_min, obj.y_max],
        }
    if isinstance(obj, Sinogram):
        return {
            "version": FORMAT_VERSION,
            "dtype": "f64le",
            "kind": "sinogram",
            "shape": [obj.n1, obj.n2],
            "geometry_id": obj.geometry_id,
            "axis1": obj.axis1.tolist(),
            "axis2": obj.axis2.tolist(),
        }
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_raster(obj, path) -> None:
    """Write an Image or Sinogram as header + f64le payload."""
    header = json.dumps(_header_for(obj), sort_keys=True)
    payload = obj.values.astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)


def read_raster(path):
    """Read an .srk file back into an Image or Sinogram.

    Raises MalformedHeaderError, PayloadMismatchError, or
    UnsupportedFormatError as distinct cases.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    newline = blob.find(b"\n")
    if newline < 0:
        raise MalformedHeaderError("missing header line")
    try:
        header = json.loads(blob[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedHeaderError(str(exc)) from exc
    if not isinstance(header, dict):
        raise MalformedHeaderError("header is not an object")

    if header.get("version") != FORMAT_VERSION:
        raise UnsupportedFormatError(
            f"unsupported version {header.get('version')!r}")
    if header.get("dtype") != "f64le":
        raise UnsupportedFormatError(
            f"unsupported dtype {header.get('dtype')!r}")

    try:
        shape = [int(s) for s in header["shape"]]
        kind = header["kind"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedHeaderError(str(exc)) from exc
    count = int(np.prod(shape))

    payload = blob[newline + 1:]
    if len(payload) != 8 * count:
        raise PayloadMismatchError(
            f"payload has {len(payload)} bytes, expected {8 * count}")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)

    if kind == "image":
        try:
            ny, nx = shape
            x_min, x_max, y_min, y_max = header["extents"]
        except (KeyError, ValueError) as exc:
            raise MalformedHeaderError(str(exc)) from exc
        return Image(nx, ny, x_min, x_max, y_min, y_max, values)
    if kind == "sinogram":
        try:
            return Sinogram(header["geometry_id"],
                            np.asarray(header["axis1"], dtype=np.float64),
                            np.asarray(header["axis2"], dtype=np.float64),
                            values)
        except KeyError as exc:
            raise MalformedHeaderError(str(exc)) from exc
    raise MalformedHeaderError(f"unknown kind {kind!r}")


def export_png(img: Image, path, window=None) -> None:
    """8-bit grayscale PNG with an affine window map.

    Values are mapped from [lo, hi] to [0, 255] with clamping and half-up
    rounding; a degenerate window maps everything to 0.  Row 0 of the
    raster (smallest y) is the bottom row of the PNG.
    """
    vals = img.grid
    if window is None:
        lo, hi = float(vals.min()), float(vals.max())
    else:
        lo, hi = float(window[0]), float(window[1])
        if not lo < hi:
            raise ValueError("window must satisfy lo < hi")
    if hi == lo:
        bytes8 = np.zeros(vals.shape, dtype=np.uint8)
    else:
        scaled = np.clip((vals - lo) / (hi - lo), 0.0, 1.0) * 255.0
        bytes8 = np.floor(scaled + 0.5).astype(np.uint8)
    PILImage.fromarray(bytes8[::-1, :], mode="L").save(path, format="PNG")
