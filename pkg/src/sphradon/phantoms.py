"""Test phantoms rasterized by supersampled area fractions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import Image

__all__ = ["PhantomSpec", "make_phantom"]


@dataclass(frozen=True)
class PhantomSpec:
    """Annular-sector phantom description.

    kind is one of Disk, Annulus, HalfAnnulus, Custom.  Disk ignores
    inner; HalfAnnulus defaults to the upper half plane of its center
    unless an explicit angular range is given.  Custom carries a raster
    directly in custom_values.
    """

    kind: str
    center: tuple = (0.0, 0.0)
    inner: float = 0.0
    outer: float = 1.0
    angle_start: float = 0.0
    angle_end: float = 2.0 * np.pi
    amplitude: float = 1.0
    custom_values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("Disk", "Annulus", "HalfAnnulus", "Custom"):
            raise ValueError(f"unknown phantom kind {self.kind!r}")
        if self.kind != "Custom":
            if not 0 <= self.inner < self.outer:
                raise ValueError("need 0 <= inner < outer")
            span = self.angle_end - self.angle_start
            if not 0 < span <= 2.0 * np.pi + 1e-12:
                raise ValueError("angular range must lie within one turn")


def make_phantom(spec: PhantomSpec, img_spec: Image) -> Image:
    """Rasterize: pixel value = amplitude times in-region area fraction.

    Area fractions come from a 4x4 supersample of each pixel.
    """
    if spec.kind == "Custom":
        vals = np.asarray(spec.custom_values, dtype=np.float64).ravel()
        return img_spec.with_values(spec.amplitude * vals)
    xs, ys = img_spec.pixel_centers()
    X, Y = np.meshgrid(xs, ys)
    sub = (np.arange(4) + 0.5) / 4 - 0.5
    acc = np.zeros_like(X)
    inner = spec.inner if spec.kind != "Disk" else 0.0
    a0 = spec.angle_start
    span = spec.angle_end - spec.angle_start
    full_turn = span >= 2.0 * np.pi - 1e-12
    if spec.kind == "HalfAnnulus" and full_turn:
        a0, span = 0.0, np.pi
    for sx in sub:
        for sy in sub:
            dx = X + sx * img_spec.dx - spec.center[0]
            dy = Y + sy * img_spec.dy - spec.center[1]
            rho = np.hypot(dx, dy)
            ok = (rho >= inner) & (rho <= spec.outer)
            if not full_turn or spec.kind == "HalfAnnulus":
                ang = np.mod(np.arctan2(dy, dx) - a0, 2.0 * np.pi)
                ok &= ang <= span
            acc += ok
    return img_spec.with_values((spec.amplitude * acc / 16.0).ravel())
