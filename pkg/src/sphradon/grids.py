"""Raster and sinogram containers shared by every other module.

An Image is a 2-D raster of densities on a physical rectangle; a Sinogram
holds sampled sphere integrals on a geometry-specific center grid.  Both
store their payload as a flat row-major float64 array and are treated as
immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

GEOMETRY_IDS = ("LinearCST", "RotationalCST", "ConstantR", "CustomRadius")


@dataclass(frozen=True)
class Image:
    """Pixel raster on [x_min, x_max] x [y_min, y_max].

    Pixel (i, j) has center (x_min + (i + 1/2) dx, y_min + (j + 1/2) dy)
    and values index j * nx + i.
    """

    nx: int
    ny: int
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.nx <= 0 or self.ny <= 0:
            raise ValueError("pixel counts must be positive")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("extents must be nondegenerate")
        vals = np.ascontiguousarray(self.values, dtype=np.float64).ravel()
        if vals.size != self.nx * self.ny:
            raise ValueError(
                f"values length {vals.size} != nx*ny = {self.nx * self.ny}"
            )
        object.__setattr__(self, "values", vals)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def grid(self) -> np.ndarray:
        """(ny, nx) view of the values."""
        return self.values.reshape(self.ny, self.nx)

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.x_min + (np.arange(self.nx) + 0.5) * self.dx
        ys = self.y_min + (np.arange(self.ny) + 0.5) * self.dy
        return xs, ys

    def with_values(self, values: np.ndarray) -> "Image":
        return replace(self, values=values)

    @classmethod
    def zeros(cls, nx, ny, x_min, x_max, y_min, y_max) -> "Image":
        return cls(nx, ny, x_min, x_max, y_min, y_max,
                   np.zeros(nx * ny, dtype=np.float64))


@dataclass(frozen=True)
class Sinogram:
    """Sampled sphere integrals on a product center grid.

    Axis meaning depends on geometry_id: (y1, y2) for LinearCST, and
    (|y|, polar angle) for RotationalCST / ConstantR / CustomRadius.
    values index is i1 * len(axis2) + i2.
    """

    geometry_id: str
    axis1: np.ndarray = field(repr=False)
    axis2: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.geometry_id not in GEOMETRY_IDS:
            raise ValueError(f"unknown geometry_id {self.geometry_id!r}")
        a1 = np.ascontiguousarray(self.axis1, dtype=np.float64).ravel()
        a2 = np.ascontiguousarray(self.axis2, dtype=np.float64).ravel()
        for name, ax in (("axis1", a1), ("axis2", a2)):
            if ax.size < 1 or not np.all(np.diff(ax) > 0):
                raise ValueError(f"{name} must be strictly increasing")
        vals = np.ascontiguousarray(self.values, dtype=np.float64).ravel()
        if vals.size != a1.size * a2.size:
            raise ValueError("values length must equal |axis1|*|axis2|")
        object.__setattr__(self, "axis1", a1)
        object.__setattr__(self, "axis2", a2)
        object.__setattr__(self, "values", vals)

    @property
    def n1(self) -> int:
        return self.axis1.size

    @property
    def n2(self) -> int:
        return self.axis2.size

    @property
    def grid(self) -> np.ndarray:
        """(n1, n2) view of the values."""
        return self.values.reshape(self.n1, self.n2)

    def with_values(self, values: np.ndarray) -> "Sinogram":
        return replace(self, values=values)

    @classmethod
    def zeros(cls, geometry_id, axis1, axis2) -> "Sinogram":
        a1 = np.asarray(axis1, dtype=np.float64)
        a2 = np.asarray(axis2, dtype=np.float64)
        return cls(geometry_id, a1, a2,
                   np.zeros(a1.size * a2.size, dtype=np.float64))


def world_to_pixel(img: Image, p) -> tuple[int, int] | None:
    """Pixel cell containing p, or None when p is outside the extents.

    The max edge is exclusive so every point maps to at most one cell.
    """
    x, y = float(p[0]), float(p[1])
    if not (img.x_min <= x < img.x_max and img.y_min <= y < img.y_max):
        return None
    i = int((x - img.x_min) / img.dx)
    j = int((y - img.y_min) / img.dy)
    # guard float roundoff at the upper boundary
    return min(i, img.nx - 1), min(j, img.ny - 1)


def bilinear_sample(img: Image, p) -> np.ndarray | float:
    """Bilinear interpolation on pixel-center nodes, zero outside their hull.

    p may be a single point or an (..., 2) array; zero-extension matches the
    compact-support convention used by every projector.
    """
    pts = np.asarray(p, dtype=np.float64)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    u = (pts[..., 0] - img.x_min) / img.dx - 0.5
    v = (pts[..., 1] - img.y_min) / img.dy - 0.5
    # small slack so points computed to lie exactly on the hull boundary
    # are not dropped by roundoff
    tol = 1e-9
    inside = (u >= -tol) & (u <= img.nx - 1 + tol) & \
        (v >= -tol) & (v <= img.ny - 1 + tol)
    u = np.clip(u, 0.0, img.nx - 1.0)
    v = np.clip(v, 0.0, img.ny - 1.0)
    i0 = np.minimum(u.astype(np.int64), img.nx - 2) if img.nx > 1 else \
        np.zeros_like(u, dtype=np.int64)
    j0 = np.minimum(v.astype(np.int64), img.ny - 2) if img.ny > 1 else \
        np.zeros_like(v, dtype=np.int64)
    fu = u - i0
    fv = v - j0
    g = img.grid
    i1 = np.minimum(i0 + 1, img.nx - 1)
    j1 = np.minimum(j0 + 1, img.ny - 1)
    out = ((1 - fu) * (1 - fv) * g[j0, i0]
           + fu * (1 - fv) * g[j0, i1]
           + (1 - fu) * fv * g[j1, i0]
           + fu * fv * g[j1, i1])
    out = np.where(inside, out, 0.0)
    return float(out[0]) if scalar else out


def sample_grid(axis1: np.ndarray, axis2: np.ndarray, grid: np.ndarray,
                q1: np.ndarray, q2: np.ndarray,
                periodic2: float | None = None) -> np.ndarray:
    """Bilinear sampling of a rectilinear (axis1, axis2) table.

    Query points outside the axis hull evaluate to 0.  When periodic2 is
    given, axis2 is treated as a uniform periodic coordinate with that
    period (used for polar-angle axes).
    """
    q1 = np.asarray(q1, dtype=np.float64)
    q2 = np.asarray(q2, dtype=np.float64)

    ok1 = (q1 >= axis1[0]) & (q1 <= axis1[-1])
    i1 = np.clip(np.searchsorted(axis1, q1) - 1, 0, axis1.size - 2)
    w1 = (np.clip(q1, axis1[0], axis1[-1]) - axis1[i1]) / (
        axis1[i1 + 1] - axis1[i1])

    if periodic2 is not None:
        step = axis2[1] - axis2[0] if axis2.size > 1 else periodic2
        rel = np.mod(q2 - axis2[0], periodic2) / step
        j0 = rel.astype(np.int64)
        w2 = rel - j0
        j0 = np.mod(j0, axis2.size)
        j1 = np.mod(j0 + 1, axis2.size)
        ok2 = np.ones_like(ok1)
    else:
        ok2 = (q2 >= axis2[0]) & (q2 <= axis2[-1])
        j0 = np.clip(np.searchsorted(axis2, q2) - 1, 0, axis2.size - 2)
        w2 = (np.clip(q2, axis2[0], axis2[-1]) - axis2[j0]) / (
            axis2[j0 + 1] - axis2[j0])
        j1 = j0 + 1

    out = ((1 - w1) * (1 - w2) * grid[i1, j0]
           + (1 - w1) * w2 * grid[i1, j1]
           + w1 * (1 - w2) * grid[i1 + 1, j0]
           + w1 * w2 * grid[i1 + 1, j1])
    return np.where(ok1 & ok2, out, 0.0)


def sample_sinogram(sino: Sinogram, q1, q2) -> np.ndarray:
    """Bilinear sinogram sampling; the angle axis wraps for polar geometries."""
    periodic = 2.0 * np.pi if sino.geometry_id != "LinearCST" else None
    return sample_grid(sino.axis1, sino.axis2, sino.grid,
                       np.asarray(q1), np.asarray(q2), periodic2=periodic)
