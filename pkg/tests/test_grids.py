"""Raster containers and bilinear sampling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphradon.grids import (Image, Sinogram, bilinear_sample, sample_grid,
                            sample_sinogram, world_to_pixel)


def small_image(nx=5, ny=4):
    vals = np.arange(nx * ny, dtype=float)
    return Image(nx, ny, -1.0, 1.0, 0.0, 2.0, vals)


def test_image_spacing_and_centers():
    img = small_image()
    assert img.dx == pytest.approx(2.0 / 5)
    assert img.dy == pytest.approx(2.0 / 4)
    xs, ys = img.pixel_centers()
    assert xs[0] == pytest.approx(-1.0 + img.dx / 2)
    assert ys[-1] == pytest.approx(2.0 - img.dy / 2)
    assert img.grid.shape == (4, 5)


def test_image_validation():
    with pytest.raises(ValueError):
        Image(4, 4, 1.0, -1.0, 0.0, 1.0, np.zeros(16))
    with pytest.raises(ValueError):
        Image(4, 4, -1.0, 1.0, 0.0, 1.0, np.zeros(15))


def test_sinogram_axes_must_increase():
    with pytest.raises(ValueError):
        Sinogram("ConstantR", np.array([1.0, 1.0, 2.0]),
                 np.array([0.0, 1.0]), np.zeros(6))
    with pytest.raises(ValueError):
        Sinogram("NoSuchGeometry", np.array([1.0, 2.0]),
                 np.array([0.0, 1.0]), np.zeros(4))


def test_world_to_pixel_edges():
    img = small_image()
    assert world_to_pixel(img, (-1.0, 0.0)) == (0, 0)
    assert world_to_pixel(img, (1.0 - 1e-9, 2.0 - 1e-9)) == (4, 3)
    # the max edge itself is exclusive
    assert world_to_pixel(img, (1.0, 2.0)) is None
    assert world_to_pixel(img, (1.5, 0.5)) is None


def test_bilinear_exact_on_linear_function():
    img = small_image()
    xs, ys = img.pixel_centers()
    X, Y = np.meshgrid(xs, ys)
    img = img.with_values((2.0 * X - 3.0 * Y + 0.5).ravel())
    pts = np.array([[0.1, 0.7], [-0.3, 1.1], [0.0, 1.0]])
    got = bilinear_sample(img, pts)
    want = 2.0 * pts[:, 0] - 3.0 * pts[:, 1] + 0.5
    assert np.allclose(got, want, atol=1e-12)


def test_bilinear_zero_outside_node_hull():
    img = small_image().with_values(np.ones(20))
    assert bilinear_sample(img, (5.0, 5.0)) == 0.0
    # outside the outermost pixel centers counts as outside
    assert bilinear_sample(img, (-1.0 + 1e-6, 0.0 + 1e-6)) == 0.0


@given(st.integers(0, 4), st.integers(0, 3))
@settings(max_examples=20, deadline=None)
def test_bilinear_reproduces_nodes(i, j):
    img = small_image()
    xs, ys = img.pixel_centers()
    assert bilinear_sample(img, (xs[i], ys[j])) == pytest.approx(
        img.grid[j, i])


def test_sample_grid_periodic_axis():
    a1 = np.array([0.0, 1.0])
    n = 8
    a2 = np.arange(n) * (2 * np.pi / n)
    grid = np.tile(np.sin(a2), (2, 1))
    q1 = np.full(5, 0.5)
    q2 = np.array([-0.1, 2 * np.pi - 0.1, 0.0, 6.9, np.pi])
    got = sample_grid(a1, a2, grid, q1, q2, periodic2=2 * np.pi)
    # linear interpolation of sin on an 8-point grid: compare against a
    # manual wrap of the same interpolant
    ref = sample_grid(a1, a2, grid, q1, np.mod(q2, 2 * np.pi),
                      periodic2=2 * np.pi)
    assert np.allclose(got, ref, atol=1e-12)


def test_sample_sinogram_angle_wrap():
    n = 12
    a2 = np.arange(n) * (2 * np.pi / n)
    a1 = np.linspace(1.0, 2.0, 4)
    vals = np.cos(a2)[None, :] * np.ones((4, 1))
    sino = Sinogram("ConstantR", a1, a2, vals.ravel())
    v1 = sample_sinogram(sino, np.array([1.5]), np.array([0.1]))
    v2 = sample_sinogram(sino, np.array([1.5]), np.array([0.1 + 2 * np.pi]))
    assert v1 == pytest.approx(v2)


def test_sample_sinogram_zero_outside_radius_range():
    a1 = np.linspace(1.0, 2.0, 4)
    a2 = np.arange(8) * (2 * np.pi / 8)
    sino = Sinogram("ConstantR", a1, a2, np.ones(32))
    assert sample_sinogram(sino, np.array([5.0]), np.array([0.0]))[0] == 0.0
