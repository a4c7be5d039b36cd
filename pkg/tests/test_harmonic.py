"""Abel kernels, triangular solves, analytic fixed-radius inversion."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphradon.geometry import constant_r, rotational_cst
from sphradon.grids import Image, Sinogram
from sphradon.harmonic import (AbelKernelSpec, EquidistantMap, RadialProfile,
                               angular_decompose, equidistant_circle,
                               equidistant_integral, forward_abel,
                               forward_matrix, invert_constant_r,
                               palamodov_map, palamodov_unmap, solve_abel)
from sphradon.phantoms import PhantomSpec, make_phantom
from sphradon.projector import forward_project

R, D = 1.25, 0.25


def triangle_points(m=400, seed=3):
    rng = np.random.default_rng(seed)
    s = rng.uniform(D, R, m)
    rho = s + rng.uniform(0, 1, m) * (R - s)
    return rho, s


def test_k1_identity():
    spec = AbelKernelSpec(2, 0, R, D)
    rho, s = triangle_points()
    assert np.allclose(spec.k1(rho, s), spec.k1_sqrt_form(rho, s),
                       rtol=1e-10, atol=1e-12)


def test_t_range_and_corrected_lower_bound():
    # t stays in (0, 1]; its true infimum over the triangle at fixed s is
    # sqrt(s^2 + 2 r s) / (s + r), attained at rho = sqrt(s^2 + 2 r s)
    spec = AbelKernelSpec(2, 0, R, D)
    rho, s = triangle_points(2000)
    t = spec.t(rho, s)
    assert np.all(t <= 1.0 + 1e-12)
    lower = np.sqrt(s**2 + 2 * R * s) / (s + R)
    assert np.all(t >= lower - 1e-12)


def test_rho_inverts_t_on_decreasing_branch():
    spec = AbelKernelSpec(2, 3, R, D)
    rng = np.random.default_rng(4)
    s = rng.uniform(D, R, 300)
    branch_top = np.sqrt(s**2 + 2 * R * s)
    rho = s + rng.uniform(0, 1, 300) * (np.minimum(branch_top, R) - s)
    t = spec.t(rho, s)
    assert np.allclose(spec.rho(t, s), rho, rtol=1e-9)


def test_k2_positive_and_one_minus_t_sq_identity():
    spec = AbelKernelSpec(2, 0, R, D)
    rho, s = triangle_points(1000)
    k2 = spec.k2(rho, s)
    assert np.all(k2 > 0)
    assert np.allclose(1.0 - spec.t(rho, s) ** 2, (rho - s) * k2,
                       rtol=1e-9, atol=1e-12)


def test_forward_n3_mode0_closed_form():
    # n = 3, l = 0, f = 1:
    # int_s^r 2 pi r rho / (r+s) drho = pi r (r^2 - s^2) / (r + s)
    spec = AbelKernelSpec(3, 0, R, D)
    m = 240
    prof = RadialProfile(D, R, np.ones(m))
    g = forward_abel(spec, prof)
    s = prof.grid
    want = np.pi * R * (R**2 - s**2) / (R + s)
    assert np.max(np.abs(g - want)) < 1e-12 * np.max(np.abs(want))


def test_forward_matrix_upper_triangular():
    spec = AbelKernelSpec(2, 2, R, D)
    M = forward_matrix(spec, 40)
    assert np.allclose(np.tril(M, -1), 0.0)
    assert np.allclose(M[-1], 0.0)


@pytest.mark.parametrize("n,tol", [(3, 1e-3), (2, 1e-2)])
@pytest.mark.parametrize("l", [0, 3, 8])
def test_abel_round_trip(n, tol, l):
    spec = AbelKernelSpec(n, l, R, D)
    m = 200
    s = np.linspace(D, R, m)
    u = (s - D) / (R - D)
    f = np.sin(2 * np.pi * u) * (1 - u) ** 2 * u
    prof = RadialProfile(D, R, f)
    g = forward_abel(spec, prof)
    back = solve_abel(spec, g)
    err = np.linalg.norm(back.values - f) / np.linalg.norm(f)
    assert err < tol


def test_solve_abel_ridge_close_to_exact():
    spec = AbelKernelSpec(3, 1, R, D)
    m = 120
    u = np.linspace(0, 1, m)
    f = u * (1 - u)
    g = forward_abel(spec, RadialProfile(D, R, f))
    exact = solve_abel(spec, g).values
    ridged = solve_abel(spec, g, ridge=1e-12).values
    assert np.linalg.norm(ridged - exact) / np.linalg.norm(exact) < 1e-3


def test_angular_decompose_synthetic_mode():
    n1, n2 = 6, 32
    a1 = np.linspace(R + D, 2 * R, n1)
    a2 = np.arange(n2) * (2 * np.pi / n2)
    amp = np.linspace(1.0, 2.0, n1)
    vals = amp[:, None] * np.cos(3 * a2)[None, :]
    sino = Sinogram("ConstantR", a1, a2, vals.ravel())
    coeffs, s = angular_decompose(sino, 5, R)
    assert np.allclose(s, a1 - R)
    assert np.allclose(coeffs[5 + 3], amp / 2, atol=1e-12)
    assert np.allclose(coeffs[5 - 3], amp / 2, atol=1e-12)
    assert np.allclose(coeffs[5 + 1], 0.0, atol=1e-12)


def test_angular_decompose_requires_uniform_angles():
    a2 = np.array([0.0, 1.0, 2.0, 4.0])
    sino = Sinogram("ConstantR", np.array([1.5, 2.0]), a2, np.zeros(8))
    with pytest.raises(ValueError):
        angular_decompose(sino, 1, R)


def test_invert_constant_r_needs_full_s_coverage():
    a1 = np.linspace(R + D + 0.3, R + R, 24)
    a2 = np.arange(16) * (2 * np.pi / 16)
    sino = Sinogram("ConstantR", a1, a2, np.zeros(24 * 16))
    with pytest.raises(ValueError):
        invert_constant_r(sino, R, D, L=2)


@given(st.floats(0.3, 3.0), st.floats(0.1, 2.0))
@settings(max_examples=50, deadline=None)
def test_equidistant_map_round_trip(alpha, t):
    emap = EquidistantMap(alpha)
    assert emap.t_of_lam(emap.lam_of_t(t)) == pytest.approx(t, rel=1e-12)


def test_equidistant_circle_matches_rotational_sphere():
    # after scaling space by p, the rotational-geometry sphere around
    # t Theta coincides with the equidistant sphere at lam(t)
    alpha = 1.0
    model = rotational_cst(alpha)
    emap = EquidistantMap(alpha)
    t = 0.8
    theta = np.array([np.cos(0.7), np.sin(0.7)])
    y = t * theta
    r_y = model.eval(y)
    center, radius = equidistant_circle(alpha, float(emap.lam_of_t(t)), theta)
    assert np.allclose(center, emap.p * y, atol=1e-12)
    assert radius == pytest.approx(emap.p * r_y, rel=1e-12)


def test_palamodov_map_round_trip_and_scaling():
    a1 = np.linspace(0.4, 1.6, 7)
    a2 = np.arange(6) * (2 * np.pi / 6)
    vals = np.arange(42.0)
    sino = Sinogram("RotationalCST", a1, a2, vals)
    mapped, emap = palamodov_map(sino, 1.0)
    assert mapped.geometry_id == "CustomRadius"
    assert np.all(np.diff(mapped.axis1) > 0)
    back = palamodov_unmap(mapped, 1.0)
    assert np.allclose(back.axis1, a1)
    assert np.allclose(back.values, sino.values, rtol=1e-14)
    # scaling: values pick up p^(n-1)
    assert mapped.grid[-1, 0] == pytest.approx(emap.p * sino.grid[0, 0])


def test_palamodov_equivalence_spot_check():
    # one (lambda, Theta) sample, independently integrated with a
    # different quadrature than the forward projector
    alpha = 1.0
    img_spec = Image.zeros(105, 105, -1.0, 1.0, -1.0, 1.0)
    img = make_phantom(PhantomSpec("Disk", center=(0.2, -0.1), outer=0.5),
                       img_spec)
    model = rotational_cst(alpha)
    a1 = np.linspace(0.5, 1.5, 5)
    a2 = np.arange(8) * (2 * np.pi / 8)
    sino = forward_project(model, img, Sinogram.zeros("RotationalCST", a1,
                                                      a2), 1024)
    mapped, _ = palamodov_map(sino, alpha)
    i, j = 2, 3
    direct = equidistant_integral(img, alpha, float(mapped.axis1[i]),
                                  np.array([np.cos(mapped.axis2[j]),
                                            np.sin(mapped.axis2[j])]),
                                  quad=777)
    assert direct == pytest.approx(mapped.grid[i, j], rel=2e-3, abs=1e-4)
