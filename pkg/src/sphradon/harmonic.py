"""Analytic inversion machinery for the fixed-radius and rotational geometries.

For constant radius r, data on centers |y| = s + r decouples over angular
modes into generalized Abel (Volterra first kind) equations with weight
(rho - s)^((n-3)/2); forward evaluation and triangular solvers for both
n = 2 and n = 3 live here, together with the full sinogram-to-image
inversion pipeline.  For the rotational geometry, the transform is a
scaled reparameterization of the equidistant sphere transform; the map
and its independent consistency check live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_chebyt, eval_legendre

from .grids import Image, Sinogram

__all__ = [
    "RadialProfile", "AbelKernelSpec", "EquidistantMap",
    "angular_decompose", "forward_abel", "solve_abel", "invert_constant_r",
    "palamodov_map", "palamodov_unmap",
]


@dataclass(frozen=True)
class RadialProfile:
    """Values on a uniform radial grid rho in [d, r]."""

    d: float
    r: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 0 < self.d < self.r:
            raise ValueError("need 0 < d < r")
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.size < 16:
            raise ValueError("need at least 16 nodes")
        object.__setattr__(self, "values", vals)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.d, self.r, self.values.size)


@dataclass(frozen=True)
class AbelKernelSpec:
    """Kernel data for one angular mode of the fixed-radius transform.

    The mode-l data g_l(s) relates to the radial profile f_l by
    g_l(s) = int_s^r (rho - s)^((n-3)/2) K(rho, s) f_l(rho) drho on the
    triangle T = {d <= s <= r, s <= rho <= r}.
    """

    n: int
    l: int
    r: float
    d: float

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError("dimension n must be 2 or 3")
        if self.l < 0:
            raise ValueError("degree l must be >= 0")
        if not 0 < self.d < self.r:
            raise ValueError("need 0 < d < r")

    def t(self, rho, s):
        """Cosine of the polar angle at which the sphere meets radius rho."""
        rho = np.asarray(rho, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        return (rho**2 + s**2 + 2 * s * self.r) / (2 * rho * (s + self.r))

    def rho(self, t, s):
        """Inverse of t(., s): the smaller radius with that angle cosine."""
        t = np.asarray(t, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        rs = self.r + s
        return rs * t - np.sqrt(rs**2 * t**2 - (s**2 + 2 * self.r * s))

    def k1(self, rho, s):
        """Smooth kernel factor, simplified closed form."""
        rho = np.asarray(rho, dtype=np.float64)
        return self.r * rho ** (self.n - 2) / (self.r + np.asarray(s))

    def k1_sqrt_form(self, rho, s):
        """Same factor from its defining square-root expression."""
        rho = np.asarray(rho, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        t = self.t(rho, s)
        rs = self.r + s
        inner = (t**2 * rs**2 - (s**2 + 2 * self.r * s)) / rs**2 + (1 - t**2)
        return rho ** (self.n - 2) * np.sqrt(inner)

    def k2(self, rho, s):
        """Factor with (rho - s) K2 = 1 - t^2; strictly positive on T."""
        rho = np.asarray(rho, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        return ((rho + s) * ((2 * self.r + s) ** 2 - rho**2)
                / (4 * rho**2 * (s + self.r) ** 2))

    def kernel(self, rho, s):
        """Smooth part of the integrand multiplying (rho-s)^((n-3)/2)."""
        t = np.clip(self.t(rho, s), -1.0, 1.0)
        if self.n == 3:
            return 2.0 * np.pi * self.k1(rho, s) * eval_legendre(self.l, t)
        return (2.0 * self.k1(rho, s) / np.sqrt(self.k2(rho, s))
                * eval_chebyt(self.l, t))


def _sqrt_moments(a, b, s):
    """Exact integrals of (rho-s)^(-1/2) {1, (rho-a)} over [a, b]."""
    A = a - s
    B = b - s
    i0 = 2.0 * (np.sqrt(B) - np.sqrt(A))
    i1 = (2.0 / 3.0) * (B ** 1.5 - A ** 1.5) - A * i0
    return i0, i1


def forward_matrix(spec: AbelKernelSpec, m: int) -> np.ndarray:
    """Upper-triangular quadrature matrix of the mode-l Abel operator.

    Row i maps node values of f to the integral from s_i to r by product
    integration on a 4x refined grid: the smooth part of the integrand is
    linearized per fine interval and the weight (rho - s)^((n-3)/2) is
    integrated exactly against it (the weight is 1 for n = 3).  The last
    row is identically zero (empty integral at s = r).  Higher-order
    rules like Simpson are avoided deliberately: their triangular solves
    have exponentially growing parasitic modes, while this family's
    worst parasitic root has modulus 1.
    """
    rho = np.linspace(spec.d, spec.r, m)
    h = rho[1] - rho[0]
    M = np.zeros((m, m))
    refine = 4
    fine = np.linspace(spec.d, spec.r, (m - 1) * refine + 1)
    # linear interpolation weights of fine nodes on the coarse grid
    pos = (fine - spec.d) / h
    c0 = np.minimum(pos.astype(np.int64), m - 2)
    frac = pos - c0
    for i in range(m - 1):
        s = rho[i]
        sub = fine[i * refine:]
        k = spec.kernel(sub, s)
        a, b = sub[:-1], sub[1:]
        if spec.n == 3:
            i0, i1 = b - a, (b - a) ** 2 / 2.0
        else:
            i0, i1 = _sqrt_moments(a, b, s)
        # integral of the linearized k*f over [a, b]:
        # w_a (i0 - i1/dx) + w_b (i1/dx), with w = k * interp(f)
        dx = b - a
        wa = k[:-1] * (i0 - i1 / dx)
        wb = k[1:] * (i1 / dx)
        base = i * refine
        coef = np.zeros(fine.size - base)
        coef[:-1] += wa
        coef[1:] += wb
        cc = c0[base:]
        ff = frac[base:]
        np.add.at(M[i], cc, coef * (1.0 - ff))
        np.add.at(M[i], cc + 1, coef * ff)
    return M


def forward_abel(spec: AbelKernelSpec, f_l: RadialProfile) -> np.ndarray:
    """Mode-l data g_l on the profile's own grid: the quadrature matrix
    applied to the node values."""
    return forward_matrix(spec, f_l.values.size) @ f_l.values


def solve_abel(spec: AbelKernelSpec, g_l: np.ndarray, ridge: float = 0.0
               ) -> RadialProfile:
    """Recover the mode-l radial profile from its Abel-transformed data.

    g_l must be sampled on the uniform [d, r] grid of the returned
    profile.  The forward quadrature matrix is upper triangular with a
    positive diagonal (after pinning f(r) = 0 in place of its empty last
    row), so back substitution inverts it; ridge > 0 switches to a
    Tikhonov-regularized least-squares solve for noisy inputs.
    """
    g = np.asarray(g_l, dtype=np.float64)
    m = g.size
    M = forward_matrix(spec, m)
    rhs = g.copy()
    # support lies strictly inside the annulus: pin f(r) = 0
    M[m - 1, m - 1] = 1.0
    rhs[m - 1] = 0.0
    diag = np.diag(M)
    if np.abs(diag).min() <= 0:
        raise ZeroDivisionError("triangular system has a zero diagonal")
    if ridge > 0:
        A = M.T @ M + ridge * np.eye(m)
        f = np.linalg.solve(A, M.T @ rhs)
    else:
        f = np.zeros(m)
        for i in range(m - 1, -1, -1):
            f[i] = (rhs[i] - M[i, i + 1:] @ f[i + 1:]) / M[i, i]
    return RadialProfile(spec.d, spec.r, f)


def angular_decompose(sino: Sinogram, L: int, r: float
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Angular Fourier modes of fixed-radius data, per center radius.

    Returns (coeffs, s_grid): coeffs[k] holds mode l = k - L, and
    coeffs[L + l](s) = (1/N) sum_j g(s, omega_j) exp(-i l omega_j).
    The center radius axis maps to s = |y| - r.
    """
    ang = sino.axis2
    n = ang.size
    step = 2.0 * np.pi / n
    if np.max(np.abs(ang - ang[0] - step * np.arange(n))) > 1e-9:
        raise ValueError("angle axis must be uniform over one period")
    g = sino.grid
    # full-spectrum FFT, then pick the requested band
    spec = np.fft.fft(g, axis=1) / n
    if L >= n // 2:
        raise ValueError("L exceeds the angular Nyquist mode")
    out = np.empty((2 * L + 1, sino.n1), dtype=np.complex128)
    for k, l in enumerate(range(-L, L + 1)):
        out[k] = spec[:, l % n] * np.exp(-1j * l * ang[0])
    return out, sino.axis1 - r


def invert_constant_r(sino: Sinogram, r: float, d: float, L: int = 32,
                      ridge: float = 0.0, img_spec: Image | None = None,
                      m: int = 200):
    """Full analytic inversion of fixed-radius data.

    Pipeline: angular decomposition, per-mode Abel solve on a uniform
    [d, r] grid, harmonic resynthesis, and polar-to-raster resampling
    (zero outside the support annulus).  Returns the Image when img_spec
    is given, otherwise the (profiles, grid) table.
    """
    if sino.geometry_id != "ConstantR":
        raise ValueError("expected a ConstantR sinogram")
    coeffs, s_data = angular_decompose(sino, L, r)
    if s_data[0] > d + 1e-9 or s_data[-1] < r - 1e-9:
        raise ValueError(
            f"data covers s in [{s_data[0]:.4g}, {s_data[-1]:.4g}], "
            f"missing part of [{d:.4g}, {r:.4g}]")
    s_grid = np.linspace(d, r, m)
    profiles = np.zeros((L + 1, m), dtype=np.complex128)
    for l in range(L + 1):
        g_re = np.interp(s_grid, s_data, coeffs[L + l].real)
        g_im = np.interp(s_grid, s_data, coeffs[L + l].imag)
        spec = AbelKernelSpec(2, l, r, d)
        f_re = solve_abel(spec, g_re, ridge).values
        f_im = solve_abel(spec, g_im, ridge).values
        profiles[l] = f_re + 1j * f_im
    if img_spec is None:
        return profiles, s_grid
    xs, ys = img_spec.pixel_centers()
    X, Y = np.meshgrid(xs, ys)
    rho = np.hypot(X, Y).ravel()
    xi = np.arctan2(Y, X).ravel()
    inside = (rho >= d) & (rho <= r)
    vals = np.zeros(rho.size, dtype=np.complex128)
    for l in range(L + 1):
        f_at = np.interp(rho, s_grid, profiles[l].real) + \
            1j * np.interp(rho, s_grid, profiles[l].imag)
        mode = f_at * np.exp(1j * l * xi)
        vals += mode if l == 0 else mode + np.conj(mode)
    vals[~inside] = 0.0
    return img_spec.with_values(vals.real)


@dataclass(frozen=True)
class EquidistantMap:
    """Reparameterization between center radius t and inverse scale lambda.

    The rotational-geometry sphere through center t Theta coincides, after
    scaling space by p = 1/sqrt(1+alpha^2), with the equidistant sphere
    indexed by (lambda, Theta) with lambda = sqrt(1+alpha^2)/(2 t).
    """

    alpha: float

    @property
    def p(self) -> float:
        return 1.0 / math.sqrt(1.0 + self.alpha**2)

    def lam_of_t(self, t):
        t = np.asarray(t, dtype=np.float64)
        if np.any(t <= 0):
            raise ValueError("center radius must be positive")
        return math.sqrt(1.0 + self.alpha**2) / (2.0 * t)

    def t_of_lam(self, lam):
        lam = np.asarray(lam, dtype=np.float64)
        if np.any(lam <= 0):
            raise ValueError("lambda must be positive")
        return math.sqrt(1.0 + self.alpha**2) / (2.0 * lam)


def palamodov_map(sino: Sinogram, alpha: float, n: int = 2
                  ) -> tuple[Sinogram, EquidistantMap]:
    """Rotational-geometry data as equidistant sphere transform samples.

    axis1 becomes lambda (ascending, hence reversed relative to t) and
    values are scaled by p^(n-1), where p = 1/sqrt(1+alpha^2); the result
    samples the equidistant transform of the dilated image f(y/p).
    """
    if sino.geometry_id != "RotationalCST":
        raise ValueError("expected a RotationalCST sinogram")
    emap = EquidistantMap(alpha)
    lam = emap.lam_of_t(sino.axis1)[::-1]
    vals = (emap.p ** (n - 1)) * sino.grid[::-1, :]
    return Sinogram("CustomRadius", lam, sino.axis2, vals.ravel()), emap


def equidistant_circle(alpha: float, lam: float, theta: np.ndarray
                       ) -> tuple[np.ndarray, float]:
    """Center and radius of the equidistant sphere indexed by (lambda, Theta).

    The sphere is the level set (p - y . Theta) / (1 - |y|^2) = lambda
    with p = 1/sqrt(1+alpha^2); completing the square gives center
    Theta/(2 lambda) and radius sqrt(1 - 4 lambda p + 4 lambda^2)/(2 lambda).
    """
    p = 1.0 / math.sqrt(1.0 + alpha**2)
    disc = 1.0 - 4.0 * lam * p + 4.0 * lam**2
    if disc <= 0 or lam <= 0:
        raise ValueError("no real sphere for this (lambda, p)")
    center = np.asarray(theta, dtype=np.float64) / (2.0 * lam)
    return center, math.sqrt(disc) / (2.0 * lam)


def equidistant_integral(img: Image, alpha: float, lam: float,
                         theta: np.ndarray, quad: int = 2048) -> float:
    """Arc integral of the dilated image f(x/p) over one equidistant sphere.

    Built directly from the (lambda, Theta) level-set geometry, with no
    reference to the rotational-geometry projector; used as the
    independent side of the equivalence check.
    """
    from .grids import bilinear_sample
    p = 1.0 / math.sqrt(1.0 + alpha**2)
    center, radius = equidistant_circle(alpha, lam, theta)
    ang = (np.arange(quad) + 0.5) * (2.0 * np.pi / quad)
    pts = center[None, :] + radius * np.stack([np.cos(ang), np.sin(ang)],
                                              axis=1)
    vals = bilinear_sample(img, pts / p)
    return float(vals.sum() * radius * 2.0 * np.pi / quad)


def palamodov_unmap(sino: Sinogram, alpha: float, n: int = 2) -> Sinogram:
    """Inverse of palamodov_map; exact round trip on grids."""
    emap = EquidistantMap(alpha)
    t = emap.t_of_lam(sino.axis1)[::-1]
    vals = sino.grid[::-1, :] / (emap.p ** (n - 1))
    return Sinogram("RotationalCST", t, sino.axis2, vals.ravel())
