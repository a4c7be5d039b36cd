"""Reconstruction algorithms: Landweber, smoothed-TV descent, FBP variants."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grids import Image, Sinogram
from .projector import (CutoffProfile, SparseOperator, apply_cutoff,
                        apply_forward, apply_transpose,
                        backproject_generic, backproject_linear_cst)

__all__ = [
    "ReconConfig", "estimate_sigma_max", "landweber", "tv_reconstruct",
    "fbp_linear_cst", "fbp_constant_r",
]


@dataclass
class ReconConfig:
    """Knobs for the iterative reconstructors.

    step is the gradient step for Landweber and TV; lam_tv and beta_tv
    parameterize the smoothed total-variation penalty
    lam * sum_pixels sqrt(|grad x|^2 + beta^2).
    """

    method: str = "Landweber"
    iterations: int = 200
    step: float | None = None
    lam_tv: float = 0.0
    beta_tv: float = 1e-4
    nonneg: bool = True
    cutoff: CutoffProfile | None = None

    def __post_init__(self):
        if self.method not in ("FBP", "Landweber", "TV"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be positive")
        if self.method == "TV" and self.beta_tv <= 0:
            raise ValueError("beta_tv must be positive for TV")


def estimate_sigma_max(op: SparseOperator, n_iter: int = 50) -> float:
    """Largest singular value of A by power iteration on A^T A.

    The start vector comes from a fixed-seed portable recurrence so the
    estimate is deterministic.
    """
    n = op.n_cols
    # simple LCG start vector; anything deterministic and generic works
    state = np.uint64(88172645463325252)
    v = np.empty(n)
    one = np.uint64(2862933555777941757)
    two = np.uint64(3037000493)
    with np.errstate(over="ignore"):
        for i in range(n):
            state = state * one + two
            v[i] = float(state >> np.uint64(11)) * 2.0**-53 - 0.5
    v /= np.linalg.norm(v)
    A = op.matrix
    sigma2 = 0.0
    for _ in range(n_iter):
        w = A.T @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        sigma2 = nw
        v = w / nw
    return float(np.sqrt(sigma2))


def landweber(op: SparseOperator, b: Sinogram, cfg: ReconConfig
              ) -> tuple[Image, list[float]]:
    """Gradient descent x <- x + step A^T (b - A x) from x0 = 0.

    Returns the final iterate and the residual norm log; the log is
    monotone when step < 2 / sigma_max^2.
    """
    sigma = estimate_sigma_max(op)
    bound = np.inf if sigma == 0 else 2.0 / sigma**2
    step = cfg.step if cfg.step is not None else 1.0 / sigma**2
    if not 0 < step < bound:
        warnings.warn(
            f"step {step} outside stable interval (0, {bound}); "
            "iteration may diverge", RuntimeWarning)
    A = op.matrix
    bv = b.values
    x = np.zeros(op.n_cols)
    log = []
    for _ in range(cfg.iterations):
        res = bv - A @ x
        log.append(float(np.linalg.norm(res)))
        x = x + step * (A.T @ res)
    return op.img_spec.with_values(x), log


def _tv_value_grad(x: np.ndarray, nx: int, ny: int, beta: float):
    """Smoothed TV sum_p sqrt(|grad x|^2 + beta^2) and its gradient.

    Forward differences with zero-Neumann boundary (last row/column
    difference is 0).
    """
    g = x.reshape(ny, nx)
    dx = np.zeros_like(g)
    dy = np.zeros_like(g)
    dx[:, :-1] = g[:, 1:] - g[:, :-1]
    dy[:-1, :] = g[1:, :] - g[:-1, :]
    mag = np.sqrt(dx * dx + dy * dy + beta * beta)
    value = float(mag.sum())
    px = dx / mag
    py = dy / mag
    # divergence transpose of forward differences
    grad = np.zeros_like(g)
    grad[:, :-1] -= px[:, :-1]
    grad[:, 1:] += px[:, :-1]
    grad[:-1, :] -= py[:-1, :]
    grad[1:, :] += py[:-1, :]
    return value, grad.ravel()


def tv_reconstruct(op: SparseOperator, b: Sinogram, cfg: ReconConfig
                   ) -> tuple[Image, list[float]]:
    """Projected descent on ||Ax - b||^2 + lam * smoothed-TV.

    The update direction is A^T(b - Ax) - (lam/2) grad TV, so with lam = 0
    and projection off a fixed step reproduces the Landweber trajectory.
    Steps are accepted by Armijo backtracking on the full objective, and
    the objective log is nonincreasing.
    """
    if cfg.method != "TV":
        raise ValueError("cfg.method must be 'TV'")
    A = op.matrix
    bv = b.values
    nx, ny = op.img_spec.nx, op.img_spec.ny
    lam, beta = cfg.lam_tv, cfg.beta_tv
    sigma = estimate_sigma_max(op)
    step0 = cfg.step if cfg.step is not None else 1.0 / sigma**2

    def objective(x):
        res = A @ x - bv
        tv, _ = _tv_value_grad(x, nx, ny, beta)
        return float(res @ res) + lam * tv

    def project(x):
        return np.maximum(x, 0.0) if cfg.nonneg else x

    x = np.zeros(op.n_cols)
    fx = objective(x)
    log = [fx]
    for _ in range(cfg.iterations):
        res = bv - A @ x
        _, tv_grad = _tv_value_grad(x, nx, ny, beta)
        d = A.T @ res - 0.5 * lam * tv_grad
        # full objective gradient is -2 d
        step = step0
        accepted = False
        for _ in range(30):
            x_new = project(x + step * d)
            f_new = objective(x_new)
            if not np.isfinite(f_new):
                raise FloatingPointError("TV objective became non-finite")
            diff = x_new - x
            if f_new <= fx + 1e-4 * float(-2.0 * d @ diff):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            log.append(fx)
            break
        x, fx = x_new, f_new
        log.append(fx)
    return op.img_spec.with_values(x), log


def _central_diff_axis2(sino: Sinogram) -> Sinogram:
    """Central difference of the values along axis2, one-sided at the ends."""
    g = sino.grid
    out = np.empty_like(g)
    a2 = sino.axis2
    out[:, 1:-1] = (g[:, 2:] - g[:, :-2]) / (a2[2:] - a2[:-2])[None, :]
    out[:, 0] = (g[:, 1] - g[:, 0]) / (a2[1] - a2[0])
    out[:, -1] = (g[:, -1] - g[:, -2]) / (a2[-1] - a2[-2])
    return sino.with_values(out.ravel())


def fbp_linear_cst(b: Sinogram, alpha: float, img_spec: Image,
                   cut: CutoffProfile | None = None,
                   op: SparseOperator | None = None) -> Image:
    """Derivative-filtered backprojection for the linear geometry.

    Differentiates the sinogram along the vertical center coordinate
    (after an optional smooth cutoff in that coordinate) and
    backprojects.  When an assembled operator is supplied its transpose
    replaces the continuous backprojection.
    """
    if b.geometry_id != "LinearCST":
        raise ValueError("expected a LinearCST sinogram")
    work = b
    if cut is not None:
        work = apply_cutoff(work, cut, "y2")
    filt = _central_diff_axis2(work)
    if cut is not None:
        filt = apply_cutoff(filt, cut, "y2")
    if op is not None:
        return apply_transpose(op, filt)
    return backproject_linear_cst(filt, alpha, img_spec)


def _laplacian_index_coords(sino: Sinogram) -> Sinogram:
    """5-point Laplacian on the sinogram grid in index coordinates.

    Unit spacing in both indices; the angle axis wraps periodically and
    the radius axis uses zero padding at its ends.
    """
    g = sino.grid
    up = np.vstack([g[1:, :], np.zeros((1, g.shape[1]))])
    down = np.vstack([np.zeros((1, g.shape[1])), g[:-1, :]])
    left = np.roll(g, 1, axis=1)
    right = np.roll(g, -1, axis=1)
    lap = up + down + left + right - 4.0 * g
    return sino.with_values(lap.ravel())


def fbp_constant_r(b: Sinogram, model, img_spec: Image,
                   cut: CutoffProfile | None = None,
                   n_omega: int = 360) -> Image:
    """Laplacian-filtered backprojection for the fixed-radius geometry.

    Applies an optional radial cutoff, a discrete Laplacian on the
    sinogram grid, then the generic backprojection.
    """
    if b.geometry_id != "ConstantR":
        raise ValueError("expected a ConstantR sinogram")
    work = b
    if cut is not None:
        work = apply_cutoff(work, cut, "radial")
    lap = _laplacian_index_coords(work)
    return backproject_generic(lap, model, img_spec, n_omega)
