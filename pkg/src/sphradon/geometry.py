"""Radius-function models, sampling regions, and stability analyzers.

Everything here is an executable consequence of the microlocal geometry of
the variable-radius sphere transform: the gradient-norm (immersion) check,
artifact points and artifact-set sampling, preimage center solvers, the
weak-stability audit, and hemisphere center sets for limited-data studies.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RadiusModel", "linear_cst", "rotational_cst", "constant_r",
    "counter_example", "custom_model",
    "Region", "rect_region", "annulus_region", "ball_region",
    "half_plane_region", "intersect_regions", "sample_region",
    "GeometryReport", "DegenerateLineError", "UnboundedRegionError",
    "check_norm_inequality", "artifact_point", "artifact_set_sample",
    "preimage_centers", "preimage_centers_detailed", "weak_stability_audit",
    "hemisphere_centers", "rotational_center_roots",
]


class DegenerateLineError(ValueError):
    """The artifact line through x and z is undefined (x = z)."""


class UnboundedRegionError(ValueError):
    """Operation requires a bounded region."""


# ---------------------------------------------------------------------------
# radius models


@dataclass(frozen=True)
class RadiusModel:
    """Radius function r(y) > 0 with its gradient, for one geometry family.

    eval/grad accept a single point (2,) or a stack (N, 2); grad returns
    matching shape.
    """

    family: str
    params: dict
    _eval: callable = field(repr=False)
    _grad: callable = field(repr=False)

    def eval(self, y):
        return self._eval(np.asarray(y, dtype=np.float64))

    def grad(self, y):
        return self._grad(np.asarray(y, dtype=np.float64))


def linear_cst(alpha: float) -> RadiusModel:
    """r(y) = sqrt(y2^2 + alpha^2); detector offset alpha > 0."""
    a2 = float(alpha) ** 2

    def ev(y):
        return np.sqrt(y[..., 1] ** 2 + a2)

    def gr(y):
        r = ev(y)
        g = np.zeros_like(y)
        g[..., 1] = y[..., 1] / r
        return g

    return RadiusModel("LinearCST", {"alpha": float(alpha)}, ev, gr)


def rotational_cst(alpha: float) -> RadiusModel:
    """r(y) = sqrt(alpha^2 + (1 - |y|)^2); scanner on the unit circle."""
    a2 = float(alpha) ** 2

    def ev(y):
        rho = np.linalg.norm(y, axis=-1)
        return np.sqrt(a2 + (1.0 - rho) ** 2)

    def gr(y):
        rho = np.linalg.norm(y, axis=-1)
        r = np.sqrt(a2 + (1.0 - rho) ** 2)
        # dr/drho = -(1 - rho)/r, radial direction y/rho; rho=0 is smooth
        # only radially, excluded by the valid center set anyway
        safe = np.where(rho == 0.0, 1.0, rho)
        coef = -(1.0 - rho) / (r * safe)
        return coef[..., None] * y

    return RadiusModel("RotationalCST", {"alpha": float(alpha)}, ev, gr)


def constant_r(r: float) -> RadiusModel:
    """r(y) = r; fixed-radius (ultrasound reflection) geometry."""
    rv = float(r)

    def ev(y):
        return np.full(y.shape[:-1], rv)

    def gr(y):
        return np.zeros_like(y)

    return RadiusModel("ConstantR", {"r": rv}, ev, gr)


def counter_example() -> RadiusModel:
    """r(y) = sqrt(|y|^2 + 1); |grad r| < 1 yet no sphere contains 0."""

    def ev(y):
        return np.sqrt(np.sum(y * y, axis=-1) + 1.0)

    def gr(y):
        return y / ev(y)[..., None]

    return RadiusModel("CounterExample", {}, ev, gr)


def custom_model(eval_fn, grad_fn, params=None) -> RadiusModel:
    """User-supplied radius function; grad is validated numerically in tests."""
    def ev(y):
        return np.asarray(eval_fn(y), dtype=np.float64)

    def gr(y):
        return np.asarray(grad_fn(y), dtype=np.float64)

    return RadiusModel("Custom", dict(params or {}), ev, gr)


def validate_gradient(model: RadiusModel, points, rel_tol=1e-6) -> bool:
    """Central finite differences of eval match grad on the given probes."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    h = 1e-6
    num = np.empty_like(pts)
    for k in range(2):
        dp = np.zeros(2)
        dp[k] = h
        num[:, k] = (model.eval(pts + dp) - model.eval(pts - dp)) / (2 * h)
    ana = model.grad(pts)
    scale = 1.0 + np.linalg.norm(ana, axis=1)
    return bool(np.all(np.linalg.norm(num - ana, axis=1) <= rel_tol * scale))


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Region:
    """Subset of the plane used for sampling audits.

    kind is one of rect, annulus, ball, half_plane, intersection; params
    hold the kind-specific geometry.
    """

    kind: str
    params: dict

    def contains(self, pts, margin: float = 0.0) -> np.ndarray:
        """Membership of (N, 2) points in the region eroded by margin."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        p = self.params
        if self.kind == "rect":
            return ((pts[:, 0] >= p["x_min"] + margin)
                    & (pts[:, 0] <= p["x_max"] - margin)
                    & (pts[:, 1] >= p["y_min"] + margin)
                    & (pts[:, 1] <= p["y_max"] - margin))
        if self.kind == "annulus":
            d = np.linalg.norm(pts - np.asarray(p["center"]), axis=1)
            return (d >= p["inner"] + margin) & (d <= p["outer"] - margin)
        if self.kind == "ball":
            d = np.linalg.norm(pts - np.asarray(p["center"]), axis=1)
            return d <= p["radius"] - margin
        if self.kind == "half_plane":
            coord = pts[:, p["axis"]]
            if p["side"] == "ge":
                return coord >= p["threshold"] + margin
            return coord <= p["threshold"] - margin
        if self.kind == "intersection":
            out = np.ones(pts.shape[0], dtype=bool)
            for part in p["parts"]:
                out &= part.contains(pts, margin)
            return out
        raise ValueError(f"unknown region kind {self.kind!r}")

    def bounded(self) -> bool:
        if self.kind == "half_plane":
            return False
        if self.kind == "intersection":
            return any(part.bounded() for part in self.params["parts"])
        return True

    def bounding_box(self):
        """(x_min, x_max, y_min, y_max) of a bounded region."""
        p = self.params
        if self.kind == "rect":
            return (p["x_min"], p["x_max"], p["y_min"], p["y_max"])
        if self.kind in ("annulus", "ball"):
            cx, cy = p["center"]
            R = p["outer"] if self.kind == "annulus" else p["radius"]
            return (cx - R, cx + R, cy - R, cy + R)
        if self.kind == "intersection":
            boxes = [part.bounding_box() for part in self.params["parts"]
                     if part.bounded()]
            if not boxes:
                raise UnboundedRegionError("intersection has no bounded part")
            return (max(b[0] for b in boxes), min(b[1] for b in boxes),
                    max(b[2] for b in boxes), min(b[3] for b in boxes))
        raise UnboundedRegionError(f"{self.kind} region is unbounded")

    def diameter(self) -> float:
        box = self.bounding_box()
        return math.hypot(box[1] - box[0], box[3] - box[2])

    def anchor_points(self) -> np.ndarray:
        """Deterministic extreme points appended to every sample set.

        Low-discrepancy interior samples never land exactly on corners or
        extremal circles, where gradient norms typically peak.
        """
        p = self.params
        if self.kind == "rect":
            xs = (p["x_min"], 0.5 * (p["x_min"] + p["x_max"]), p["x_max"])
            ys = (p["y_min"], 0.5 * (p["y_min"] + p["y_max"]), p["y_max"])
            return np.array([(x, y) for x in xs for y in ys])
        if self.kind in ("annulus", "ball"):
            c = np.asarray(p["center"], dtype=np.float64)
            ang = np.arange(8) * (np.pi / 4)
            dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
            radii = ([p["inner"], p["outer"]] if self.kind == "annulus"
                     else [0.0, p["radius"]])
            pts = [c + rad * dirs for rad in radii]
            return np.concatenate(pts)
        if self.kind == "intersection":
            pts = np.concatenate([part.anchor_points()
                                  for part in p["parts"] if part.bounded()])
            return pts[self.contains(pts)]
        return np.zeros((0, 2))


def rect_region(x_min, x_max, y_min, y_max) -> Region:
    if not (x_min < x_max and y_min < y_max):
        raise ValueError("rect must have positive measure")
    return Region("rect", {"x_min": float(x_min), "x_max": float(x_max),
                           "y_min": float(y_min), "y_max": float(y_max)})


def annulus_region(center, inner, outer) -> Region:
    if not 0 <= inner < outer:
        raise ValueError("annulus requires 0 <= inner < outer")
    return Region("annulus", {"center": (float(center[0]), float(center[1])),
                              "inner": float(inner), "outer": float(outer)})


def ball_region(center, radius) -> Region:
    if radius <= 0:
        raise ValueError("ball radius must be positive")
    return Region("ball", {"center": (float(center[0]), float(center[1])),
                           "radius": float(radius)})


def half_plane_region(axis: int, threshold: float, side: str) -> Region:
    if axis not in (0, 1) or side not in ("ge", "le"):
        raise ValueError("axis in {0,1}, side in {'ge','le'}")
    return Region("half_plane", {"axis": axis, "threshold": float(threshold),
                                 "side": side})


def intersect_regions(*parts: Region) -> Region:
    if not parts:
        raise ValueError("need at least one region")
    return Region("intersection", {"parts": tuple(parts)})


_HALTON_OFFSET = {"rect": 11, "annulus": 37, "ball": 59,
                  "half_plane": 83, "intersection": 101}


def _halton(base: int, start: int, count: int) -> np.ndarray:
    idx = np.arange(start, start + count)
    out = np.zeros(count)
    f = 1.0
    while idx.max(initial=0) > 0:
        f /= base
        out += f * (idx % base)
        idx //= base
    return out


def sample_region(region: Region, n: int, with_anchors: bool = True
                  ) -> np.ndarray:
    """Deterministic low-discrepancy samples of a bounded region.

    Halton points (bases 2 and 3, offset fixed per region kind) in the
    bounding box are rejection-filtered into the region, then augmented
    with the region's extreme anchor points.
    """
    if not region.bounded():
        raise UnboundedRegionError("cannot sample an unbounded region")
    x0, x1, y0, y1 = region.bounding_box()
    offset = _HALTON_OFFSET[region.kind]
    pts = []
    have = 0
    chunk = max(4 * n, 64)
    start = offset
    while have < n and start < offset + 1000 * chunk:
        u = _halton(2, start, chunk)
        v = _halton(3, start, chunk)
        cand = np.stack([x0 + (x1 - x0) * u, y0 + (y1 - y0) * v], axis=1)
        keep = cand[region.contains(cand)]
        pts.append(keep)
        have += keep.shape[0]
        start += chunk
    if have == 0:
        raise ValueError("region appears to have negligible measure")
    out = np.concatenate(pts)[:n]
    if with_anchors:
        anchors = region.anchor_points()
        if anchors.size:
            out = np.concatenate([out, anchors[region.contains(anchors)]])
    return out


# ---------------------------------------------------------------------------
# analyzers


def check_norm_inequality(model: RadiusModel, region: Region,
                          samples: int) -> tuple[float, bool]:
    """Max of |grad r| over a deterministic sample of the region.

    The sphere family is an immersed Lagrangian exactly when this stays
    below 1; ok reports that strict bound.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if model.family == "ConstantR":
        return 0.0, True
    pts = sample_region(region, samples)
    norms = np.linalg.norm(model.grad(pts), axis=1)
    mx = float(norms.max())
    return mx, mx < 1.0


def artifact_point(model: RadiusModel, y, x):
    """Second intersection of the artifact line with the sphere S(y).

    The line runs through x and z = y - r(y) grad r(y); its other sphere
    intersection is where backprojection can deposit spurious energy.
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    r = float(model.eval(y))
    if abs(np.linalg.norm(x - y) - r) > 1e-9 * r:
        raise ValueError("x is not on the sphere S(y)")
    g = model.grad(y)
    if np.linalg.norm(g) >= 1.0:
        raise ValueError("|grad r| >= 1 at y; artifact line undefined")
    z = y - r * g
    dz = z - x
    nz = np.linalg.norm(dz)
    if nz < 1e-14 * (1.0 + r):
        raise DegenerateLineError("x coincides with z")
    u = dz / nz
    # the chord through x along u meets S(y) again at parameter -2 u.(x-y)
    return x - 2.0 * float(u @ (x - y)) * u


def artifact_point_batch(model: RadiusModel, ys: np.ndarray,
                         xs: np.ndarray) -> np.ndarray:
    """Vectorized artifact_point for (N, 2) stacks of centers and points."""
    r = model.eval(ys)
    z = ys - r[:, None] * model.grad(ys)
    dz = z - xs
    nz = np.linalg.norm(dz, axis=1)
    if np.any(nz < 1e-14 * (1.0 + r)):
        raise DegenerateLineError("some x coincides with its z")
    u = dz / nz[:, None]
    s = np.sum(u * (xs - ys), axis=1)
    return xs - 2.0 * s[:, None] * u


# fixed-point iteration budget for preimage solving
_FP_MAX_ITER = 200
_FP_TOL = 1e-12


def _fixed_point_side(model: RadiusModel, x: np.ndarray, d: np.ndarray
                      ) -> tuple[float, bool]:
    """Fixed point t >= 0 of t -> r(x + t d), with Newton polish.

    Returns (t, converged); converged is judged by the final residual, so
    radius families without a fixed point on this ray report False.
    """
    t = float(model.eval(x))
    for _ in range(_FP_MAX_ITER):
        t_new = float(model.eval(x + t * d))
        if not math.isfinite(t_new):
            return t, False
        if abs(t_new - t) < _FP_TOL * (1.0 + abs(t_new)):
            t = t_new
            break
        t = t_new
    # Newton polish on g(t) = t - r(x + t d); tightens slow contractions
    for _ in range(8):
        y = x + t * d
        g = t - float(model.eval(y))
        gp = 1.0 - float(model.grad(y) @ d)
        if abs(gp) < 1e-12:
            break
        t_next = t - g / gp
        if not (math.isfinite(t_next) and t_next > 0):
            break
        t = t_next
        if abs(g) < 0.5 * _FP_TOL * (1.0 + t):
            break
    resid = abs(t - float(model.eval(x + t * d)))
    return t, t > 0 and resid < 1e-10 * (1.0 + t)


def rotational_center_roots(alpha: float, x, xi) -> list[float]:
    """Signed distances t with x + t xi a valid rotational-family center.

    Closed-form quadratic companion to the fixed-point solver: squaring
    the center condition gives a t-quadratic whose genuine roots satisfy
    |t| = r(x + t xi); squaring artifacts are filtered out by that check.
    """
    x = np.asarray(x, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    a2 = float(alpha) ** 2
    c = float(x @ xi)
    S = float(x @ x) + a2 + 1.0
    qa = 4.0 * (1.0 - c * c)
    qb = 4.0 * c * (2.0 - S)
    qc = 4.0 * float(x @ x) - S * S
    if abs(qa) < 1e-14:
        roots = [] if abs(qb) < 1e-14 else [-qc / qb]
    else:
        disc = qb * qb - 4.0 * qa * qc
        if disc < 0:
            return []
        sq = math.sqrt(disc)
        roots = [(-qb - sq) / (2 * qa), (-qb + sq) / (2 * qa)]
    model = rotational_cst(alpha)
    out = []
    for t in roots:
        r = float(model.eval(x + t * xi))
        if abs(abs(t) - r) < 1e-9 * (1.0 + r):
            out.append(t)
    return sorted(out)


def preimage_centers_detailed(model: RadiusModel, x, omega,
                              Y: Region | None = None):
    """Centers y with x on S(y) along the line x + t omega.

    Returns (centers, diverged_sides): centers is a list of at most two
    (2,) arrays, one from each side of x; diverged_sides names the sides
    whose iteration found no fixed point.
    """
    x = np.asarray(x, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    if abs(np.linalg.norm(omega) - 1.0) > 1e-12:
        raise ValueError("omega must be a unit vector")

    if model.family == "RotationalCST":
        roots = rotational_center_roots(model.params["alpha"], x, omega)
        sided = {"plus": [t for t in roots if t > 0],
                 "minus": [-t for t in roots if t < 0]}
        results = {side: (ts[0], True) if ts else (0.0, False)
                   for side, ts in sided.items()}
    else:
        results = {
            "plus": _fixed_point_side(model, x, omega),
            "minus": _fixed_point_side(model, x, -omega),
        }

    centers, diverged = [], []
    for side, sign in (("plus", 1.0), ("minus", -1.0)):
        t, ok = results[side]
        if not ok:
            diverged.append(side)
            continue
        y = x + sign * t * omega
        if Y is None or bool(Y.contains(y[None, :])[0]):
            centers.append(y)
    return centers, diverged


def preimage_centers(model: RadiusModel, x, omega,
                     Y: Region | None = None) -> list[np.ndarray]:
    """Sphere centers through x along +/- omega, filtered to Y."""
    return preimage_centers_detailed(model, x, omega, Y)[0]


def artifact_set_sample(model: RadiusModel, object_region: Region,
                        center_region: Region, n_samples: int
                        ) -> list[np.ndarray]:
    """Artifact points generated by spheres meeting the object region.

    Samples x in the object region and directions omega, finds incident
    sphere centers inside center_region, and maps each incidence through
    artifact_point.  Empty when no sphere connects the two regions.
    """
    n_x = max(int(math.sqrt(n_samples)), 1)
    n_w = max(n_samples // n_x, 1)
    xs = sample_region(object_region, n_x, with_anchors=False)
    angles = (np.arange(n_w) + 0.5) * (2.0 * np.pi / n_w)
    omegas = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    out = []
    for x in xs:
        for w in omegas:
            centers, _ = preimage_centers_detailed(model, x, w, center_region)
            for y in centers:
                try:
                    out.append(artifact_point(model, y, x))
                except (ValueError, DegenerateLineError):
                    continue
    return out


@dataclass
class GeometryReport:
    """Outcome of a weak-stability audit over (object region, center set)."""

    max_grad_norm: float
    norm_ok: bool
    strong_norm_constant: float | None
    artifact_samples: list
    bolker_ok: bool
    coverage_ok: bool
    notes: str = ""

    def to_json(self) -> str:
        payload = {
            "max_grad_norm": self.max_grad_norm,
            "norm_ok": self.norm_ok,
            "strong_norm_constant": self.strong_norm_constant,
            "artifact_samples": [[list(map(float, x)), list(map(float, xh))]
                                 for x, xh in self.artifact_samples],
            "bolker_ok": self.bolker_ok,
            "coverage_ok": self.coverage_ok,
            "notes": self.notes,
        }
        return json.dumps(payload, sort_keys=True)


def weak_stability_audit(model: RadiusModel, object_region: Region,
                         center_region: Region, n_x: int, n_omega: int
                         ) -> GeometryReport:
    """Audit visibility and artifact return for a geometry configuration.

    coverage_ok: every sampled point/direction pair has at least one
    incident sphere center inside the center set.  bolker_ok: no sampled
    artifact point falls back inside the (slightly eroded) object region.
    """
    if n_x < 4 or n_omega < 4:
        raise ValueError("need n_x, n_omega >= 4")
    xs = sample_region(object_region, n_x)
    origin = np.zeros((1, 2))
    if bool(object_region.contains(origin)[0]) and \
            not np.any(np.all(xs == 0.0, axis=1)):
        xs = np.concatenate([xs, origin])
    angles = (np.arange(n_omega) + 0.5) * (np.pi / n_omega)
    omegas = np.stack([np.cos(angles), np.sin(angles)], axis=1)

    grad_max, _ = check_norm_inequality(model, center_region,
                                        max(n_x * n_omega, 256))
    margin = 1e-6 * object_region.diameter()

    coverage_ok = True
    bolker_ok = True
    samples = []
    notes = []
    for x in xs:
        for w in omegas:
            centers, _ = preimage_centers_detailed(model, x, w, center_region)
            if not centers:
                if coverage_ok:
                    notes.append(
                        f"coverage failure witness x={x.tolist()}, "
                        f"omega={w.tolist()}")
                coverage_ok = False
                continue
            for y in centers:
                try:
                    xh = artifact_point(model, y, x)
                except (ValueError, DegenerateLineError):
                    continue
                if len(samples) < 512:
                    samples.append((x.copy(), xh))
                if bool(object_region.contains(xh[None, :], margin)[0]):
                    if bolker_ok:
                        notes.append(
                            f"artifact return witness x={x.tolist()}, "
                            f"xhat={xh.tolist()}")
                    bolker_ok = False
    return GeometryReport(
        max_grad_norm=grad_max,
        norm_ok=grad_max < 1.0,
        strong_norm_constant=grad_max if grad_max < 1.0 else None,
        artifact_samples=samples,
        bolker_ok=bolker_ok,
        coverage_ok=coverage_ok,
        notes="; ".join(notes),
    )


def hemisphere_centers(x, r: float, n: int) -> np.ndarray:
    """n centers sampling the half-circle of radius r facing away from 0.

    These are the centers y on S(x) with (y - x) . x/|x| >= 0; they are the
    sphere centers guaranteed to see every wavefront direction at x in the
    limited-data fixed-radius setup.
    """
    x = np.asarray(x, dtype=np.float64)
    nx = np.linalg.norm(x)
    if nx == 0.0:
        raise ValueError("x must be nonzero")
    if n < 1:
        raise ValueError("n must be >= 1")
    phi = math.atan2(x[1], x[0])
    theta = np.linspace(phi - np.pi / 2, phi + np.pi / 2, n)
    return x + r * np.stack([np.cos(theta), np.sin(theta)], axis=1)
