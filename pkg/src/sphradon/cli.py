"""Command line interface.

Subcommands cover the main workflows: phantom rasterization, forward
projection, noise injection, iterative and filtered reconstruction, the
fixed-radius analytic inversion, the equidistant-family consistency
check, geometry audits, full experiment runs from a JSON config, and PNG
export.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .experiment import (ExperimentConfig, add_noise, audit_preset,
                         lsq_error, preset_config, run_experiment)
from .fileio import RasterIOError, export_png, read_raster, write_raster
from .geometry import constant_r, linear_cst, rotational_cst
from .grids import Image, Sinogram
from .harmonic import equidistant_integral, invert_constant_r, palamodov_map
from .phantoms import PhantomSpec, make_phantom
from .projector import CutoffProfile, assemble_forward, forward_project
from .recon import (ReconConfig, fbp_constant_r, fbp_linear_cst, landweber,
                    tv_reconstruct)

CONFIG_ERROR = 2
NUMERICAL_ERROR = 3


def _model(geometry, alpha, r):
    if geometry == "LinearCST":
        return linear_cst(alpha)
    if geometry == "RotationalCST":
        return rotational_cst(alpha)
    if geometry == "ConstantR":
        return constant_r(r)
    raise ValueError(f"unknown geometry {geometry!r}")


def _img_spec(args) -> Image:
    x0, x1, y0, y1 = args.extents
    return Image.zeros(args.nx, args.ny, x0, x1, y0, y1)


def _sino_spec(args) -> Sinogram:
    a1 = np.linspace(args.axis1[0], args.axis1[1], int(args.axis1[2]))
    if args.geometry == "LinearCST":
        a2 = np.linspace(args.axis2[0], args.axis2[1], int(args.axis2[2]))
    else:
        n = int(args.axis2[2])
        a2 = args.axis2[0] + np.arange(n) * (args.axis2[1] - args.axis2[0]) / n
    return Sinogram.zeros(args.geometry, a1, a2)


def _add_image_args(p):
    p.add_argument("--nx", type=int, default=100)
    p.add_argument("--ny", type=int, default=100)
    p.add_argument("--extents", type=float, nargs=4, required=True,
                   metavar=("XMIN", "XMAX", "YMIN", "YMAX"))


def _add_sino_args(p):
    p.add_argument("--geometry", required=True,
                   choices=["LinearCST", "RotationalCST", "ConstantR"])
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=1.25)
    p.add_argument("--axis1", type=float, nargs=3, required=True,
                   metavar=("LO", "HI", "N"),
                   help="first center coordinate: range and sample count")
    p.add_argument("--axis2", type=float, nargs=3, required=True,
                   metavar=("LO", "HI", "N"),
                   help="second center coordinate; HI is exclusive for "
                        "angular axes")
    p.add_argument("--quad", type=int, default=1024)


def cmd_phantom(args):
    spec = PhantomSpec(args.kind, center=tuple(args.center),
                       inner=args.inner, outer=args.outer,
                       amplitude=args.amplitude)
    img = make_phantom(spec, _img_spec(args))
    write_raster(img, args.out)
    return 0


def cmd_project(args):
    img = read_raster(args.input)
    if not isinstance(img, Image):
        raise ValueError("project expects an image raster")
    model = _model(args.geometry, args.alpha, args.radius)
    sino = forward_project(model, img, _sino_spec(args), args.quad)
    write_raster(sino, args.out)
    return 0


def cmd_noise(args):
    sino = read_raster(args.input)
    if not isinstance(sino, Sinogram):
        raise ValueError("noise expects a sinogram raster")
    write_raster(add_noise(sino, args.gamma, args.seed), args.out)
    return 0


def cmd_recon(args):
    sino = read_raster(args.input)
    if not isinstance(sino, Sinogram):
        raise ValueError("recon expects a sinogram raster")
    model = _model(sino.geometry_id, args.alpha, args.radius)
    cfg = ReconConfig(method=args.method, iterations=args.iterations,
                      step=args.step, lam_tv=args.lam_tv,
                      nonneg=not args.no_nonneg)
    op = assemble_forward(model, _img_spec(args), sino, args.quad)
    if args.method == "Landweber":
        img, log = landweber(op, sino, cfg)
    else:
        img, log = tv_reconstruct(op, sino, cfg)
    if not np.all(np.isfinite(img.values)):
        raise FloatingPointError("reconstruction diverged")
    write_raster(img, args.out)
    print(f"final log entry: {log[-1]:.6e}")
    return 0


def cmd_fbp(args):
    sino = read_raster(args.input)
    if not isinstance(sino, Sinogram):
        raise ValueError("fbp expects a sinogram raster")
    cut = None
    if args.cutoff is not None:
        cut = CutoffProfile(args.cutoff[0], args.cutoff[1])
    if sino.geometry_id == "LinearCST":
        img = fbp_linear_cst(sino, args.alpha, _img_spec(args), cut=cut)
    elif sino.geometry_id == "ConstantR":
        img = fbp_constant_r(sino, constant_r(args.radius), _img_spec(args),
                             cut=cut)
    else:
        raise ValueError(f"no FBP variant for {sino.geometry_id}")
    write_raster(img, args.out)
    return 0


def cmd_invert_constant_r(args):
    sino = read_raster(args.input)
    if not isinstance(sino, Sinogram) or sino.geometry_id != "ConstantR":
        raise ValueError("expected a ConstantR sinogram raster")
    img = invert_constant_r(sino, args.radius, args.inner, L=args.modes,
                            ridge=args.ridge, img_spec=_img_spec(args))
    if not np.all(np.isfinite(img.values)):
        raise FloatingPointError("analytic inversion produced non-finite "
                                 "values")
    write_raster(img, args.out)
    return 0


def cmd_palamodov_check(args):
    img = read_raster(args.input)
    if not isinstance(img, Image):
        raise ValueError("palamodov-check expects an image raster")
    model = rotational_cst(args.alpha)
    a1 = np.linspace(args.axis1[0], args.axis1[1], int(args.axis1[2]))
    n2 = int(args.axis2[2])
    a2 = args.axis2[0] + np.arange(n2) * (args.axis2[1] - args.axis2[0]) / n2
    sino = forward_project(model, img, Sinogram.zeros("RotationalCST", a1, a2),
                           args.quad)
    mapped, emap = palamodov_map(sino, args.alpha)
    worst = 0.0
    for i, lam in enumerate(mapped.axis1):
        for j, th in enumerate(mapped.axis2):
            direct = equidistant_integral(img, args.alpha, lam, th,
                                          quad=args.quad_check)
            worst = max(worst, abs(direct - mapped.grid[i, j]))
    scale = max(np.abs(mapped.values).max(), 1e-30)
    print(f"max abs deviation {worst:.3e} (relative {worst / scale:.3e})")
    if worst / scale > args.tol:
        raise FloatingPointError("equidistant-family consistency check "
                                 "failed")
    return 0


def cmd_audit_geometry(args):
    print(json.dumps(audit_preset(args.geometry), indent=1, sort_keys=True))
    return 0


def cmd_run(args):
    with open(args.config) as fh:
        raw = json.load(fh)
    ph = raw.pop("phantom")
    rc = raw.pop("recon", {})
    cut = raw.pop("cutoff", None)
    cfg = ExperimentConfig(
        phantom=PhantomSpec(ph["kind"], center=tuple(ph.get("center", (0, 0))),
                            inner=ph.get("inner", 0.0),
                            outer=ph.get("outer", 1.0),
                            angle_start=ph.get("angle_start", 0.0),
                            angle_end=ph.get("angle_end", 2 * np.pi),
                            amplitude=ph.get("amplitude", 1.0)),
        extents=tuple(raw.pop("extents")),
        axis1=np.asarray(raw.pop("axis1"), float),
        axis2=np.asarray(raw.pop("axis2"), float),
        recon=ReconConfig(**rc),
        cutoff=None if cut is None else CutoffProfile(*cut),
        **{k: (tuple(v) if k.endswith("_shape") else v)
           for k, v in raw.items()})
    if args.seed is not None:
        from dataclasses import replace
        cfg = replace(cfg, seed=args.seed)
    report = run_experiment(cfg, out_dir=args.out_dir)
    report.pop("_image")
    print(json.dumps(report, indent=1, sort_keys=True))
    return 0


def cmd_export_png(args):
    data = read_raster(args.input)
    window = tuple(args.window) if args.window else None
    export_png(data, args.out, window=window)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sphradon",
        description="spherical Radon tomography toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="rasterize a test phantom")
    p.add_argument("--kind", default="HalfAnnulus",
                   choices=["Disk", "Annulus", "HalfAnnulus"])
    p.add_argument("--center", type=float, nargs=2, default=(0.0, 0.0))
    p.add_argument("--inner", type=float, default=0.0)
    p.add_argument("--outer", type=float, default=1.0)
    p.add_argument("--amplitude", type=float, default=1.0)
    _add_image_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("project", help="forward project an image raster")
    p.add_argument("--input", required=True)
    _add_sino_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("noise", help="add scaled white noise to a sinogram")
    p.add_argument("--input", required=True)
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("recon", help="iterative reconstruction")
    p.add_argument("--input", required=True)
    p.add_argument("--method", default="Landweber",
                   choices=["Landweber", "TV"])
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--lam-tv", type=float, default=0.0)
    p.add_argument("--no-nonneg", action="store_true")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=1.25)
    p.add_argument("--quad", type=int, default=512)
    _add_image_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recon)

    p = sub.add_parser("fbp", help="filtered backprojection")
    p.add_argument("--input", required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=1.25)
    p.add_argument("--cutoff", type=float, nargs=2, default=None,
                   metavar=("B", "EPS"),
                   help="smooth cutoff start and transition width")
    _add_image_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fbp)

    p = sub.add_parser("invert-constant-r",
                       help="analytic fixed-radius inversion")
    p.add_argument("--input", required=True)
    p.add_argument("--radius", type=float, default=1.25)
    p.add_argument("--inner", type=float, default=0.25,
                   help="inner support radius of the annulus")
    p.add_argument("--modes", type=int, default=32)
    p.add_argument("--ridge", type=float, default=0.0)
    _add_image_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_invert_constant_r)

    p = sub.add_parser("palamodov-check",
                       help="verify rotational data against the "
                            "equidistant-family transform")
    p.add_argument("--input", required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--axis1", type=float, nargs=3, default=(0.5, 2.0, 6),
                   metavar=("LO", "HI", "N"))
    p.add_argument("--axis2", type=float, nargs=3,
                   default=(0.0, 2 * np.pi, 8), metavar=("LO", "HI", "N"))
    p.add_argument("--quad", type=int, default=1024)
    p.add_argument("--quad-check", type=int, default=777)
    p.add_argument("--tol", type=float, default=1e-2)
    p.set_defaults(func=cmd_palamodov_check)

    p = sub.add_parser("audit-geometry",
                       help="weak-stability audit of a preset geometry")
    p.add_argument("--geometry", required=True,
                   choices=["LinearCST", "RotationalCST", "ConstantR"])
    p.set_defaults(func=cmd_audit_geometry)

    p = sub.add_parser("run", help="full experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("export-png", help="render a raster to PNG")
    p.add_argument("--input", required=True)
    p.add_argument("--window", type=float, nargs=2, default=None,
                   metavar=("LO", "HI"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_png)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return CONFIG_ERROR if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ValueError, KeyError, TypeError, OSError, RasterIOError,
            json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    except (FloatingPointError, np.linalg.LinAlgError,
            ZeroDivisionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
