"""Command line front end.

::

    epp phantom --output truth.eppf --size 256
    epp synth   --input truth.eppf --output b.eppf --psf gaussian --sigma 5 --noise-level 0.01 --seed 7
    epp deblur  --input b.eppf --output x.eppf --basis dct --p 1.01 --figures figs/
    epp eval    --input x.eppf --truth truth.eppf

Every failure prints one line ``EPP-ERR <CODE>: <message>`` to stderr and
exits with the code's status. JSON reports are flat, snake_case and carry
``"schema": 1``.
"""

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .basis import UnsupportedOperatorError, build_dct_basis, build_svd_basis
from .metrics import UndefinedMetricError, quality_report
from .operators import (DimensionError, InvalidParameterError, apply_model, blur_from_psf,
                        make_gaussian_psf, make_out_of_focus_psf)
from .phantom import shapes_phantom
from .pipeline import UniquenessError, epp_solve
from .pnorm import IrlsOptions
from .rasters import ImageFormatError, read_image, write_image
from .select import DEFAULT_SHRINK

SCHEMA = 1

EXIT = {
    "INTERNAL": 1,
    "USAGE": 2,
    "PARAM": 3,
    "IO": 4,
    "FORMAT": 5,
    "DIMENSION": 6,
    "UNIQUENESS": 7,
}

_BASES = {"dct": build_dct_basis, "svd": build_svd_basis}


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("USAGE", message)


def _fail(code, message):
    line = " ".join(str(message).split())
    sys.stderr.write(f"EPP-ERR {code}: {line}\n")
    return EXIT[code]


# ---------------------------------------------------------------- I/O helpers

def _read(path):
    try:
        return read_image(path)
    except ImageFormatError as exc:
        raise CliError("FORMAT", str(exc)) from exc
    except OSError as exc:
        raise CliError("IO", f"cannot read {path}: {exc.strerror or exc}") from exc


def _write(image, path):
    try:
        write_image(image, path)
    except OSError as exc:
        raise CliError("IO", f"cannot write {path}: {exc.strerror or exc}") from exc


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return _jsonable(value.item())
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _dumps(record):
    return json.dumps({k: _jsonable(v) for k, v in record.items()}, sort_keys=True)


def _write_json(record, path):
    text = _dumps(record) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as f:
            f.write(text)
    except OSError as exc:
        raise CliError("IO", f"cannot write {path}: {exc.strerror or exc}") from exc


def _read_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as exc:
        raise CliError("IO", f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError("FORMAT", f"{path}: invalid JSON ({exc.msg})") from exc


def _suffixed(path, tag):
    stem, ext = os.path.splitext(path)
    return f"{stem}_{tag}{ext}"


# ------------------------------------------------------------------- PSF spec

def _add_psf_args(p, required):
    g = p.add_argument_group("point-spread function")
    g.add_argument("--psf", choices=("gaussian", "out_of_focus"), required=required,
                   help="PSF kind" + ("" if required else " (default: taken from the input's sidecar)"))
    g.add_argument("--sigma", type=float, help="Gaussian width in pixels")
    g.add_argument("--radius", type=float, help="out-of-focus disk radius in pixels")
    g.add_argument("--psf-size", type=int,
                   help="odd kernel side (default: 4*ceil(sigma)+1 or 2*ceil(radius)+1)")


def _psf_spec(args):
    if args.psf == "gaussian":
        if args.sigma is None:
            raise CliError("PARAM", "--psf gaussian needs --sigma")
        return {"psf_kind": "gaussian", "psf_sigma": args.sigma, "psf_size": args.psf_size}
    if args.radius is None:
        raise CliError("PARAM", "--psf out_of_focus needs --radius")
    return {"psf_kind": "out_of_focus", "psf_radius": args.radius, "psf_size": args.psf_size}


def _make_psf(spec):
    try:
        if spec["psf_kind"] == "gaussian":
            return make_gaussian_psf(spec["psf_sigma"], spec.get("psf_size"))
        if spec["psf_kind"] == "out_of_focus":
            return make_out_of_focus_psf(spec["psf_radius"], spec.get("psf_size"))
    except InvalidParameterError as exc:
        raise CliError("PARAM", str(exc)) from exc
    except (KeyError, TypeError) as exc:
        raise CliError("FORMAT", f"incomplete PSF description: {exc}") from exc
    raise CliError("FORMAT", f"unknown PSF kind {spec['psf_kind']!r}")


def _psf_record(psf, spec):
    rec = {"psf_kind": spec["psf_kind"], "psf_size": int(psf.size)}
    for key in ("psf_sigma", "psf_radius"):
        if key in spec:
            rec[key] = float(spec[key])
    return rec


def _blur(image, spec):
    m = image.shape[0]
    if image.shape != (m, m):
        raise CliError("DIMENSION", f"images must be square, got {image.shape[0]}x{image.shape[1]}")
    psf = _make_psf(spec)
    if psf.size > m:
        raise CliError("PARAM", f"PSF of size {psf.size} exceeds the {m}x{m} image")
    return psf, blur_from_psf(psf, m)


# ------------------------------------------------------------------- commands

def cmd_phantom(args):
    if args.size < 8:
        raise CliError("PARAM", f"--size must be at least 8, got {args.size}")
    _write(shapes_phantom(args.size), args.output)
    return 0


def cmd_synth(args):
    if not args.noise_level >= 0:
        raise CliError("PARAM", f"--noise-level must be nonnegative, got {args.noise_level}")
    if not 0 <= args.seed < 2**64:
        raise CliError("PARAM", "--seed must be a 64-bit unsigned integer")
    truth = _read(args.input)
    spec = _psf_spec(args)
    psf, blur = _blur(truth, spec)
    clean = apply_model(blur, truth)
    rng = np.random.default_rng(args.seed)
    eta = rng.standard_normal(clean.shape)
    clean_norm = np.linalg.norm(clean)
    if args.noise_level == 0 or clean_norm == 0:
        eta[:] = 0.0
    else:
        eta *= args.noise_level * clean_norm / np.linalg.norm(eta)
    b = clean + eta
    _write(b, args.output)
    b_norm = np.linalg.norm(b)
    eta_norm = np.linalg.norm(eta)
    sidecar = {
        "schema": SCHEMA,
        "command": "synth",
        "truth": args.input,
        "output": args.output,
        "m": int(truth.shape[0]),
        **_psf_record(psf, spec),
        "exact_psf": bool(blur.exact),
        "noise": "gaussian_white",
        "noise_level_requested": float(args.noise_level),
        "noise_level_vs_blurred": float(eta_norm / clean_norm) if clean_norm else 0.0,
        "noise_level": float(eta_norm / b_norm) if b_norm else 0.0,
        "seed": int(args.seed),
    }
    _write_json(sidecar, args.sidecar or args.output + ".json")
    return 0


def _validate_p(p):
    if not 1.0 < p < 2.0:
        raise CliError("PARAM", f"--p {p} out of range (valid: 1 < p < 2)")


def _irls_options(args):
    _validate_p(args.p)
    try:
        return IrlsOptions(
            p=args.p, max_outer=args.max_outer, outer_tol=args.outer_tol, inner_tol=args.inner_tol,
            gmres_restart=args.gmres_restart, gmres_max=args.gmres_max,
            weight_floor=args.weight_floor, mg_presmooth=args.mg_presmooth,
            mg_postsmooth=args.mg_postsmooth, mg_cycles=args.mg_cycles,
            mg_interpolation=args.mg_interpolation, precondition=not args.no_precondition)
    except ValueError as exc:
        raise CliError("PARAM", str(exc)) from exc


def _deblur_psf_spec(args):
    if args.psf is not None:
        return _psf_spec(args)
    sidecar = args.sidecar or args.input + ".json"
    if not os.path.exists(sidecar):
        raise CliError("PARAM", f"no --psf given and no sidecar at {sidecar}")
    meta = _read_json(sidecar)
    if "psf_kind" not in meta:
        raise CliError("FORMAT", f"{sidecar}: missing psf_kind")
    return {k: v for k, v in meta.items() if k.startswith("psf_")}


def _figures(directory, b, result):
    from . import plotting

    try:
        os.makedirs(directory, exist_ok=True)
        figs = {
            "decomposition.png": plotting.decomposition_figure(b, result.x_k, result.x_0, result.x),
            "gcv.png": plotting.gcv_figure(result.gcv, result.k),
            "convergence.png": plotting.convergence_figure(result.trace),
        }
        for name, fig in figs.items():
            plotting.save(fig, os.path.join(directory, name))
    except OSError as exc:
        raise CliError("IO", f"cannot write figures to {directory}: {exc.strerror or exc}") from exc
    return sorted(figs)


def cmd_deblur(args):
    opts = _irls_options(args)
    if args.shrink is not None and not 0 < args.shrink <= 1:
        raise CliError("PARAM", f"--shrink must lie in (0, 1], got {args.shrink}")
    b = _read(args.input)
    spec = _deblur_psf_spec(args)
    psf, blur = _blur(b, spec)
    try:
        basis = _BASES[args.basis](blur)
    except UnsupportedOperatorError as exc:
        raise CliError("PARAM", str(exc)) from exc
    n = b.size
    if args.k is not None and not 1 <= args.k < n:
        raise CliError("PARAM", f"--k must lie in [1, {n - 1}], got {args.k}")
    try:
        result = epp_solve(blur, basis, b, opts, k=args.k, shrink=args.shrink, k_max=args.k_max)
    except UniquenessError as exc:
        raise CliError("UNIQUENESS", str(exc)) from exc

    _write(result.x, args.output)
    report = {"schema": SCHEMA, "command": "deblur", "input": args.input, "output": args.output,
              "m": int(b.shape[0]), **_psf_record(psf, spec)}
    diag = dict(result.diagnostics)
    diag.pop("k")
    report.update(diag)
    report.update({"used_k": int(result.k), "k_source": "user" if args.k is not None else "gcv",
                   "shrink": float(args.shrink), "outer_tol": opts.outer_tol,
                   "inner_tol": opts.inner_tol, "max_outer": opts.max_outer})
    if args.components:
        report["x_k_output"] = _suffixed(args.output, "xk")
        report["x_0_output"] = _suffixed(args.output, "x0")
        _write(result.x_k, report["x_k_output"])
        _write(result.x_0, report["x_0_output"])
    if args.truth:
        truth = _read(args.truth)
        if truth.shape != b.shape:
            raise CliError("DIMENSION", f"truth is {truth.shape}, blurred image is {b.shape}")
        for tag, img in (("x_k", result.x_k), ("restored", result.x)):
            q = quality_report(img, truth)
            report[f"{tag}_relative_error"] = q.relative_error
            report[f"{tag}_psnr_db"] = q.psnr_db
            report[f"{tag}_mssim"] = q.mssim
    if args.figures:
        report["figures"] = [os.path.join(args.figures, f) for f in _figures(args.figures, b, result)]
    _write_json(report, args.report or args.output + ".json")
    return 0


def _eval_pair(restored_path, truth_path, args, noise):
    x = _read(restored_path)
    truth = _read(truth_path)
    if x.shape != truth.shape:
        raise CliError("DIMENSION", f"{restored_path} is {x.shape[0]}x{x.shape[1]}, "
                                    f"{truth_path} is {truth.shape[0]}x{truth.shape[1]}")
    try:
        q = quality_report(x, truth, data_range=args.data_range, noise=noise)
    except UndefinedMetricError as exc:
        raise CliError("PARAM", str(exc)) from exc
    return q.as_dict()


def _sidecar_noise(path):
    if path and os.path.exists(path):
        value = _read_json(path).get("noise_level")
        return None if value is None else float(value)
    return None


def cmd_eval(args):
    if args.data_range is not None and not args.data_range > 0:
        raise CliError("PARAM", "--data-range must be positive")
    if os.path.isdir(args.input):
        if not os.path.isdir(args.truth):
            raise CliError("PARAM", "batch mode needs --truth to be a directory as well")
        names = sorted(f for f in os.listdir(args.input)
                       if os.path.isfile(os.path.join(args.input, f)) and not f.endswith(".json"))
        lines = []
        for name in names:
            truth_path = os.path.join(args.truth, name)
            if not os.path.exists(truth_path):
                raise CliError("IO", f"no truth image {truth_path} for {name}")
            rec = _eval_pair(os.path.join(args.input, name), truth_path, args,
                             _sidecar_noise(os.path.join(args.input, name) + ".json"))
            rec["name"] = name
            lines.append(_dumps(rec))
        text = "".join(line + "\n" for line in lines)
        if args.output in (None, "-"):
            sys.stdout.write(text)
        else:
            try:
                with open(args.output, "w") as f:
                    f.write(text)
            except OSError as exc:
                raise CliError("IO", f"cannot write {args.output}: {exc.strerror or exc}") from exc
        return 0
    noise = args.noise_level
    if noise is None:
        noise = _sidecar_noise(args.sidecar)
    _write_json(_eval_pair(args.input, args.truth, args, noise), args.output)
    return 0


# --------------------------------------------------------------------- parser

def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="epp", description="Edge-preserving projection deblurring.",
                     formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"epp {__version__}")
    parser.add_argument("--log-level", default="WARNING",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phantom", help="write the synthetic shapes test image", formatter_class=fmt)
    p.add_argument("--output", required=True, help="image path (.pgm or float raster)")
    p.add_argument("--size", type=int, default=256, help="side length m")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("synth", help="blur a truth image and add seeded Gaussian noise",
                       formatter_class=fmt)
    p.add_argument("--input", required=True, help="truth image")
    p.add_argument("--output", required=True, help="blurred, noisy image")
    p.add_argument("--sidecar", help="JSON sidecar path (default: <output>.json)")
    _add_psf_args(p, required=True)
    p.add_argument("--noise-level", type=float, default=0.01,
                   help="||eta|| / ||A x|| of the added noise")
    p.add_argument("--seed", type=int, default=0, help="noise generator seed")
    p.set_defaults(func=cmd_synth)

    d = IrlsOptions()
    p = sub.add_parser("deblur", help="restore an image with EPP", formatter_class=fmt)
    p.add_argument("--input", required=True, help="blurred, noisy image")
    p.add_argument("--output", required=True, help="restored image")
    p.add_argument("--sidecar", help="synth sidecar supplying the PSF (default: <input>.json)")
    p.add_argument("--report", help="JSON report path (default: <output>.json)")
    p.add_argument("--components", action="store_true",
                   help="also write x_k and x_0 as <output>_xk and <output>_x0")
    p.add_argument("--figures", metavar="DIR", help="write PNG report figures into DIR")
    p.add_argument("--truth", help="truth image; adds quality metrics to the report")
    _add_psf_args(p, required=False)
    p.add_argument("--basis", choices=sorted(_BASES), default="dct")
    p.add_argument("--p", type=float, default=d.p, help="norm exponent, 1 < p < 2")
    p.add_argument("--k", type=int, help="subspace dimension (overrides GCV)")
    p.add_argument("--shrink", type=float, default=DEFAULT_SHRINK, help="factor on the GCV minimizer")
    p.add_argument("--k-max", type=int, help="largest k searched by GCV (default: n // 2)")
    s = p.add_argument_group("solver")
    s.add_argument("--max-outer", type=int, default=d.max_outer, help="IRLS iteration cap")
    s.add_argument("--outer-tol", type=float, default=d.outer_tol, help="relative step tolerance")
    s.add_argument("--inner-tol", type=float, default=d.inner_tol, help="GMRES relative tolerance")
    s.add_argument("--gmres-restart", type=int, default=d.gmres_restart)
    s.add_argument("--gmres-max", type=int, default=d.gmres_max, help="GMRES iteration cap per solve")
    s.add_argument("--weight-floor", type=float, default=d.weight_floor,
                   help="residual floor relative to its max norm in the IRLS weights")
    s.add_argument("--mg-presmooth", type=int, default=d.mg_presmooth)
    s.add_argument("--mg-postsmooth", type=int, default=d.mg_postsmooth)
    s.add_argument("--mg-cycles", type=int, default=d.mg_cycles)
    s.add_argument("--mg-interpolation", choices=("operator", "bilinear"), default=d.mg_interpolation)
    s.add_argument("--no-precondition", action="store_true", help="plain GMRES")
    p.set_defaults(func=cmd_deblur)

    p = sub.add_parser("eval", help="quality metrics against a truth image", formatter_class=fmt)
    p.add_argument("--input", required=True, help="restored image, or a directory for batch mode")
    p.add_argument("--truth", required=True, help="truth image, or a directory of same-named files")
    p.add_argument("--output", help="JSON output path (default: stdout)")
    p.add_argument("--data-range", type=float, help="dynamic range (default: truth max - min)")
    p.add_argument("--noise-level", type=float, help="noise level to record in the report")
    p.add_argument("--sidecar", help="synth sidecar to take the noise level from")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except CliError as exc:
        return _fail(exc.code, exc)
    except DimensionError as exc:
        return _fail("DIMENSION", exc)
    except (InvalidParameterError, ValueError) as exc:
        return _fail("PARAM", exc)
    except Exception as exc:  # noqa: BLE001 - single-line contract for every path
        return _fail("INTERNAL", f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
