"""``patchsynth`` command line.

Exit codes: 0 ok, 2 I/O or usage error, 3 prior lacks a capability,
4 invalid patch geometry, 5 solver divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .exceptions import CapabilityError, CoverageError, DivergenceError
from .image import NoiseSpec, add_awgn, psnr
from .io import atomic_write_bytes, read_image, write_f64, write_pgm
from .patches import operator_report, plan_grid
from .priors import make_prior
from .sampler import SampleJob, sample_prior_image
from .solvers import AdmmConfig, HqsConfig, METHODS

EXIT_OK = 0
EXIT_IO = 2
EXIT_CAPABILITY = 3
EXIT_GEOMETRY = 4
EXIT_DIVERGENCE = 5


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _add_geometry(p):
    g = p.add_argument_group("patch geometry")
    g.add_argument("--patch", type=int, default=8, help="square patch side (default 8)")
    g.add_argument("--patch-h", type=int, help="patch height, overrides --patch")
    g.add_argument("--patch-w", type=int, help="patch width, overrides --patch")
    g.add_argument("--stride", type=int, default=4, help="stride in both directions (default 4)")
    g.add_argument("--stride-y", type=int)
    g.add_argument("--stride-x", type=int)
    g.add_argument("--boundary", choices=["clip", "periodic"], default="clip")


def _add_prior(p):
    p.add_argument("--prior", default="dct-l1", help="l1, l2, dct-l1, dct-l2, gmm or gmm:<path>")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="prior weight")
    p.add_argument("--gmm-path", help="GMM parameter file for --prior gmm")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patchsynth", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("add-noise", help="add white Gaussian noise to an image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")

    p = sub.add_parser("denoise", help="denoise an image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="clean image for PSNR reporting")
    p.add_argument("--method", choices=sorted(METHODS), default="synthesis-admm")
    _add_prior(p)
    _add_geometry(p)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--rho", type=float)
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--tol-abs", type=float, default=1e-6)
    p.add_argument("--tol-rel", type=float, default=1e-4)
    p.add_argument("--beta-init", type=float)
    p.add_argument("--beta-growth", type=float, default=4.0)
    p.add_argument("--beta-stages", type=int, default=6)
    p.add_argument("--trace-out", help="trace file (default: <out>.trace.txt)")
    p.add_argument("--config")

    p = sub.add_parser("sample-prior", help="draw images from the patch-synthesis prior")
    p.add_argument("--out", required=True, help="output directory")
    _add_prior(p)
    _add_geometry(p)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--config")

    for name in ("report-operators", "make-operators-report"):
        p = sub.add_parser(name, help="summarise the patch operators for a geometry")
        _add_geometry(p)
        p.add_argument("--height", type=int, default=64)
        p.add_argument("--width", type=int, default=64)
        p.add_argument("--in", dest="input", help="take the image size from this file")
        p.add_argument("--config")
    return parser


def _load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}", EXIT_IO) from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid JSON in {path}: {exc}", EXIT_IO) from exc
    if not isinstance(data, dict):
        raise CliError(f"config {path} must be a JSON object", EXIT_IO)
    renames = {"in": "input", "lambda": "lam"}
    out = {}
    for key, value in data.items():
        dest = key.lstrip("-").replace("-", "_")
        out[renames.get(dest, dest)] = value
    return out


def parse_args(argv=None) -> argparse.Namespace:
    """Parse flags; values from ``--config`` act as defaults so flags win."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    command = next((a for a in argv if a in COMMANDS), None)
    config = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            config = argv[i + 1]
        elif a.startswith("--config="):
            config = a.split("=", 1)[1]
    if command is not None and config is not None:
        overrides = _load_config(config)
        sub = parser._subparsers._group_actions[0].choices[command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise CliError(f"unknown config keys: {', '.join(unknown)}", EXIT_IO)
        sub.set_defaults(**overrides)
        # required flags may come from the config file
        for action in sub._actions:
            if action.required and action.dest in overrides:
                action.required = False
    return parser.parse_args(argv)


def _geometry(args, height, width):
    ph = args.patch_h or args.patch
    pw = args.patch_w or args.patch
    sy = args.stride_y or args.stride
    sx = args.stride_x or args.stride
    try:
        return plan_grid(height, width, ph, pw, sy, sx, args.boundary)
    except CoverageError as exc:
        raise CliError(str(exc), EXIT_GEOMETRY) from exc
    except ValueError as exc:
        raise CliError(f"invalid geometry: {exc}", EXIT_GEOMETRY) from exc


def _read(path):
    if not Path(path).is_file():
        raise CliError(f"cannot read {path}: no such file", EXIT_IO)
    try:
        return read_image(path)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc


def _check_out_dir(path):
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise CliError(f"output directory {parent} does not exist", EXIT_IO)


def _prior(args, grid):
    try:
        return make_prior(args.prior, args.lam, grid.patch_height, grid.patch_width, gmm_path=args.gmm_path)
    except OSError as exc:
        raise CliError(f"cannot read prior parameters: {exc}", EXIT_IO) from exc
    except ValueError as exc:
        raise CliError(str(exc), EXIT_IO) from exc


def f64_path(out) -> Path:
    return Path(out).with_suffix(".f64")


def cmd_add_noise(args) -> int:
    img = _read(args.input)
    _check_out_dir(args.out)
    try:
        spec = NoiseSpec(args.sigma, args.seed)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_IO) from exc
    noisy = add_awgn(img, spec)
    write_pgm(args.out, noisy)
    write_f64(f64_path(args.out), noisy)
    print(f"sigma={spec.sigma!r}")
    print(f"seed={spec.seed}")
    return EXIT_OK


def cmd_denoise(args) -> int:
    y = _read(args.input)
    truth = _read(args.truth) if args.truth else None
    _check_out_dir(args.out)
    trace_path = Path(args.trace_out) if args.trace_out else Path(args.out).with_suffix(".trace.txt")
    _check_out_dir(trace_path)
    grid = _geometry(args, y.height, y.width)
    prior = _prior(args, grid)
    try:
        if args.method == "analysis-hqs":
            cfg = HqsConfig(args.sigma, args.beta_init, args.beta_growth, args.beta_stages)
        else:
            cfg = AdmmConfig(args.sigma, args.rho, args.max_iter, args.tol_abs, args.tol_rel)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_IO) from exc
    start = time.perf_counter()
    try:
        result = METHODS[args.method](y, grid, prior, cfg)
    except DivergenceError as exc:
        raise CliError(f"solver diverged: {exc}", EXIT_DIVERGENCE) from exc
    elapsed = time.perf_counter() - start
    write_pgm(args.out, result.x_hat)
    write_f64(f64_path(args.out), result.x_hat)
    result.save_trace(trace_path)
    print(f"method={args.method}")
    print(f"objective={result.objective!r}")
    print(f"iterations={result.iterations}")
    print(f"converged={result.converged}")
    print(f"wall_time_s={elapsed:.3f}")
    if result.nonconvex_prior:
        print("warning=non-convex prior, no optimality guarantee")
    if truth is not None:
        print(f"psnr_in={psnr(y, truth):.4f}")
        print(f"psnr_out={psnr(result.x_hat, truth):.4f}")
    return EXIT_OK


def cmd_sample_prior(args) -> int:
    if args.count < 1:
        raise CliError("--count must be a positive integer", EXIT_IO)
    out_dir = Path(args.out)
    grid = _geometry(args, args.height, args.width)
    prior = _prior(args, grid)
    try:
        job = SampleJob(grid, prior, args.seed, args.count)
    except CapabilityError as exc:
        raise CliError(f"prior cannot be sampled: {exc}", EXIT_CAPABILITY) from exc
    except ValueError as exc:
        raise CliError(str(exc), EXIT_IO) from exc
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out_dir}: {exc}", EXIT_IO) from exc
    files = []
    for i in range(job.count):
        name = f"sample_{i:04d}.pgm"
        write_pgm(out_dir / name, sample_prior_image(job, i))
        files.append(name)
    manifest = {
        "seed": job.seed,
        "count": job.count,
        "prior": {"spec": args.prior, "lambda": args.lam, "gmm_path": args.gmm_path, "repr": repr(prior)},
        "grid": grid.describe(),
        "files": files,
    }
    atomic_write_bytes(out_dir / "manifest.json", (json.dumps(manifest, indent=2) + "\n").encode())
    print(f"wrote {job.count} samples to {out_dir}")
    return EXIT_OK


def cmd_report_operators(args) -> int:
    height, width = args.height, args.width
    if args.input:
        img = _read(args.input)
        height, width = img.height, img.width
    grid = _geometry(args, height, width)
    rep = operator_report(grid)
    print(f"M={rep['M']}")
    print(f"n={rep['n']}")
    print(f"N={rep['N']}")
    hist = " ".join(f"{k}:{v}" for k, v in rep["count_histogram"].items())
    print(f"count_histogram={hist}")
    print(f"qqt_diag_min={rep['qqt_diag_min']!r}")
    print(f"qqt_diag_max={rep['qqt_diag_max']!r}")
    print(f"overlapping={str(rep['overlapping']).lower()}")
    return EXIT_OK


COMMANDS = {
    "add-noise": cmd_add_noise,
    "denoise": cmd_denoise,
    "sample-prior": cmd_sample_prior,
    "report-operators": cmd_report_operators,
    "make-operators-report": cmd_report_operators,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
