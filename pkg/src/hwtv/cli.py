"""Command-line front end: degrade, restore, metrics, and parameter sweeps."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import imgcore, solver, synth
from .imgcore import (
    PGM8,
    RAW_F32,
    DimensionMismatchError,
    FormatError,
    ImageBuffer,
    InfiniteIsnrError,
    MetricsReport,
)
from .linops import BlurSpec
from .solver import DivergenceError, SolverConfig

SWEEP_FIELDS = ("tau", "r", "isnr", "ssim", "iterations", "wall_ms", "final_discrepancy")

USAGE_ERROR = 2
DIVERGENCE_ERROR = 3


@dataclass(frozen=True)
class SweepGrid:
    """Cartesian (tau, r) grid for one solver mode and TV flavor."""

    tau_values: tuple[float, ...]
    r_values: tuple[int, ...]
    mode: str
    p: int

    def __post_init__(self):
        if not self.tau_values or not self.r_values:
            raise ValueError("sweep grids must be nonempty")
        if any(t <= 0 for t in self.tau_values):
            raise ValueError("tau values must be positive")
        if any(r < 1 for r in self.r_values):
            raise ValueError("radius values must be positive integers")


@dataclass(frozen=True)
class SweepRow:
    """One sweep cell; metric fields are NaN when the cell diverged."""

    tau: float
    r: int
    isnr: float
    ssim: float
    iterations: int
    wall_ms: float
    final_discrepancy: float


def _load(path: str) -> ImageBuffer:
    return imgcore.read_image(path, imgcore.detect_format(path))


def _blur_from_args(args) -> BlurSpec:
    band = getattr(args, "blur_band", 0) or 0
    if band == 0:
        return BlurSpec(identity=True)
    return BlurSpec(band=band, sigma=args.blur_sigma)


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def parse_grid(text: str, cast):
    """Parse "start:step:stop" (inclusive) or a comma-separated value list."""
    values = []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid must be start:step:stop, got {text!r}")
        start, step, stop = (float(part) for part in parts)
        if step <= 0:
            raise ValueError("grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [cast(start + i * step) for i in range(max(count, 0))]
    else:
        values = [cast(item) for item in text.split(",") if item.strip()]
    if not values:
        raise ValueError(f"empty grid: {text!r}")
    return values


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_degrade(args) -> int:
    clean = _load(args.infile)
    spec = synth.DegradationSpec(
        blur=_blur_from_args(args), sigma=args.noise_sigma, seed=args.seed
    )
    degraded = synth.degrade(clean, spec)
    imgcore.write_image(degraded, args.out, args.format)
    _print_json(
        {
            "in": args.infile,
            "out": args.out,
            "blur_band": 0 if spec.blur.identity else spec.blur.band,
            "blur_sigma": None if spec.blur.identity else spec.blur.sigma,
            "noise_sigma": spec.sigma,
            "seed": spec.seed,
        }
    )
    return 0


def _config_from_args(args) -> SolverConfig:
    variant = "paper_verbatim" if args.aniso_prox == "paper" else "exact"
    return SolverConfig(
        p=args.p,
        tau=args.tau,
        r=args.radius,
        mode=args.mode,
        beta_t=args.beta_t,
        beta_w=args.beta_w,
        eps_floor=args.eps_floor,
        max_iter=args.max_iter,
        tol=args.tol,
        aniso_prox=variant,
    )


def _export_alpha(alpha_values: np.ndarray, path: str, fmt: str) -> None:
    # pgm8 gets a min-max rescale to [0, 1]; raw-f32 keeps raw weights.
    if fmt == PGM8:
        low = float(alpha_values.min())
        span = float(alpha_values.max()) - low
        scaled = (alpha_values - low) / span if span > 0 else np.zeros_like(alpha_values)
        imgcore.write_image(ImageBuffer(scaled), path, PGM8)
    else:
        imgcore.write_image(ImageBuffer(alpha_values), path, RAW_F32)


def cmd_restore(args) -> int:
    degraded = _load(args.infile)
    cfg = _config_from_args(args)
    result = solver.restore(degraded, _blur_from_args(args), args.noise_sigma, cfg)
    imgcore.write_image(result.u_star, args.out, args.format)
    if args.alpha_out:
        _export_alpha(result.alpha_final.values, args.alpha_out, args.format)
    if args.trace:
        solver.write_trace_csv(args.trace, result.trace)
    _print_json(
        {
            "iterations": result.iterations,
            "discrepancy": result.final_discrepancy,
            "mu": result.final_mu,
        }
    )
    return 0


def cmd_metrics(args) -> int:
    reference = _load(args.ref)
    degraded = _load(args.deg)
    reconstructed = _load(args.rec)
    try:
        isnr_value = imgcore.isnr(degraded, reference, reconstructed)
    except InfiniteIsnrError:
        isnr_value = float("inf")
    report = MetricsReport(isnr=isnr_value, ssim=imgcore.ssim(reconstructed, reference))
    _print_json(dataclasses.asdict(report))
    return 0


def _sweep_cell(payload) -> SweepRow:
    (tau, radius, g_data, true_data, band, blur_sigma, noise_sigma, mode, p,
     beta_t, beta_w, eps_floor, max_iter, tol, variant) = payload
    g = ImageBuffer(g_data)
    truth = ImageBuffer(true_data)
    blur = BlurSpec(identity=True) if band == 0 else BlurSpec(band=band, sigma=blur_sigma)
    cfg = SolverConfig(
        p=p, tau=tau, r=radius, mode=mode, beta_t=beta_t, beta_w=beta_w,
        eps_floor=eps_floor, max_iter=max_iter, tol=tol, aniso_prox=variant,
    )
    tick = time.perf_counter()
    try:
        result = solver.restore(g, blur, noise_sigma, cfg)
    except DivergenceError as exc:
        # flag the diverged cell with NaN metrics; the sweep itself goes on
        nan = float("nan")
        return SweepRow(
            tau=tau, r=radius, isnr=nan, ssim=nan, iterations=exc.iteration,
            wall_ms=(time.perf_counter() - tick) * 1e3, final_discrepancy=nan,
        )
    return SweepRow(
        tau=tau,
        r=radius,
        isnr=imgcore.isnr(g, truth, result.u_star),
        ssim=imgcore.ssim(result.u_star, truth),
        iterations=result.iterations,
        wall_ms=(time.perf_counter() - tick) * 1e3,
        final_discrepancy=result.final_discrepancy,
    )


def cmd_sweep(args) -> int:
    if args.jobs < 1:
        raise ValueError(f"--jobs must be at least 1, got {args.jobs}")
    truth = _load(args.true)
    degraded = _load(args.infile)
    tau_values = parse_grid(args.tau_grid, float)
    r_values = parse_grid(args.radius_grid, lambda v: int(round(float(v))))
    grid = SweepGrid(
        tau_values=tuple(tau_values), r_values=tuple(r_values), mode=args.mode, p=args.p
    )
    variant = "paper_verbatim" if args.aniso_prox == "paper" else "exact"
    band = getattr(args, "blur_band", 0) or 0
    cells = [
        (tau, radius, degraded.data, truth.data, band, args.blur_sigma,
         args.noise_sigma, grid.mode, grid.p, args.beta_t, args.beta_w,
         args.eps_floor, args.max_iter, args.tol, variant)
        for tau in sorted(grid.tau_values)
        for radius in sorted(grid.r_values)
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(cell) for cell in cells]
    rows = sorted(results, key=lambda row: (row.tau, row.r))
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_FIELDS)
        for row in rows:
            writer.writerow([getattr(row, name) for name in SWEEP_FIELDS])
    return 0


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------

def _add_io_format(parser):
    parser.add_argument(
        "--format", choices=[PGM8, RAW_F32], default=PGM8,
        help="output image format (inputs are sniffed from their magic bytes)",
    )


def _add_blur_flags(parser):
    parser.add_argument(
        "--blur-band", type=int, default=0, metavar="N",
        help="blur kernel side length; 0 means identity (pure denoising)",
    )
    parser.add_argument(
        "--blur-sigma", type=float, default=1.0, metavar="S",
        help="blur kernel standard deviation in pixels",
    )


def _add_solver_flags(parser):
    parser.add_argument("--mode", choices=solver.MODES, default="hwtv")
    parser.add_argument("--p", type=int, choices=(1, 2), default=2,
                        help="TV flavor: 1 anisotropic, 2 isotropic")
    parser.add_argument("--beta-t", type=float, default=20.0)
    parser.add_argument("--beta-w", type=float, default=100.0)
    parser.add_argument("--eps-floor", type=float, default=1e-4)
    parser.add_argument("--max-iter", type=int, default=500)
    parser.add_argument("--tol", type=float, default=1e-5)
    parser.add_argument("--aniso-prox", choices=("exact", "paper"), default="exact",
                        help="p=1 proximal map: exact soft-thresholding or the "
                             "verbatim shrinkage formula")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hwtv",
        description="Space-variant TV restoration with automatic parameter selection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    deg = sub.add_parser("degrade", help="blur an image and add seeded Gaussian noise")
    deg.add_argument("--in", dest="infile", required=True)
    deg.add_argument("--out", required=True)
    deg.add_argument("--noise-sigma", type=float, required=True)
    deg.add_argument("--seed", type=int, default=0)
    _add_blur_flags(deg)
    _add_io_format(deg)
    deg.set_defaults(func=cmd_degrade)

    res = sub.add_parser("restore", help="run the adaptive ADMM restoration")
    res.add_argument("--in", dest="infile", required=True)
    res.add_argument("--out", required=True)
    res.add_argument("--noise-sigma", type=float, required=True)
    res.add_argument("--tau", type=float, default=1.0,
                     help="discrepancy factor (target residual = tau sigma sqrt(n))")
    res.add_argument("--radius", type=int, default=5,
                     help="window radius for the per-pixel weight estimate")
    res.add_argument("--alpha-out", default=None,
                     help="write the final weight map (min-max rescaled for pgm8)")
    res.add_argument("--trace", default=None, help="write per-iteration CSV trace")
    _add_blur_flags(res)
    _add_solver_flags(res)
    _add_io_format(res)
    res.set_defaults(func=cmd_restore)

    met = sub.add_parser("metrics", help="report ISNR and SSIM for a reconstruction")
    met.add_argument("--ref", required=True, help="ground-truth image")
    met.add_argument("--deg", required=True, help="degraded observation")
    met.add_argument("--rec", required=True, help="reconstruction to score")
    met.set_defaults(func=cmd_metrics)

    swp = sub.add_parser("sweep", help="grid-sweep (tau, r) and write a CSV of metrics")
    swp.add_argument("--true", required=True, help="ground-truth image")
    swp.add_argument("--in", dest="infile", required=True, help="degraded observation")
    swp.add_argument("--out", required=True, help="CSV output path")
    swp.add_argument("--noise-sigma", type=float, required=True)
    swp.add_argument("--tau-grid", default="0.85:0.01:1.05",
                     help="taus as start:step:stop or comma list")
    swp.add_argument("--radius-grid", default="2,6,10,14",
                     help="radii as start:step:stop or comma list")
    swp.add_argument("--jobs", type=int, default=1,
                     help="worker processes for sweep cells")
    _add_blur_flags(swp)
    _add_solver_flags(swp)
    swp.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"hwtv: {exc}", file=sys.stderr)
        return DIVERGENCE_ERROR
    except (FormatError, DimensionMismatchError, ValueError, OSError) as exc:
        print(f"hwtv: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
