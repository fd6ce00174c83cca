"""Command-line entry point: simulate, invariant, classify, check-uniqueness,
validate.

Every command writes its artifacts plus a manifest sufficient to re-run it
bit-identically; wall-clock timings go to a separate log so the CSV/JSON
artifacts are deterministic for a fixed seed.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .absorbing import classify_1d, classify_2d
from .chain import ChainConfig, simulate
from .dirichlet import DirichletParams, cell_integrals
from .geometry import SimplexPoint
from .ifs import check_uniqueness
from .operators import GridDensity, SimplexGrid, power_iterate
from .render import save_classification_svg, save_density_svg
from .weights import (AffineWeights, ConstantWeights, WeightSpec,
                      WeightValidationError, load_weights)

EXIT_OK = 0
EXIT_VALIDATION_FAILURE = 1
EXIT_INPUT_ERROR = 2


def _write_manifest(out_dir: Path, command: str, args: dict, results: dict) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "args": args,
        "results": results,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_timing(out_dir: Path, command: str, seconds: float) -> None:
    with open(out_dir / "timings.log", "w") as fh:
        fh.write(f"{command}: {seconds:.3f} s\n")


def _load_spec(path: str) -> WeightSpec:
    return load_weights(path)


def _parse_start(text: str | None, dim: int) -> SimplexPoint:
    if text is None:
        return SimplexPoint(np.full(dim, 1.0 / (dim + 1)))
    values = [float(v) for v in text.split(",")]
    return SimplexPoint(values)


def _cmd_simulate(args) -> int:
    spec = _load_spec(args.spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = _parse_start(args.start, spec.dim)
    config = ChainConfig(spec=spec, start=start, steps=args.steps,
                         seed=args.seed, burn_in=args.burn_in)
    t0 = time.perf_counter()
    traj = simulate(config)
    traj.to_csv(out_dir / "trajectory.csv")
    _write_manifest(out_dir, "simulate", {
        "spec": str(args.spec), "steps": args.steps, "seed": args.seed,
        "burn_in": args.burn_in, "start": start.coords.tolist(),
    }, {"points": len(traj)})
    _write_timing(out_dir, "simulate", time.perf_counter() - t0)
    return EXIT_OK


def _analytic_reference(spec: WeightSpec):
    if isinstance(spec, ConstantWeights) and spec.p.min() > 0:
        return DirichletParams(spec.p)
    if isinstance(spec, AffineWeights) and spec.theta.min() > 0:
        return DirichletParams(spec.theta)
    return None


def _cmd_invariant(args) -> int:
    spec = _load_spec(args.spec)
    if spec.dim > 2:
        raise WeightValidationError("invariant densities support d <= 2 only")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    grid = SimplexGrid(spec.dim, args.resolution)
    result = power_iterate(GridDensity.uniform(grid), spec, tol=args.tol,
                           nodes=args.nodes, refine=args.refine)
    result.density.to_csv(out_dir / "density.csv")
    save_density_svg(result.density, out_dir / "density.svg", scale=args.svg_scale)
    results = {
        "status": result.status,
        "iterations": result.iterations,
        "final_step": result.final_step,
    }
    params = _analytic_reference(spec)
    if params is not None and result.status == "converged":
        ref = cell_integrals(params, grid)
        results["l1_vs_dirichlet"] = float(
            np.abs(result.density.masses - ref / ref.sum()).sum())
    _write_manifest(out_dir, "invariant", {
        "spec": str(args.spec), "resolution": args.resolution, "tol": args.tol,
        "nodes": args.nodes, "refine": args.refine, "seed": args.seed,
    }, results)
    _write_timing(out_dir, "invariant", time.perf_counter() - t0)
    return EXIT_OK


def _cmd_classify(args) -> int:
    spec = _load_spec(args.spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if spec.dim == 1:
        classification = classify_1d(spec)
    elif spec.dim == 2:
        classification = classify_2d(spec, resolution=args.resolution)
    else:
        raise WeightValidationError("classification supports d <= 2 only")
    classification.to_json(out_dir / "classification.json")
    if args.render:
        save_classification_svg(classification, out_dir / "classification.svg")
    _write_manifest(out_dir, "classify", {
        "spec": str(args.spec), "resolution": args.resolution, "seed": args.seed,
    }, {"class": classification.class_name.value,
        "members": len(classification.members)})
    _write_timing(out_dir, "classify", time.perf_counter() - t0)
    return EXIT_OK


def _cmd_check_uniqueness(args) -> int:
    spec = _load_spec(args.spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    report = check_uniqueness(spec, alpha=args.alpha, samples=args.samples,
                              seed=args.seed)
    report.to_json(out_dir / "uniqueness.json")
    _write_manifest(out_dir, "check-uniqueness", {
        "spec": str(args.spec), "alpha": args.alpha, "samples": args.samples,
        "seed": args.seed,
    }, {"verdict": report.verdict.value})
    _write_timing(out_dir, "check-uniqueness", time.perf_counter() - t0)
    return EXIT_OK


def _cmd_validate(args) -> int:
    from .acceptance import run_all

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = run_all(out_dir=out_dir, seed=args.seed, quick=args.quick)
    for result in results:
        print(result.summary())
    failed = [r for r in results if r.passed is False]
    return EXIT_VALIDATION_FAILURE if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simplexchain",
        description="Vertex-contraction chain on the simplex: simulation, "
                    "invariant densities, absorbing-set classification.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, spec_required=True):
        if spec_required:
            p.add_argument("--spec", required=True, help="weight spec JSON file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap (computations are single-threaded)")

    p_sim = sub.add_parser("simulate", help="generate a trajectory CSV")
    common(p_sim)
    p_sim.add_argument("--steps", type=int, default=10_000)
    p_sim.add_argument("--burn-in", type=int, default=0, dest="burn_in")
    p_sim.add_argument("--start", default=None,
                       help="comma-separated coordinates; default barycenter")
    p_sim.set_defaults(fn=_cmd_simulate)

    p_inv = sub.add_parser("invariant", help="compute the invariant density")
    common(p_inv)
    p_inv.add_argument("--resolution", type=int, default=64)
    p_inv.add_argument("--tol", type=float, default=1e-8)
    p_inv.add_argument("--nodes", type=int, default=32)
    p_inv.add_argument("--refine", type=int, default=1)
    p_inv.add_argument("--svg-scale", choices=("linear", "log"), default="linear",
                       dest="svg_scale")
    p_inv.set_defaults(fn=_cmd_invariant)

    p_cls = sub.add_parser("classify", help="classify minimal absorbing sets")
    common(p_cls)
    p_cls.add_argument("--resolution", type=int, default=64)
    p_cls.add_argument("--render", action="store_true")
    p_cls.set_defaults(fn=_cmd_classify)

    p_unq = sub.add_parser("check-uniqueness",
                           help="evidence for uniqueness of the invariant measure")
    common(p_unq)
    p_unq.add_argument("--alpha", type=float, default=1.0)
    p_unq.add_argument("--samples", type=int, default=2000)
    p_unq.set_defaults(fn=_cmd_check_uniqueness)

    p_val = sub.add_parser("validate", help="run the full validation suite")
    common(p_val, spec_required=False)
    p_val.add_argument("--quick", action="store_true",
                       help="reduced load, no pass/fail judgment")
    p_val.set_defaults(fn=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (WeightValidationError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
