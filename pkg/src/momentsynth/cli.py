"""Command-line pipeline: synth | simulate | sample | export | validate.

Every run echoes its settings as config.json in the output directory, so a
run is reproducible from that file alone.  Exit codes: 0 success, 2 validation
or usage error, 3 solver failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import examples as registry
from .controller import (
    PiecewiseController,
    extract_controller,
    load_controller,
    save_controller,
)
from .model import HybridSystem, load_system, save_system, validate
from .polyalg import basis
from .relaxation import (
    assemble_primal,
    check_certificate,
    equality_residual,
    lower,
    moments_from_solution,
    read_dual,
    relaxation_order_min,
)
from .sim import SampleSpec, rollout, sample_controllability
from .solver import (
    STATUS_NEAR,
    STATUS_OPTIMAL,
    SdpaFormatError,
    SolverOptions,
    solve,
    write_sdpa,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_IO = 4

OUTDIR_ENV = "MOMENTSYNTH_OUTDIR"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _outdir(args) -> Path:
    base = args.out or os.environ.get(OUTDIR_ENV) or "."
    path = Path(base)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {path}: {exc}", EXIT_IO)
    return path

def _echo_config(args, outdir: Path, command: str):
    cfg = {"command": command}
    for key, val in sorted(vars(args).items()):
        if key in ("func",) or val is None:
            continue
        cfg[key] = val if isinstance(val, (int, float, str, bool, list)) else str(val)
    try:
        with open(outdir / "config.json", "w") as fh:
            json.dump(cfg, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise CliError(f"cannot write config echo: {exc}", EXIT_IO)


def _load_entry(args):
    if getattr(args, "example", None):
        try:
            return registry.get(args.example)
        except KeyError as exc:
            raise CliError(str(exc), EXIT_VALIDATION)
    if getattr(args, "system", None):
        try:
            system = load_system(args.system)
        except OSError as exc:
            raise CliError(f"cannot read system file: {exc}", EXIT_IO)
        except (ValueError, KeyError) as exc:
            raise CliError(f"bad system file: {exc}", EXIT_VALIDATION)
        return registry.ExampleEntry(
            Path(args.system).stem, system, None, 1, 1, 1000
        )
    raise CliError("one of --example or --system is required", EXIT_VALIDATION)


def _resolve_controller(args, entry) -> PiecewiseController:
    choice = getattr(args, "controller", None) or "paper"
    if choice == "paper":
        if entry.reference_controller is None:
            raise CliError(
                f"example {entry.name!r} has no printed reference controller; "
                "pass --controller FILE",
                EXIT_VALIDATION,
            )
        return entry.reference_controller
    try:
        return load_controller(choice, entry.system.n)
    except OSError as exc:
        raise CliError(f"cannot read controller file: {exc}", EXIT_IO)
    except (ValueError, KeyError) as exc:
        raise CliError(f"bad controller file: {exc}", EXIT_VALIDATION)


def _parse_x0(text: str, n: int) -> np.ndarray:
    try:
        vals = [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError as exc:
        raise CliError(f"bad --x0 value: {exc}", EXIT_VALIDATION)
    if len(vals) != n:
        raise CliError(f"--x0 needs {n} coordinates, got {len(vals)}", EXIT_VALIDATION)
    return np.array(vals)


def _parse_section(text, n) -> dict[int, float]:
    out: dict[int, float] = {}
    if not text:
        return out
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        if "=" not in piece:
            raise CliError(f"bad --section entry {piece!r}; expected e.g. x3=0", EXIT_VALIDATION)
        name, val = piece.split("=", 1)
        name = name.strip()
        if not name.startswith("x"):
            raise CliError(f"bad --section coordinate {name!r}", EXIT_VALIDATION)
        try:
            axis = int(name[1:]) - 1
            fval = float(val)
        except ValueError as exc:
            raise CliError(f"bad --section entry {piece!r}: {exc}", EXIT_VALIDATION)
        if not 0 <= axis < n:
            raise CliError(f"--section coordinate {name} out of range", EXIT_VALIDATION)
        out[axis] = fval
    return out


def cmd_validate(args) -> int:
    entry = _load_entry(args)
    report = validate(entry.system, seed=args.seed)
    print(report)
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_export(args) -> int:
    entry = _load_entry(args)
    outdir = _outdir(args)
    _echo_config(args, outdir, "export")
    path = outdir / f"{entry.name}.json"
    try:
        save_system(entry.system, path)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO)
    print(f"wrote {path}")
    return EXIT_OK


def _sdpa_sidecar(problem, lowering, path: Path):
    coords = []
    for spec in problem.sequences.values():
        for t, alpha in enumerate(basis(spec.var_count, spec.max_degree)):
            blk, i, j, _w = lowering.coord_expr[spec.offset + t][0]
            coords.append(
                {"sequence": spec.name, "alpha": list(alpha), "entry": [blk + 1, i + 1, j + 1]}
            )
    index = {
        "sequences": [
            {
                "name": spec.name,
                "variables": spec.var_count,
                "max_degree": spec.max_degree,
                "offset": spec.offset,
            }
            for spec in problem.sequences.values()
        ],
        "blocks": [
            {
                "index": b + 1,
                "sequence": spec.seq,
                "multiplier": spec.multiplier.to_string() if spec.multiplier else "1",
                "order": spec.order,
                "dim": spec.dim,
            }
            for b, spec in enumerate(problem.blocks)
        ],
        "coordinates": coords,
    }
    with open(path, "w") as fh:
        json.dump(index, fh, indent=2)
        fh.write("\n")


def cmd_synth(args) -> int:
    entry = _load_entry(args)
    system = entry.system
    outdir = _outdir(args)
    _echo_config(args, outdir, "synth")

    report = validate(system, seed=args.seed)
    if not report.passed:
        print(report, file=sys.stderr)
        raise CliError("system failed validation", EXIT_VALIDATION)

    r = args.order if args.order is not None else entry.suggested_order
    k = args.degree if args.degree is not None else entry.suggested_degree
    rmin = relaxation_order_min(system)
    if r < rmin:
        raise CliError(f"relaxation order {r} is below the minimum r_min = {rmin}", EXIT_VALIDATION)

    t0 = time.time()
    try:
        problem = assemble_primal(system, r, strict_blocks=args.strict_blocks)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_VALIDATION)
    lowering = lower(problem)

    if args.export_sdpa:
        sdpa_path = outdir / "problem.dat-s"
        try:
            write_sdpa(lowering.program, sdpa_path)
            _sdpa_sidecar(problem, lowering, outdir / "problem.index.json")
        except (OSError, SdpaFormatError) as exc:
            raise CliError(f"SDPA export failed: {exc}", EXIT_IO)
        print(f"wrote {sdpa_path}")
        if args.export_sdpa == "only":
            return EXIT_OK

    opts = SolverOptions(
        tol_feas=args.tol, tol_gap=args.tol, max_iter=args.max_iter, verbose=args.verbose
    )
    sol = solve(lowering.program, opts)
    if sol.status not in (STATUS_OPTIMAL, STATUS_NEAR):
        log = {
            "status": sol.status,
            "message": sol.message,
            "iterations": sol.iterations,
            "residual_primal": sol.residual_primal,
            "residual_dual": sol.residual_dual,
            "rel_gap": sol.rel_gap,
        }
        with open(outdir / "solve_log.json", "w") as fh:
            json.dump(log, fh, indent=2)
        raise CliError(f"solver failed with status {sol.status}: {sol.message}", EXIT_SOLVER)

    moments = moments_from_solution(problem, lowering, sol)
    ctrl = extract_controller(moments, system, k, clamp=not args.no_clamp)
    cert = read_dual(problem, lowering, sol)
    grid = check_certificate(problem, cert, count=args.grid_points)
    elapsed = time.time() - t0

    ctrl_path = outdir / "controller.json"
    save_controller(ctrl, system.n, ctrl_path)
    log = {
        "example": entry.name,
        "order": r,
        "controller_degree": k,
        "bound": sol.primal_objective,
        "dual_objective": sol.dual_objective,
        "status": sol.status,
        "iterations": sol.iterations,
        "residual_primal": sol.residual_primal,
        "residual_dual": sol.residual_dual,
        "rel_gap": sol.rel_gap,
        "equality_residual": equality_residual(problem, moments),
        "dropped_rows": len(sol.dropped_rows),
        "elapsed_seconds": elapsed,
    }
    with open(outdir / "solve_log.json", "w") as fh:
        json.dump(log, fh, indent=2)
        fh.write("\n")
    cert_report = {
        "min_w_per_mode": {str(i): v for i, v in grid.min_w.items()},
        "min_w_minus_v_minus_1_per_mode": {str(i): v for i, v in grid.min_w_minus_v.items()},
        "min_v1_on_target": grid.min_v1_on_target,
        "module_residuals": cert.residuals,
        "passed_at_1e-5": grid.passed(1e-5),
    }
    with open(outdir / "certificate.json", "w") as fh:
        json.dump(cert_report, fh, indent=2)
        fh.write("\n")
    print(f"bound p_{r} = {sol.primal_objective:.6f}  status = {sol.status}  "
          f"iters = {sol.iterations}  time = {elapsed:.1f}s")
    print(f"wrote {ctrl_path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    entry = _load_entry(args)
    system = entry.system
    outdir = _outdir(args)
    _echo_config(args, outdir, "simulate")
    ctrl = _resolve_controller(args, entry)
    x0 = _parse_x0(args.x0, system.n)
    t_max = args.tmax if args.tmax is not None else entry.t_max
    traj = rollout(system, ctrl, x0, t_max)
    path = outdir / "trajectory.csv"
    try:
        traj.to_csv(path)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO)
    reach = traj.reach_step if traj.reached else "-"
    print(f"exit = {traj.exit_reason}  steps = {len(traj) - 1}  reach_step = {reach}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_sample(args) -> int:
    entry = _load_entry(args)
    system = entry.system
    outdir = _outdir(args)
    _echo_config(args, outdir, "sample")
    ctrl = _resolve_controller(args, entry)
    section = _parse_section(args.section, system.n)
    if args.grid:
        try:
            shape = tuple(int(t) for t in args.grid.lower().split("x"))
        except ValueError as exc:
            raise CliError(f"bad --grid {args.grid!r}: {exc}", EXIT_VALIDATION)
        spec = SampleSpec("grid", grid_shape=shape, section=section)
    elif args.uniform:
        spec = SampleSpec("uniform", count=args.uniform, seed=args.seed, section=section)
    else:
        raise CliError("one of --grid or --uniform is required", EXIT_VALIDATION)
    t_max = args.tmax if args.tmax is not None else entry.t_max
    try:
        cmap = sample_controllability(system, ctrl, spec, t_max)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_VALIDATION)
    cmap.to_csv(outdir / "controllability.csv")
    cmap.to_json(outdir / "controllability.json")
    frac = cmap.controllable_fraction
    print(f"controllable fraction = {frac:.4f} over {len(cmap.labels)} samples")
    print(f"wrote {outdir / 'controllability.csv'} and {outdir / 'controllability.json'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="momentsynth",
        description="Controller synthesis for discrete-time hybrid polynomial systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_seed=True):
        src = p.add_mutually_exclusive_group()
        src.add_argument("--example", help="registry example name")
        src.add_argument("--system", help="system description JSON file")
        p.add_argument("--out", help=f"output directory (default ${OUTDIR_ENV} or '.')")
        if needs_seed:
            p.add_argument("--seed", type=int, default=0, help="sampling seed")

    p = sub.add_parser("validate", help="check the standing model assumptions")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("export", help="write the system description file")
    common(p)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("synth", help="assemble, solve and extract a controller")
    common(p)
    p.add_argument("-r", "--order", type=int, help="relaxation order (default per example)")
    p.add_argument("-k", "--degree", type=int, help="controller degree (default per example)")
    p.add_argument("--tol", type=float, default=1e-8, help="solver tolerance")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--strict-blocks", action="store_true",
                   help="omit the full moment-matrix blocks (strictly-as-written cones)")
    p.add_argument("--no-clamp", action="store_true", help="extract without input clamping")
    p.add_argument("--export-sdpa", nargs="?", const="and-solve", default=None,
                   choices=["and-solve", "only"],
                   help="write problem.dat-s (+ index sidecar); 'only' skips solving")
    p.add_argument("--grid-points", type=int, default=100, help="certificate grid size")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="closed-loop rollout from one start")
    common(p)
    p.add_argument("--controller", help="'paper' or a controller JSON file", default=None)
    p.add_argument("--x0", required=True, help="comma-separated start state")
    p.add_argument("--tmax", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sample", help="map the controllable set empirically")
    common(p)
    p.add_argument("--controller", help="'paper' or a controller JSON file", default=None)
    p.add_argument("--grid", help="grid shape, e.g. 21x21")
    p.add_argument("--uniform", type=int, help="number of uniform samples")
    p.add_argument("--section", help="fixed coordinates, e.g. 'x3=0,x4=0'", default=None)
    p.add_argument("--tmax", type=int, default=None)
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
