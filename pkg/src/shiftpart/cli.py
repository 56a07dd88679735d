"""Command-line interface.

Subcommands::

    shiftpart solve   --instance FILE --out DIR [--resolution R] [--lp-check]
    shiftpart analyze --instance FILE --out DIR [--resolution R] [--pair I J] [--seed S]
    shiftpart sweep   --instance FILE --out DIR [--resolution R] [--steps N] [--refine W]
    shiftpart figures --out DIR [--resolution R]

Exit codes: 0 success, 2 bad instance or arguments, 3 solve did not
converge (outputs for the best iterate are still written), 4 a size guard
refused the computation, 5 the output directory could not be written.

Target indices in every output (JSON keys, CSV columns, ``--pair``) are
1-based, matching the ``[target.k]`` sections of instance files; arrays
are listed in target order.  ``--workers`` (or the environment variable
``SHIFTPART_WORKERS``) is validated and recorded in run metadata; the
computation itself is currently single-threaded.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import raster
from .cost import CostSpec, points_cost
from .errors import (
    ConvergenceFailureError,
    InstanceFormatError,
    InvalidArgumentError,
    ShiftpartError,
    SizeGuardError,
)
from .instance import InstanceSpec, parse_instance
from .measure import QuadratureGrid, build_grid
from .oracle import export_flow_csv, mc_integrate, scan_g_distribution, solve_discrete_lp
from .partition import (
    TargetMeasure,
    assign_cells,
    flat_value_scan,
    level_set_measure,
    partition_threshold,
)
from .solver import ShiftResult, SolveOptions, build_two_target_profile, solve_shifts

__all__ = ["main"]

SWEEP_HEADER = ["nu1", "converged", "residual", "tie_mass", "boundary_measure", "is_partition"]


def _resolve_workers(args) -> int:
    raw = args.workers if args.workers is not None else os.environ.get("SHIFTPART_WORKERS")
    if raw is None:
        return 1
    try:
        w = int(raw)
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"--workers must be a positive integer, got {raw!r}")
    if w < 1:
        raise InvalidArgumentError(f"--workers must be a positive integer, got {w}")
    return w


def _prepare_out(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write_probe"
    probe.write_text("")
    probe.unlink()
    return out


def _load(args) -> tuple[InstanceSpec, CostSpec, TargetMeasure, QuadratureGrid]:
    inst = parse_instance(args.instance)
    if args.resolution is not None:
        if args.resolution < 2:
            raise InvalidArgumentError(f"--resolution must be >= 2, got {args.resolution}")
        inst = InstanceSpec(
            p=inst.p,
            dimension=inst.dimension,
            box=inst.box,
            resolution=(args.resolution,) * inst.dimension,
            target_points=inst.target_points,
            target_masses=inst.target_masses,
            density_file=inst.density_file,
            solver=inst.solver,
            tolerances=inst.tolerances,
        )
    spec = inst.cost_spec()
    targets = inst.target_measure()
    measure = inst.source_measure(base_dir=Path(args.instance).parent)
    grid = build_grid(measure, inst.resolution)
    return inst, spec, targets, grid


def _num(x: float):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _instance_block(inst: InstanceSpec) -> dict:
    return {
        "p": _num(inst.p),
        "dimension": inst.dimension,
        "box": [[lo, hi] for lo, hi in inst.box],
        "resolution": list(inst.resolution),
        "targets": [
            {"point": list(pt), "mass": m}
            for pt, m in zip(inst.target_points, inst.target_masses)
        ],
        "density_file": inst.density_file,
        "solver": {k: v for k, v in inst.solver},
        "tolerances": {k: v for k, v in inst.tolerances},
    }


def _solve_block(result: ShiftResult, options: SolveOptions) -> dict:
    return {
        "shifts": [float(a) for a in result.shifts],
        "converged": bool(result.converged),
        "iterations": result.iterations,
        "residual": float(result.residual),
        "mass_tolerance": options.mass_tolerance,
        "tie_tolerance": options.tie_tolerance,
        "masses": [float(m) for m in result.masses],
        "tie_mass": float(result.tie_mass),
        "dual_value": float(result.dual_value),
        "primal_lower": float(result.primal_lower),
        "primal_upper": float(result.primal_upper),
    }


def _partition_block(result: ShiftResult) -> dict:
    rep = result.boundary
    return {
        "boundary_measure": float(rep.boundary_mass),
        "tie_mass": float(rep.tie_mass),
        "is_mu_partition": bool(rep.is_mu_partition),
        "threshold": float(rep.threshold),
        "pair_measures": {
            f"{i + 1},{j + 1}": float(v) for (i, j), v in sorted(rep.pair_measures.items())
        },
    }


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _solve_instance(spec, targets, grid, options) -> tuple[ShiftResult, bool]:
    """Run the solver; on budget exhaustion keep the best iterate."""
    try:
        return solve_shifts(grid, spec, targets, options), True
    except ConvergenceFailureError as exc:
        return exc.result, False


def cmd_solve(args) -> int:
    workers = _resolve_workers(args)
    inst, spec, targets, grid = _load(args)
    out = _prepare_out(args.out)
    options = inst.solve_options()
    result, _ = _solve_instance(spec, targets, grid, options)
    payload = {
        "instance": _instance_block(inst),
        "solve": _solve_block(result, options),
        "partition": _partition_block(result),
        "workers": workers,
        "raster": None,
    }
    if len(inst.resolution) == 2:
        assignment = assign_cells(
            grid, spec, targets, result.shifts, tie_tolerance=options.tie_tolerance
        )
        raster.write_label_pgm(out / "labels.pgm", assignment, inst.resolution)
        payload["raster"] = "labels.pgm"
    if args.lp_check:
        lp = solve_discrete_lp(grid, spec, targets)
        payload["lp_check"] = {
            "cost": lp.cost,
            "iterations": lp.iterations,
            "dual_value": float(result.dual_value),
            "gap_vs_dual": lp.cost - float(result.dual_value),
            "within_primal_bracket": bool(
                result.primal_lower - 1e-9 <= lp.cost <= result.primal_upper + 1e-9
            ),
            "flow_file": "flow.csv",
        }
        export_flow_csv(lp, out / "flow.csv")
    _write_json(out / "result.json", payload)
    return 0 if result.converged else 3


def _tie_predicate(spec, targets, shifts, tau):
    def predicate(points):
        scores = np.stack(
            [
                shifts[i] - points_cost(spec, points, targets.points[i])
                for i in range(targets.n)
            ],
            axis=1,
        )
        part = np.partition(scores, targets.n - 2, axis=1)
        return (part[:, -1] - part[:, -2]) <= tau

    return predicate


def cmd_analyze(args) -> int:
    workers = _resolve_workers(args)
    inst, spec, targets, grid = _load(args)
    out = _prepare_out(args.out)
    i, j = (args.pair[0] - 1, args.pair[1] - 1) if args.pair else (0, 1)
    if not (0 <= i < targets.n and 0 <= j < targets.n) or i == j:
        raise InvalidArgumentError(
            f"--pair expects two distinct 1-based target indices in 1..{targets.n}"
        )
    options = inst.solve_options()
    result, _ = _solve_instance(spec, targets, grid, options)

    atoms = flat_value_scan(
        grid, spec, targets, i, j, atom_threshold=inst.atom_threshold, band=inst.band
    )
    atom_rows = []
    for atom in atoms:
        lo, hi = atom.failing_interval
        atom_rows.append(
            {
                "value": atom.value,
                "mass": atom.mass,
                "mass_below": atom.mass_below,
                "failing_interval": [lo, hi],
                "level_set_mass": level_set_measure(
                    grid, spec, targets, i, j, atom.value, band=inst.band
                ),
            }
        )

    measure = inst.source_measure(base_dir=Path(args.instance).parent)
    dist = scan_g_distribution(measure, spec, targets, i, j, inst.resolution)
    jumps = dist.jumps(max(1e-3, 8.0 / min(inst.resolution)))
    _write_cdf_csv(out / "g_cdf.csv", dist, jumps)

    mc = mc_integrate(
        measure,
        _tie_predicate(spec, targets, result.shifts, options.tie_tolerance),
        samples=200_000,
        seed=args.seed,
    )
    payload = {
        "instance": _instance_block(inst),
        "pair": [i + 1, j + 1],
        "solve": _solve_block(result, options),
        "partition": _partition_block(result),
        "uniqueness_condition": {
            "holds": not atom_rows,
            "witnesses": [a["value"] for a in atom_rows],
        },
        "atoms": atom_rows,
        "distribution": {
            "n_distinct": int(dist.values.size),
            "max_value_mass": dist.max_value_mass,
            "jumps": [[v, m] for v, m in jumps],
            "cdf_file": "g_cdf.csv",
        },
        "mc_tie_mass": {
            "value": mc.value,
            "std_error": mc.std_error,
            "samples": mc.samples,
            "seed": mc.seed,
        },
        "workers": workers,
    }
    _write_json(out / "analysis.json", payload)
    return 0 if result.converged else 3


def _write_cdf_csv(path: Path, dist, jumps) -> None:
    """Downsampled CDF: up to 4097 evenly spaced rows plus every jump."""
    n = dist.values.size
    idx = set(np.linspace(0, n - 1, num=min(n, 4097)).astype(np.int64).tolist())
    jump_values = {v for v, _ in jumps}
    rows = [
        (float(dist.values[k]), float(dist.cum[k]))
        for k in range(n)
        if k in idx or float(dist.values[k]) in jump_values
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["g_value", "cum_mass"])
        for v, c in rows:
            writer.writerow([repr(v), repr(c)])


@dataclass(frozen=True)
class _SweepRow:
    nu1: float
    converged: bool
    residual: float
    tie_mass: float
    boundary_measure: float
    is_partition: bool


def _sweep_row(profile, tau, tol, threshold, nu1) -> _SweepRow:
    t = profile.solve(nu1)
    tie = profile.mass_leq(t + tau) - profile.mass_lt(t - tau)
    m1 = profile.mass_lt(t - tau)
    m2 = 1.0 - profile.mass_leq(t + tau)
    residual = max(abs(m1 - nu1), abs(m2 - (1.0 - nu1)))
    return _SweepRow(
        nu1=nu1,
        converged=residual <= tol + tie,
        residual=residual,
        tie_mass=tie,
        boundary_measure=tie,
        is_partition=tie <= threshold,
    )


def sweep_rows(grid, spec, targets, steps, refine, options) -> list[_SweepRow]:
    """Sweep nu1 over (0, 1): uniform steps plus bisection of verdict flips."""
    if targets.n != 2:
        raise InvalidArgumentError("sweep requires an instance with exactly two targets")
    if steps < 1:
        raise InvalidArgumentError(f"--steps must be >= 1, got {steps}")
    if not (0.0 < refine < 1.0):
        raise InvalidArgumentError(f"--refine must lie in (0, 1), got {refine}")
    profile = build_two_target_profile(grid, spec, targets)
    tau = options.tie_tolerance
    tol = options.mass_tolerance
    threshold = partition_threshold(grid, tau)
    rows = {}

    def eval_at(nu1: float) -> _SweepRow:
        key = round(nu1, 15)
        if key not in rows:
            rows[key] = _sweep_row(profile, tau, tol, threshold, nu1)
        return rows[key]

    points = [(k + 1) / (steps + 1) for k in range(steps)]
    for nu1 in points:
        eval_at(nu1)
    for lo, hi in zip(points, points[1:]):
        if eval_at(lo).is_partition == eval_at(hi).is_partition:
            continue
        a, b = lo, hi
        va = eval_at(a).is_partition
        while b - a > refine:
            mid = 0.5 * (a + b)
            if eval_at(mid).is_partition == va:
                a = mid
            else:
                b = mid
    return [rows[k] for k in sorted(rows)]


def infer_intervals(rows: list[_SweepRow]) -> list[dict]:
    """Maximal nu1 ranges with a partition verdict, from sorted sweep rows.

    Endpoints are midpoints of the flip brackets; the uncertainty is half
    the bracket width (runs touching the sampled range edge extend toward
    0 or 1 with the gap as uncertainty).  Intervals come out sorted and
    disjoint inside [0, 1].
    """
    intervals = []
    k = 0
    while k < len(rows):
        if not rows[k].is_partition:
            k += 1
            continue
        e = k
        while e + 1 < len(rows) and rows[e + 1].is_partition:
            e += 1
        if k == 0:
            lo, lo_unc = rows[k].nu1, rows[k].nu1
        else:
            lo = 0.5 * (rows[k - 1].nu1 + rows[k].nu1)
            lo_unc = 0.5 * (rows[k].nu1 - rows[k - 1].nu1)
        if e == len(rows) - 1:
            hi, hi_unc = rows[e].nu1, 1.0 - rows[e].nu1
        else:
            hi = 0.5 * (rows[e].nu1 + rows[e + 1].nu1)
            hi_unc = 0.5 * (rows[e + 1].nu1 - rows[e].nu1)
        intervals.append(
            {"lo": lo, "hi": hi, "lo_uncertainty": lo_unc, "hi_uncertainty": hi_unc}
        )
        k = e + 1
    return intervals


def cmd_sweep(args) -> int:
    _resolve_workers(args)
    inst, spec, targets, grid = _load(args)
    out = _prepare_out(args.out)
    options = inst.solve_options()
    rows = sweep_rows(grid, spec, targets, args.steps, args.refine, options)
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        for r in rows:
            writer.writerow(
                [
                    repr(r.nu1),
                    "true" if r.converged else "false",
                    repr(r.residual),
                    repr(r.tie_mass),
                    repr(r.boundary_measure),
                    "true" if r.is_partition else "false",
                ]
            )
    _write_json(
        out / "intervals.json",
        {
            "instance": _instance_block(inst),
            "steps": args.steps,
            "refine": args.refine,
            "partition_intervals": infer_intervals(rows),
        },
    )
    return 0


def builtin_figures() -> list[tuple[str, InstanceSpec]]:
    """The five standard two-target portraits (file stem, instance)."""
    box = ((0.0, 1.0), (0.0, 1.0))
    max_pts = ((0.25, 0.5), (0.75, 0.5))
    taxi_pts = ((0.25, 0.25), (0.75, 0.75))
    cases = [
        ("maxnorm_nu1_1_32", math.inf, max_pts, 1.0 / 32.0),
        ("maxnorm_nu1_1_8", math.inf, max_pts, 1.0 / 8.0),
        ("taxicab_nu1_1_2", 1.0, taxi_pts, 1.0 / 2.0),
        ("taxicab_nu1_1_32", 1.0, taxi_pts, 1.0 / 32.0),
        ("taxicab_nu1_1_4", 1.0, taxi_pts, 1.0 / 4.0),
    ]
    out = []
    for stem, p, pts, nu1 in cases:
        out.append(
            (
                stem,
                InstanceSpec(
                    p=p,
                    dimension=2,
                    box=box,
                    resolution=(1024, 1024),
                    target_points=pts,
                    target_masses=(nu1, 1.0 - nu1),
                ),
            )
        )
    return out


def cmd_figures(args) -> int:
    workers = _resolve_workers(args)
    out = _prepare_out(args.out)
    entries = []
    any_unconverged = False
    for stem, inst in builtin_figures():
        if args.resolution is not None:
            inst = InstanceSpec(
                p=inst.p,
                dimension=inst.dimension,
                box=inst.box,
                resolution=(args.resolution, args.resolution),
                target_points=inst.target_points,
                target_masses=inst.target_masses,
            )
        spec = inst.cost_spec()
        targets = inst.target_measure()
        grid = build_grid(inst.source_measure(), inst.resolution)
        options = inst.solve_options()
        result, _ = _solve_instance(spec, targets, grid, options)
        any_unconverged = any_unconverged or not result.converged
        assignment = assign_cells(
            grid, spec, targets, result.shifts, tie_tolerance=options.tie_tolerance
        )
        raster.write_figure_ppm(out / f"{stem}.ppm", assignment, inst.resolution)
        entries.append(
            {
                "file": f"{stem}.ppm",
                "instance": _instance_block(inst),
                "solve": _solve_block(result, options),
                "partition": _partition_block(result),
                "tie_fraction": float(np.count_nonzero(assignment.tied))
                / assignment.best.shape[0],
            }
        )
    _write_json(out / "figures.json", {"figures": entries, "workers": workers})
    return 3 if any_unconverged else 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shiftpart",
        description="Solve and diagnose semi-discrete transport shifts under p-norm costs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, instance=True):
        if instance:
            sp.add_argument("--instance", required=True, help="instance file (INI)")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument(
            "--resolution", type=int, default=None, help="override grid resolution per axis"
        )
        sp.add_argument(
            "--workers",
            default=None,
            help="worker count (also SHIFTPART_WORKERS); recorded in metadata",
        )

    sp = sub.add_parser("solve", help="solve for shifts and write result.json + labels.pgm")
    common(sp)
    sp.add_argument(
        "--lp-check", action="store_true", help="cross-check against the exact discrete LP"
    )
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("analyze", help="partition diagnostics for one target pair")
    common(sp)
    sp.add_argument(
        "--pair",
        type=int,
        nargs=2,
        metavar=("I", "J"),
        default=None,
        help="1-based target pair to scan (default: 1 2)",
    )
    sp.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("sweep", help="sweep nu1 over (0,1) for a two-target instance")
    common(sp)
    sp.add_argument("--steps", type=int, default=63, help="uniform sweep points (default 63)")
    sp.add_argument(
        "--refine",
        type=float,
        default=1e-4,
        help="bisect verdict flips down to this nu1 width (default 1e-4)",
    )
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("figures", help="render the five built-in example portraits")
    common(sp, instance=False)
    sp.set_defaults(func=cmd_figures)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InstanceFormatError as exc:
        print(f"shiftpart: instance error: {exc}", file=sys.stderr)
        return 2
    except InvalidArgumentError as exc:
        print(f"shiftpart: {exc}", file=sys.stderr)
        return 2
    except SizeGuardError as exc:
        print(f"shiftpart: size guard: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"shiftpart: cannot write outputs: {exc}", file=sys.stderr)
        return 5
    except ShiftpartError as exc:
        print(f"shiftpart: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
