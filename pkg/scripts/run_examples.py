#!/usr/bin/env python3
"""End-to-end run of the two closed-form two-target examples.

Both examples place two targets in the unit square under a polyhedral
ground cost, where the pairwise cost difference g(x) = c(x, y1) - c(x, y2)
has flat pieces:

  * max-norm cost, targets (1/4, 1/2) and (3/4, 1/2):
    g carries mass 1/16 at value -1/2, mass 1/8 at value 0, and mass 1/16
    at value +1/2.  Exact partition set for the first target weight:
    (1/16, 7/16) union (9/16, 15/16).

  * 1-norm cost, targets (1/4, 1/4) and (3/4, 3/4):
    g carries mass 1/16 at value -1, mass 1/8 at value 0, and mass 1/16 at
    value +1.  Same partition set.

For each example this script scans the flat values of g, solves a
partitioning and a non-partitioning weight split, sweeps the full weight
range to recover the partition set, and cross-checks one boundary mass
against a seeded Monte Carlo estimate.  Closed-form values are printed
next to every computed number.

Usage:
    python3 scripts/run_examples.py [--resolution 512] [--steps 63]
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from shiftpart import (
    CostSpec,
    SolveOptions,
    SourceMeasure,
    TargetMeasure,
    build_grid,
    flat_value_scan,
    mc_integrate,
    solve_shifts,
)
from shiftpart.cli import infer_intervals, sweep_rows

EXAMPLES = [
    {
        "title": "max-norm cost, targets (1/4,1/2) and (3/4,1/2)",
        "p": float("inf"),
        "points": ((0.25, 0.5), (0.75, 0.5)),
        "atoms": {-0.5: 1 / 16, 0.0: 1 / 8, 0.5: 1 / 16},
        "partitioning_nu1": 1 / 8,
        "failing_nu1": 1 / 32,
        "failing_boundary": 1 / 16,
        "union": ((1 / 16, 7 / 16), (9 / 16, 15 / 16)),
    },
    {
        "title": "1-norm cost, targets (1/4,1/4) and (3/4,3/4)",
        "p": 1.0,
        "points": ((0.25, 0.25), (0.75, 0.75)),
        "atoms": {-1.0: 1 / 16, 0.0: 1 / 8, 1.0: 1 / 16},
        "partitioning_nu1": 1 / 4,
        "failing_nu1": 1 / 2,
        "failing_boundary": 1 / 8,
        "union": ((1 / 16, 7 / 16), (9 / 16, 15 / 16)),
    },
]


def fmt_union(intervals) -> str:
    return " U ".join(f"({lo:.6f}, {hi:.6f})" for lo, hi in intervals)


def run_example(ex: dict, resolution: int, steps: int) -> None:
    print(f"\n=== {ex['title']} ===")
    spec = CostSpec(p=ex["p"], d=2)
    measure = SourceMeasure.uniform(((0.0, 1.0), (0.0, 1.0)))
    grid = build_grid(measure, resolution)
    options = SolveOptions(tie_tolerance=1e-4)

    print(f"grid {resolution}x{resolution}")
    print("flat values of g (computed vs closed form):")
    atoms = flat_value_scan(grid, spec, TargetMeasure(
        points=np.asarray(ex["points"]), masses=np.array([0.5, 0.5])), 0, 1)
    for atom in atoms:
        ref = ex["atoms"].get(round(atom.value, 6), float("nan"))
        print(
            f"  value {atom.value:+.6f}  mass {atom.mass:.6f}  "
            f"(closed form {ref:.6f})  blocks nu1 in "
            f"[{atom.mass_below:.6f}, {atom.mass_below + atom.mass:.6f}]"
        )

    for label, nu1, ref_bm in (
        ("non-partitioning", ex["failing_nu1"], ex["failing_boundary"]),
        ("partitioning", ex["partitioning_nu1"], 0.0),
    ):
        targets = TargetMeasure(
            points=np.asarray(ex["points"]), masses=np.array([nu1, 1 - nu1])
        )
        result = solve_shifts(grid, spec, targets, options)
        print(
            f"solve nu1={nu1:g} ({label}): boundary mass "
            f"{result.boundary.boundary_mass:.6f} (closed form {ref_bm:.6f}), "
            f"partition={result.boundary.is_mu_partition}"
        )
        if label == "non-partitioning":
            # cross-check the tied band with a seeded Monte Carlo estimate
            tau = options.tie_tolerance
            shifts = result.shifts

            def tied(points, spec=spec, ex=ex, shifts=shifts, tau=tau):
                from shiftpart import points_cost

                pts = np.asarray(ex["points"])
                s0 = shifts[0] - points_cost(spec, points, pts[0])
                s1 = shifts[1] - points_cost(spec, points, pts[1])
                return np.abs(s0 - s1) <= tau

            est = mc_integrate(measure, tied, samples=200_000, seed=7)
            print(
                f"  Monte Carlo tied-band mass: {est.value:.6f} "
                f"+/- {3 * est.std_error:.6f} (3 sigma)"
            )

    targets = TargetMeasure(
        points=np.asarray(ex["points"]), masses=np.array([0.5, 0.5])
    )
    rows = sweep_rows(grid, spec, targets, steps=steps, refine=1e-3, options=options)
    inferred = [(iv["lo"], iv["hi"]) for iv in infer_intervals(rows)]
    print(f"sweep ({steps} steps): partition set {fmt_union(inferred)}")
    print(f"           closed form {fmt_union(ex['union'])}")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolution", type=int, default=512)
    ap.add_argument("--steps", type=int, default=63)
    args = ap.parse_args(argv)
    for ex in EXAMPLES:
        run_example(ex, args.resolution, args.steps)
    return 0


if __name__ == "__main__":
    sys.exit(main())
