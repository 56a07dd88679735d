"""Shared fixtures: the two closed-form examples and frozen reference values.

Reference values are derived analytically below and were cross-checked
against brute-force scans on a 4096-per-axis grid before being frozen.

Max-norm example — targets y1=(1/4,1/2), y2=(3/4,1/2), uniform mass on
[0,1]^2, g(x) = max(|x1-1/4|,|x2-1/2|) - max(|x1-3/4|,|x2-1/2|):

  * g = -1/2 exactly on the triangle with vertices (0,1/4),(0,3/4),(1/4,1/2):
    there c(x,y1)=1/4-x1 and c(x,y2)=3/4-x1.  Area = 1/2 * (1/2) * (1/4) = 1/16.
  * g = +1/2 on the mirrored right-edge triangle, mass 1/16.
  * g = 0 wherever |x2-1/2| >= 1/4 + |x1-1/2| (both costs reduce to
    |x2-1/2|): two triangles (1/4,1),(3/4,1),(1/2,3/4) and its mirror,
    each of area 1/16, total mass 1/8.
  * mass{g < 0} = (1 - 1/8)/2 = 7/16 by the x1 -> 1-x1 symmetry.
  * Failing intervals for nu1 (atom at value k with mass m and mass l
    strictly below k blocks [l, l+m]): [0,1/16], [7/16,9/16], [15/16,1].
    Partition set: (1/16, 7/16) U (9/16, 15/16).

1-norm example — targets y1=(1/4,1/4), y2=(3/4,3/4), g = phi(x1)+phi(x2)
with phi(t) = |t-1/4| - |t-3/4| (equal to -1/2 for t<=1/4, +1/2 for
t>=3/4, 2t-1 between):

  * g = -1 exactly on [0,1/4]^2 (mass 1/16), g = +1 on [3/4,1]^2 (1/16).
  * g = 0 with positive mass on [0,1/4]x[3/4,1] and [3/4,1]x[0,1/4]
    (phi values +-1/2 cancel): mass 1/8.
  * Same failing intervals and partition set as the max-norm example.
  * For nu1 = 1/32 < 1/16 the matching shift lands on the atom at -1,
    so the boundary carries the full atom: mu(B) = 1/16.
"""

from __future__ import annotations

import numpy as np
import pytest

from shiftpart import CostSpec, SourceMeasure, TargetMeasure, build_grid

UNIT_BOX = ((0.0, 1.0), (0.0, 1.0))

# frozen closed-form values (see module docstring for the derivations)
MAXNORM_ATOMS = {-0.5: 1 / 16, 0.0: 1 / 8, 0.5: 1 / 16}
TAXICAB_ATOMS = {-1.0: 1 / 16, 0.0: 1 / 8, 1.0: 1 / 16}
PARTITION_UNION = ((1 / 16, 7 / 16), (9 / 16, 15 / 16))
MASS_BELOW_ZERO = 7 / 16  # mass{g < 0} in both examples
FLAT_TRIANGLE = ((0.0, 0.25), (0.0, 0.75), (0.25, 0.5))  # area 1/16
TAXICAB_NU1_32_BOUNDARY = 1 / 16  # atom at -1 absorbs the matching shift

MAXNORM_POINTS = np.array([[0.25, 0.5], [0.75, 0.5]])
TAXICAB_POINTS = np.array([[0.25, 0.25], [0.75, 0.75]])


@pytest.fixture(scope="session")
def unit_measure() -> SourceMeasure:
    return SourceMeasure.uniform(UNIT_BOX)


@pytest.fixture(scope="session")
def grid64(unit_measure) -> "QuadratureGrid":
    return build_grid(unit_measure, 64)


@pytest.fixture(scope="session")
def grid256(unit_measure) -> "QuadratureGrid":
    return build_grid(unit_measure, 256)


@pytest.fixture(scope="session")
def grid512(unit_measure) -> "QuadratureGrid":
    return build_grid(unit_measure, 512)


@pytest.fixture(scope="session")
def maxnorm_spec() -> CostSpec:
    return CostSpec(p=float("inf"), d=2)


@pytest.fixture(scope="session")
def taxicab_spec() -> CostSpec:
    return CostSpec(p=1.0, d=2)


@pytest.fixture(scope="session")
def euclid_spec() -> CostSpec:
    return CostSpec(p=2.0, d=2)


def maxnorm_targets(nu1: float = 0.5) -> TargetMeasure:
    return TargetMeasure(points=MAXNORM_POINTS, masses=np.array([nu1, 1 - nu1]))


def taxicab_targets(nu1: float = 0.5) -> TargetMeasure:
    return TargetMeasure(points=TAXICAB_POINTS, masses=np.array([nu1, 1 - nu1]))


def in_triangle(points: np.ndarray, vertices) -> np.ndarray:
    """Vectorized inclusion test via barycentric sign checks."""
    (ax, ay), (bx, by), (cx, cy) = vertices
    x, y = points[:, 0], points[:, 1]
    d1 = (bx - ax) * (y - ay) - (by - ay) * (x - ax)
    d2 = (cx - bx) * (y - by) - (cy - by) * (x - bx)
    d3 = (ax - cx) * (y - cy) - (ay - cy) * (x - cx)
    neg = (d1 < 0) | (d2 < 0) | (d3 < 0)
    pos = (d1 > 0) | (d2 > 0) | (d3 > 0)
    return ~(neg & pos)


# ---------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per criterion, echoed in the
# terminal summary so the verdicts are visible even for passing tests


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record (and immediately print) one verdict line for a criterion."""

    def record(criterion: int, ok: bool, detail: str) -> None:
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} — {detail}"
        request.config._acceptance_lines.append((criterion, line))
        print(f"[acceptance] {line}", flush=True)

    return record


def pytest_terminal_summary(terminalreporter):
    lines = getattr(terminalreporter.config, "_acceptance_lines", [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
