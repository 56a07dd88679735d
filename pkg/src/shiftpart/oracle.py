"""Independent cross-checks: exact discrete LP, Monte Carlo, g-value scans.

These routines deliberately avoid the solver's code paths.  The LP solves
the same discretized transport problem as an explicit linear program with a
simplex method at its tightest feasibility setting; Monte Carlo integrates
indicators from an independent seeded sample stream; the distribution scan
reads atoms of ``g_ij`` off exact value multiplicities rather than the
histogram used by ``flat_value_scan``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix, vstack

from .cost import CostSpec, TargetCostTable
from .errors import InvalidArgumentError, ShiftpartError, SizeGuardError
from .measure import CHUNK_CELLS, MATERIALIZE_LIMIT, QuadratureGrid, SourceMeasure, build_grid
from .partition import TargetMeasure

__all__ = [
    "DiscreteLPResult",
    "MCEstimate",
    "GDistribution",
    "solve_discrete_lp",
    "mc_integrate",
    "scan_g_distribution",
    "export_flow_csv",
]

# Hard cap on cost-matrix entries (cells times targets) for the exact LP.
LP_ENTRY_GUARD = 5_000_000

# Tightest feasibility tolerance the HiGHS simplex accepts.
LP_FEASIBILITY_TOL = 1e-10


@dataclass(frozen=True)
class DiscreteLPResult:
    """Exact solution of the discretized transport LP.

    Flow is stored sparsely: ``flow_mass[k]`` moves from quadrature cell
    ``flow_cells[k]`` to target ``flow_targets[k]`` (0-based indices).  A
    basic optimal solution has at most cells + targets - 1 nonzeros.
    """

    cost: float
    flow_cells: np.ndarray
    flow_targets: np.ndarray
    flow_mass: np.ndarray
    iterations: int
    n_cells: int
    n_targets: int

    def cell_marginal(self) -> np.ndarray:
        out = np.zeros(self.n_cells)
        np.add.at(out, self.flow_cells, self.flow_mass)
        return out

    def target_marginal(self) -> np.ndarray:
        out = np.zeros(self.n_targets)
        np.add.at(out, self.flow_targets, self.flow_mass)
        return out


def solve_discrete_lp(
    grid: QuadratureGrid, spec: CostSpec, targets: TargetMeasure
) -> DiscreteLPResult:
    """Solve the cell-to-target transport LP exactly.

    Uses the HiGHS simplex through scipy with primal and dual feasibility
    tolerances at 1e-10 (the tightest it accepts); no approximate or
    entropic method is involved.  Guarded to ``LP_ENTRY_GUARD`` cost
    entries: beyond that, refuse rather than silently degrade.
    """
    n_cells, n = grid.n_cells, targets.n
    if n_cells * n > LP_ENTRY_GUARD:
        raise SizeGuardError(
            f"LP would have {n_cells * n} cost entries, over the guard of "
            f"{LP_ENTRY_GUARD}; reduce the grid resolution"
        )
    mu = grid.weights_full()
    cost_cols = np.empty((n_cells, n))
    for i in range(n):
        cost_cols[:, i] = TargetCostTable(spec, grid.axes, targets.points[i]).full()
    # variables x[cell * n + t], cell-major
    nv = n_cells * n
    ones = np.ones(nv)
    cell_rows = csr_matrix(
        (ones, np.arange(nv), np.arange(0, nv + 1, n)), shape=(n_cells, nv)
    )
    tgt_idx = (np.arange(nv).reshape(n_cells, n).T).ravel()
    tgt_rows = csr_matrix(
        (ones, tgt_idx, np.arange(0, nv + 1, n_cells)), shape=(n, nv)
    )
    res = linprog(
        cost_cols.ravel(),
        A_eq=vstack([cell_rows, tgt_rows]),
        b_eq=np.concatenate([mu, targets.masses]),
        bounds=(0, None),
        method="highs",
        options={
            "primal_feasibility_tolerance": LP_FEASIBILITY_TOL,
            "dual_feasibility_tolerance": LP_FEASIBILITY_TOL,
        },
    )
    if res.status != 0:
        raise ShiftpartError(f"exact LP failed with status {res.status}: {res.message}")
    x = res.x
    nz = np.nonzero(x > 0.0)[0]
    return DiscreteLPResult(
        cost=float(res.fun),
        flow_cells=(nz // n).astype(np.int64),
        flow_targets=(nz % n).astype(np.int64),
        flow_mass=x[nz],
        iterations=int(res.nit),
        n_cells=n_cells,
        n_targets=n,
    )


def export_flow_csv(result: DiscreteLPResult, path) -> None:
    """Write the sparse flow as ``cell_index,target_index,mass`` rows.

    Cell indices are 0-based flat C-order quadrature cells; target indices
    are written 1-based to match the labels used in reports.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_index", "target_index", "mass"])
        for c, t, m in zip(result.flow_cells, result.flow_targets, result.flow_mass):
            writer.writerow([int(c), int(t) + 1, repr(float(m))])


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    samples: int
    seed: int


def mc_integrate(measure: SourceMeasure, predicate, samples: int, seed: int) -> MCEstimate:
    """Monte Carlo mass of ``{x : predicate(x)}`` under the source measure.

    The stream is fully determined by ``seed`` (PCG64), so repeated calls
    are bit-identical.  The standard error is the sample standard deviation
    of the indicator divided by sqrt(samples), i.e.
    ``sqrt(p(1-p)/(samples-1))``.
    """
    if samples < 1000:
        raise InvalidArgumentError(f"need at least 1000 samples, got {samples}")
    rng = np.random.default_rng(seed)
    d = measure.dim
    lows = np.array([lo for lo, _ in measure.box])
    spans = np.array([hi - lo for lo, hi in measure.box])
    hits = 0
    chunk = 1 << 20
    if measure.density is None:
        done = 0
        while done < samples:
            m = min(chunk, samples - done)
            pts = lows + rng.random((m, d)) * spans
            mask = np.asarray(predicate(pts))
            if mask.shape != (m,) or mask.dtype != np.bool_:
                raise InvalidArgumentError(
                    "predicate must return a boolean array matching the number of points"
                )
            hits += int(np.count_nonzero(mask))
            done += m
    else:
        dens = measure.density
        shape = dens.shape
        flat = dens.reshape(-1).astype(np.float64)
        pmass = flat / flat.sum()
        cell_spans = spans / np.array(shape)
        done = 0
        while done < samples:
            m = min(chunk, samples - done)
            idx = rng.choice(flat.size, size=m, p=pmass)
            multi = np.stack(np.unravel_index(idx, shape), axis=1)
            pts = lows + (multi + rng.random((m, d))) * cell_spans
            mask = np.asarray(predicate(pts))
            if mask.shape != (m,) or mask.dtype != np.bool_:
                raise InvalidArgumentError(
                    "predicate must return a boolean array matching the number of points"
                )
            hits += int(np.count_nonzero(mask))
            done += m
    p_hat = hits / samples
    se = float(np.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / (samples - 1)))
    return MCEstimate(value=float(p_hat), std_error=se, samples=samples, seed=seed)


@dataclass(frozen=True)
class GDistribution:
    """Empirical distribution of ``g_ij`` over quadrature cells.

    ``values``/``masses`` list the distinct cell values of g in increasing
    order with their total quadrature mass; ``cum`` is the inclusive
    cumulative mass.  Atoms show up as exact value multiplicities, which is
    an independent route to the histogram-based flat-value scan.
    """

    values: np.ndarray
    masses: np.ndarray
    cum: np.ndarray

    def cdf(self, t: float) -> float:
        k = int(np.searchsorted(self.values, t, side="right"))
        return 0.0 if k == 0 else float(self.cum[k - 1])

    def quantile(self, q: float) -> float:
        if not (0.0 < q < 1.0):
            raise InvalidArgumentError(f"quantile level must lie in (0, 1), got {q}")
        k = int(np.searchsorted(self.cum, q, side="left"))
        return float(self.values[min(k, self.values.size - 1)])

    def jumps(self, min_mass: float) -> list[tuple[float, float]]:
        """Distinct values with mass at least ``min_mass`` (the flat values)."""
        keep = self.masses >= min_mass
        return [(float(v), float(m)) for v, m in zip(self.values[keep], self.masses[keep])]

    @property
    def max_value_mass(self) -> float:
        return float(self.masses.max())


def scan_g_distribution(
    measure: SourceMeasure,
    spec: CostSpec,
    targets: TargetMeasure,
    i: int,
    j: int,
    resolution,
) -> GDistribution:
    """Tabulate g_ij over a fresh midpoint grid at the given resolution."""
    n = targets.n
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise InvalidArgumentError(f"need two distinct target indices in [0, {n}), got {i}, {j}")
    grid = build_grid(measure, resolution)
    if grid.n_cells > MATERIALIZE_LIMIT:
        raise InvalidArgumentError(
            f"distribution scan at {grid.n_cells} cells exceeds the materialization limit"
        )
    ti = TargetCostTable(spec, grid.axes, targets.points[i])
    tj = TargetCostTable(spec, grid.axes, targets.points[j])
    g = np.empty(grid.n_cells)
    for lo in range(0, grid.n_cells, CHUNK_CELLS):
        hi = min(lo + CHUNK_CELLS, grid.n_cells)
        g[lo:hi] = ti.chunk(lo, hi) - tj.chunk(lo, hi)
    if grid.weights is None:
        values, counts = np.unique(g, return_counts=True)
        masses = counts * grid.uniform_weight
    else:
        order = np.argsort(g, kind="stable")
        gs = g[order]
        ws = grid.weights[order]
        boundaries = np.nonzero(np.diff(gs))[0] + 1
        starts = np.concatenate([[0], boundaries])
        values = gs[starts]
        masses = np.add.reduceat(ws, starts)
    return GDistribution(values=values, masses=masses, cum=np.cumsum(masses))
