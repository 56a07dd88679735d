"""Shift solvers.

The dual problem is to choose shifts ``a`` (one per target, ``a_1`` pinned to
zero) so that the mass of each argmax cell matches the target weight.  For
two targets the map ``t = a_1 - a_2  ->  mu({g_12 <= t})`` is monotone, so the
solve is an exact bisection (binary search) over the sorted quadrature values
of ``g_12``.  For three or more targets we run damped ascent on the concave
dual objective, with either backtracking line search (default) or a fixed
damping factor.

When the score difference has flat values carrying mass (p = 1 or p = inf
geometries), the matching condition may be unattainable: the solver then
stops at the obstruction and reports the tied mass instead of looping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cost import CostSpec
from .errors import (
    AscentMonotonicityError,
    ConvergenceFailureError,
    InvalidArgumentError,
)
from .measure import CHUNK_CELLS, QuadratureGrid
from .partition import (
    BoundaryReport,
    CellAssignment,
    CostCache,
    TargetMeasure,
    boundary_measure,
    _check_shifts,
)

__all__ = [
    "SolveOptions",
    "ShiftResult",
    "TwoTargetProfile",
    "build_two_target_profile",
    "solve_shifts",
    "dual_objective",
    "primal_cost",
]


@dataclass(frozen=True)
class SolveOptions:
    """Solver knobs.

    ``step_rule`` is ``"backtracking"`` (monotone by construction) or
    ``"fixed"`` (damped steps of size ``damping``; a decrease of the dual
    objective aborts the run since it signals a bad damping choice).
    ``initial_shifts`` seeds the ascent; it is canonicalized so the first
    component is zero.
    """

    mass_tolerance: float = 1e-5
    max_iterations: int = 10000
    step_rule: str = "backtracking"
    damping: float = 1.0
    tie_tolerance: float = 1e-4
    initial_shifts: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.mass_tolerance > 0:
            raise InvalidArgumentError("mass_tolerance must be > 0")
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be >= 1")
        if self.step_rule not in ("backtracking", "fixed"):
            raise InvalidArgumentError(f"unknown step_rule {self.step_rule!r}")
        if not (0.0 < self.damping <= 1.0):
            raise InvalidArgumentError("damping must lie in (0, 1]")
        if not self.tie_tolerance > 0:
            raise InvalidArgumentError("tie_tolerance must be > 0")


@dataclass(frozen=True)
class ShiftResult:
    """Solved shifts with the diagnostics evaluated at them.

    ``masses`` counts uniquely assigned cells only; ``residual`` is the
    largest deviation of those masses from the target weights.  A True
    ``converged`` flag guarantees ``residual <= mass_tolerance + tie_mass``:
    tied mass is the part of the matching the assignment cannot attribute.
    ``primal_lower``/``primal_upper`` bracket the transport cost over the
    possible allocations of tied cells.
    """

    shifts: np.ndarray
    masses: np.ndarray
    tie_mass: float
    residual: float
    iterations: int
    converged: bool
    boundary: BoundaryReport
    dual_value: float
    primal_lower: float
    primal_upper: float

    @property
    def primal_cost(self) -> float:
        return 0.5 * (self.primal_lower + self.primal_upper)


# ---------------------------------------------------------------------------
# shared streaming passes


def _dual_and_masses(
    cache: CostCache, grid: QuadratureGrid, shifts: np.ndarray, want_masses: bool = True
):
    """One pass over the grid: dual objective and (optionally) argmax masses."""
    n = cache.targets.n
    a = shifts.astype(cache.dtype or np.float64)
    envelope = 0.0
    masses = np.zeros(n) if want_masses else None
    for lo in range(0, grid.n_cells, CHUNK_CELLS):
        hi = min(lo + CHUNK_CELLS, grid.n_cells)
        v = a[None, :] - cache.cost_chunk(lo, hi)
        vmax = v.max(axis=1)
        w = grid.weights_chunk(lo, hi)
        if isinstance(w, float):
            envelope += w * float(np.sum(vmax, dtype=np.float64))
            if want_masses:
                masses += np.bincount(v.argmax(axis=1), minlength=n) * w
        else:
            envelope += float(np.dot(w, vmax))
            if want_masses:
                masses += np.bincount(v.argmax(axis=1), weights=w, minlength=n)
    dual = float(np.dot(shifts, cache.targets.masses)) - envelope
    return dual, masses


def _primal_bracket(
    cache: CostCache, grid: QuadratureGrid, shifts: np.ndarray, tie_tolerance: float
) -> tuple[float, float]:
    """Transport-cost bracket: tied cells allocated cheapest vs dearest."""
    a = shifts.astype(cache.dtype or np.float64)
    tol = np.asarray(tie_tolerance, dtype=cache.dtype or np.float64)
    lower = 0.0
    upper = 0.0
    for lo in range(0, grid.n_cells, CHUNK_CELLS):
        hi = min(lo + CHUNK_CELLS, grid.n_cells)
        c = cache.cost_chunk(lo, hi)
        v = a[None, :] - c
        vmax = v.max(axis=1)
        near = v >= (vmax - tol)[:, None]
        c64 = c.astype(np.float64, copy=False)
        cmin = np.where(near, c64, np.inf).min(axis=1)
        cmax = np.where(near, c64, -np.inf).max(axis=1)
        w = grid.weights_chunk(lo, hi)
        if isinstance(w, float):
            lower += w * float(np.sum(cmin, dtype=np.float64))
            upper += w * float(np.sum(cmax, dtype=np.float64))
        else:
            lower += float(np.dot(w, cmin))
            upper += float(np.dot(w, cmax))
    return lower, upper


def dual_objective(
    grid: QuadratureGrid,
    spec: CostSpec,
    targets: TargetMeasure,
    shifts,
    cache: CostCache | None = None,
) -> float:
    """Concave dual value ``sum_i a_i nu_i - integral of max_i (a_i - c_i)``.

    Invariant under adding a constant to all shifts; its supergradient in
    ``a_i`` is ``nu_i - mu(A_i)``, which is what the ascent solver climbs.
    """
    a = _check_shifts(targets, shifts)
    if cache is None:
        cache = CostCache(grid, spec, targets, budget_bytes=0)
    dual, _ = _dual_and_masses(cache, grid, a, want_masses=False)
    return dual


def primal_cost(
    grid: QuadratureGrid,
    spec: CostSpec,
    targets: TargetMeasure,
    assignment: CellAssignment,
) -> tuple[float, float]:
    """Cost bracket of transporting each cell to its assigned target.

    Uniquely labelled cells pay their own cost; tied cells contribute an
    interval between the cheapest and dearest tied target.  The bracket
    collapses to a point when no cell is tied.
    """
    if assignment.n_cells != grid.n_cells:
        raise InvalidArgumentError("assignment does not match grid size")
    cache = CostCache(grid, spec, targets, budget_bytes=0)
    lower = 0.0
    upper = 0.0
    for lo in range(0, grid.n_cells, CHUNK_CELLS):
        hi = min(lo + CHUNK_CELLS, grid.n_cells)
        c = cache.cost_chunk(lo, hi)
        near = assignment.near[lo:hi]
        cmin = np.where(near, c, np.inf).min(axis=1)
        cmax = np.where(near, c, -np.inf).max(axis=1)
        w = grid.weights_chunk(lo, hi)
        if isinstance(w, float):
            lower += w * float(np.sum(cmin, dtype=np.float64))
            upper += w * float(np.sum(cmax, dtype=np.float64))
        else:
            lower += float(np.dot(w, cmin))
            upper += float(np.dot(w, cmax))
    return lower, upper


# ---------------------------------------------------------------------------
# two targets: exact bisection over the sorted difference profile


@dataclass(frozen=True)
class TwoTargetProfile:
    """Sorted quadrature profile of ``g_12`` for fast repeated solves.

    ``gs`` is sorted ascending; ``cumw`` aligns with it (``None`` means
    uniform weights of ``1 / len(gs)`` each).  All mass queries are binary
    searches, so a sweep over many target weights costs almost nothing
    beyond the initial sort.
    """

    gs: np.ndarray
    cumw: np.ndarray | None

    @property
    def n_cells(self) -> int:
        return self.gs.shape[0]

    def mass_leq(self, t: float) -> float:
        k = int(np.searchsorted(self.gs, t, side="right"))
        if self.cumw is None:
            return k / self.n_cells
        return 0.0 if k == 0 else float(self.cumw[k - 1])

    def mass_lt(self, t: float) -> float:
        k = int(np.searchsorted(self.gs, t, side="left"))
        if self.cumw is None:
            return k / self.n_cells
        return 0.0 if k == 0 else float(self.cumw[k - 1])

    def solve(self, nu1: float) -> float:
        """Smallest t in the profile with ``mass_leq(t) >= nu1``, except that
        an exact hit (``mass_leq(t) == nu1``) returns the midpoint of the gap
        to the next distinct profile value: every t in that gap matches the
        mass exactly, and the midpoint keeps the tie band clear of both
        adjacent quantized g-layers."""
        if not (0.0 < nu1 < 1.0):
            raise InvalidArgumentError(f"nu1 must lie strictly in (0, 1), got {nu1}")
        if self.cumw is None:
            n = self.n_cells
            k = int(math.ceil(nu1 * n - 1e-9)) - 1
        else:
            k = int(np.searchsorted(self.cumw, nu1, side="left"))
        k = min(max(k, 0), self.n_cells - 1)
        t = float(self.gs[k])
        if self.mass_leq(t) == nu1:
            nxt = int(np.searchsorted(self.gs, t, side="right"))
            if nxt < self.n_cells:
                return 0.5 * (t + float(self.gs[nxt]))
        return t


def build_two_target_profile(
    grid: QuadratureGrid,
    spec: CostSpec,
    targets: TargetMeasure,
    cache: CostCache | None = None,
) -> TwoTargetProfile:
    if targets.n != 2:
        raise InvalidArgumentError("profile requires exactly two targets")
    if cache is None:
        cache = CostCache(grid, spec, targets, budget_bytes=0)
    g = cache.g_full(0, 1)
    if grid.weights is None:
        return TwoTargetProfile(gs=np.sort(g), cumw=None)
    order = np.argsort(g, kind="stable")
    return TwoTargetProfile(gs=g[order], cumw=np.cumsum(grid.weights[order]))


def _finalize(
    cache: CostCache,
    grid: QuadratureGrid,
    spec: CostSpec,
    targets: TargetMeasure,
    shifts: np.ndarray,
    options: SolveOptions,
    iterations: int,
) -> ShiftResult:
    report = boundary_measure(
        grid, spec, targets, shifts, options.tie_tolerance, cache=cache
    )
    residual = float(np.max(np.abs(report.cell_masses - targets.masses)))
    converged = residual <= options.mass_tolerance + report.tie_mass
    dual, _ = _dual_and_masses(cache, grid, shifts, want_masses=False)
    lower, upper = _primal_bracket(cache, grid, shifts, options.tie_tolerance)
    return ShiftResult(
        shifts=shifts,
        masses=report.cell_masses,
        tie_mass=report.tie_mass,
        residual=residual,
        iterations=iterations,
        converged=converged,
        boundary=report,
        dual_value=dual,
        primal_lower=lower,
        primal_upper=upper,
    )


def _solve_two(grid, spec, targets, options) -> ShiftResult:
    cache = CostCache(grid, spec, targets)
    profile = build_two_target_profile(grid, spec, targets, cache=cache)
    t_star = profile.solve(float(targets.masses[0]))
    shifts = np.array([0.0, -t_star])
    iterations = max(1, int(math.ceil(math.log2(max(profile.n_cells, 2)))))
    return _finalize(cache, grid, spec, targets, shifts, options, iterations)


# ---------------------------------------------------------------------------
# three or more targets: damped dual ascent


def _solve_ascent(grid, spec, targets, options) -> ShiftResult:
    cache = CostCache(grid, spec, targets)
    nu = targets.masses
    n = targets.n
    if options.initial_shifts is not None:
        a = np.asarray(options.initial_shifts, dtype=np.float64).copy()
        if a.shape != (n,):
            raise InvalidArgumentError(
                f"initial_shifts has shape {a.shape}, expected ({n},)"
            )
        a -= a[0]
    else:
        a = np.zeros(n)

    dual, masses = _dual_and_masses(cache, grid, a)
    step = 1.0
    iterations = 0
    stalled = False
    while iterations < options.max_iterations:
        iterations += 1
        if float(np.max(np.abs(masses - nu))) <= options.mass_tolerance:
            break
        direction = nu - masses
        direction[0] = 0.0
        if options.step_rule == "fixed":
            a = a + options.damping * direction
            new_dual, masses = _dual_and_masses(cache, grid, a)
            if new_dual < dual - 1e-12 * max(1.0, abs(dual)):
                raise AscentMonotonicityError(
                    f"dual objective decreased ({dual} -> {new_dual}) under fixed "
                    f"damping {options.damping}; reduce the damping factor"
                )
            dual = new_dual
            continue
        # backtracking: halve until the dual strictly improves
        accepted = False
        t = step
        for trial in range(60):
            cand = a + t * direction
            cand_dual, cand_masses = _dual_and_masses(cache, grid, cand)
            if cand_dual > dual + 1e-15 * max(1.0, abs(dual)):
                a = cand
                dual, masses = cand_dual, cand_masses
                step = t * 1.6 if trial == 0 else t
                accepted = True
                break
            t *= 0.5
        if not accepted:
            stalled = True
            break

    result = _finalize(cache, grid, spec, targets, a, options, iterations)
    if not result.converged and iterations >= options.max_iterations and not stalled:
        raise ConvergenceFailureError(
            f"no convergence in {options.max_iterations} iterations: residual "
            f"{result.residual:.3e} > tolerance {options.mass_tolerance:.1e} + "
            f"tie mass {result.tie_mass:.3e}",
            result=result,
        )
    return result


def solve_shifts(
    grid: QuadratureGrid,
    spec: CostSpec,
    targets: TargetMeasure,
    options: SolveOptions | None = None,
) -> ShiftResult:
    """Solve for shifts matching the target weights on the quadrature grid.

    Two targets: exact bisection on the monotone map from the shift
    difference to assigned mass.  More targets: damped ascent on the dual
    objective with the first shift pinned to zero.

    Raises ``ConvergenceFailureError`` (carrying the best iterate) if the
    iteration budget is exhausted while the residual still exceeds
    ``mass_tolerance + tie_mass``.  A positive tie mass at the optimum is
    reported, not an error: it is the measured obstruction to a clean
    partition.
    """
    if options is None:
        options = SolveOptions()
    if targets.dim != spec.d or grid.dim != spec.d:
        raise InvalidArgumentError(
            f"dimension mismatch: grid d={grid.dim}, targets d={targets.dim}, "
            f"cost d={spec.d}"
        )
    if targets.n == 2:
        return _solve_two(grid, spec, targets, options)
    return _solve_ascent(grid, spec, targets, options)
