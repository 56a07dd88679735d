"""Cell assignment and partition diagnostics.

Given shifts ``a`` and targets ``y_1..y_n``, each point is scored by
``v_i(x) = a_i - c(x, y_i)`` and assigned to the argmax.  The diagnostics
quantify how much source mass sits where the argmax is ambiguous: pairwise
tie regions, their union, and the flat values of the pairwise score
difference ``g_ij(x) = c(x, y_i) - c(x, y_j)`` that cause positive tie mass
for some target weights.

Indices are 0-based throughout the Python API; command-line reports use
1-based target labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost import CostSpec, TargetCostTable, points_cost
from .errors import DimensionMismatchError, InvalidArgumentError
from .measure import CHUNK_CELLS, MATERIALIZE_LIMIT, QuadratureGrid

__all__ = [
    "TargetMeasure",
    "CellAssignment",
    "BoundaryReport",
    "GAtom",
    "CostCache",
    "eval_F",
    "assign_cells",
    "cell_masses",
    "boundary_measure",
    "level_set_measure",
    "flat_value_scan",
    "partition_threshold",
]

# Cached cost fields may use this much memory before falling back to
# recomputation per chunk (float64 first, then float32).
CACHE_BUDGET_BYTES = 3_400_000_000


@dataclass(frozen=True)
class TargetMeasure:
    """Finite target measure: n >= 2 distinct support points with positive masses."""

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        ms = np.asarray(self.masses, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise InvalidArgumentError(
                f"targets need shape (n, d) with n >= 2, got {pts.shape}"
            )
        if ms.shape != (pts.shape[0],):
            raise InvalidArgumentError(
                f"masses shape {ms.shape} does not match {pts.shape[0]} targets"
            )
        if not np.all(np.isfinite(pts)):
            raise InvalidArgumentError("target points must be finite")
        if np.any(ms <= 0.0):
            raise InvalidArgumentError("target masses must be strictly positive")
        if abs(ms.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError(
                f"target masses must sum to 1 within 1e-12, got {ms.sum()!r}"
            )
        for i in range(pts.shape[0]):
            for j in range(i + 1, pts.shape[0]):
                if np.array_equal(pts[i], pts[j]):
                    raise InvalidArgumentError(f"targets {i} and {j} coincide: {pts[i]}")
        pts = pts.copy()
        ms = ms.copy()
        pts.flags.writeable = False
        ms.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", ms)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _check_shifts(targets: TargetMeasure, shifts) -> np.ndarray:
    a = np.asarray(shifts, dtype=np.float64)
    if a.shape != (targets.n,):
        raise InvalidArgumentError(
            f"shift vector has shape {a.shape}, expected ({targets.n},)"
        )
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError("shifts must be finite")
    return a


def eval_F(
    spec: CostSpec, targets: TargetMeasure, shifts, x, tie_tolerance: float = 0.0
) -> tuple[float, tuple[int, ...]]:
    """Upper envelope ``F(x) = max_i (a_i - c(x, y_i))`` and its argmax set.

    With ``tie_tolerance == 0`` the argmax set contains exactly the indices
    attaining the maximum; with a positive tolerance, every index whose score
    comes within it of the maximum.
    """
    a = _check_shifts(targets, shifts)
    if tie_tolerance < 0.0:
        raise InvalidArgumentError("tie_tolerance must be >= 0")
    xv = np.asarray(x, dtype=np.float64)
    if xv.shape != (spec.d,):
        raise DimensionMismatchError(f"x has shape {xv.shape}, expected ({spec.d},)")
    scores = np.array(
        [a[i] - points_cost(spec, xv[None, :], targets.points[i])[0] for i in range(targets.n)]
    )
    best = scores.max()
    arg = tuple(int(i) for i in np.nonzero(best - scores <= tie_tolerance)[0])
    return float(best), arg


class CostCache:
    """Cost columns ``c(cell, y_i)`` for all targets, cached when they fit.

    Three modes, picked from the total size: full float64 cache, full float32
    cache, or per-chunk recomputation from the separable axis tables.  The
    float32 mode keeps score margins accurate to about 1e-7, far below the
    tie tolerances used for reporting.
    """

    def __init__(
        self,
        grid: QuadratureGrid,
        spec: CostSpec,
        targets: TargetMeasure,
        budget_bytes: int = CACHE_BUDGET_BYTES,
    ):
        if targets.dim != spec.d:
            raise DimensionMismatchError(
                f"targets have dimension {targets.dim}, cost spec has d={spec.d}"
            )
        if len(grid.axes) != spec.d:
            raise DimensionMismatchError(
                f"grid has dimension {grid.dim}, cost spec has d={spec.d}"
            )
        self.grid = grid
        self.spec = spec
        self.targets = targets
        self.tables = [
            TargetCostTable(spec, grid.axes, targets.points[i]) for i in range(targets.n)
        ]
        n_cells, n = grid.n_cells, targets.n
        if n_cells * n * 8 <= budget_bytes:
            self.dtype = np.float64
        elif n_cells * n * 4 <= budget_bytes:
            self.dtype = np.float32
        else:
            self.dtype = None
        self._cache = None
        if self.dtype is not None:
            cols = np.empty((n, n_cells), dtype=self.dtype)
            for i, tab in enumerate(self.tables):
                if self.dtype == np.float64:
                    cols[i] = tab.full(np.float64)
                else:
                    # root in float64 chunks, store rounded to float32
                    for lo in range(0, n_cells, CHUNK_CELLS):
                        hi = min(lo + CHUNK_CELLS, n_cells)
                        cols[i, lo:hi] = tab.chunk(lo, hi, np.float64)
            self._cache = cols

    def cost_chunk(self, lo: int, hi: int) -> np.ndarray:
        """(M, n) cost columns for flat cells [lo, hi)."""
        if self._cache is not None:
            return self._cache[:, lo:hi].T
        out = np.empty((hi - lo, self.targets.n))
        for i, tab in enumerate(self.tables):
            out[:, i] = tab.chunk(lo, hi, np.float64)
        return out

    def g_full(self, i: int, j: int) -> np.ndarray:
        """Full field of g_ij = c(., y_i) - c(., y_j).

        Dtype follows the cache (float32 on very large grids); the roughly
        1e-7 rounding this costs is far below every tolerance applied to g.
        """
        if self._cache is not None:
            return self._cache[i] - self._cache[j]
        gi = self.tables[i].full(np.float64)
        gi -= self.tables[j].full(np.float64)
        return gi


@dataclass(frozen=True)
class CellAssignment:
    """Per-cell argmax labels at a tie tolerance.

    ``best`` holds the argmax index per cell; ``near`` flags every index
    whose score is within ``tie_tolerance`` of the cell maximum.  A cell is
    tied when two or more flags are set; by construction any two flagged
    scores differ by at most the tolerance.
    """

    best: np.ndarray
    near: np.ndarray
    tie_tolerance: float

    @property
    def n_cells(self) -> int:
        return self.best.shape[0]

    @property
    def n_targets(self) -> int:
        return self.near.shape[1]

    @property
    def tied(self) -> np.ndarray:
        return self.near.sum(axis=1) >= 2

    def label(self, cell: int):
        """Unique label (int) or frozenset of tied indices for one cell."""
        row = np.nonzero(self.near[cell])[0]
        if row.size <= 1:
            return int(self.best[cell])
        return frozenset(int(i) for i in row)


def _score_chunks(cache: CostCache, shifts: np.ndarray, chunk: int = CHUNK_CELLS):
    """Yield (lo, hi, scores) with scores[m, i] = a_i - c(cell, y_i)."""
    a = shifts.astype(cache.dtype or np.float64)
    for lo in range(0, cache.grid.n_cells, chunk):
        hi = min(lo + chunk, cache.grid.n_cells)
        yield lo, hi, a[None, :] - cache.cost_chunk(lo, hi)


def assign_cells(
    grid: QuadratureGrid,
    spec: CostSpec,
    targets: TargetMeasure,
    shifts,
    tie_tolerance: float,
    cache: CostCache | None = None,
) -> CellAssignment:
    """Label every quadrature cell with its argmax target(s)."""
    a = _check_shifts(targets, shifts)
    if tie_tolerance < 0.0:
        raise InvalidArgumentError("tie_tolerance must be >= 0")
    if grid.n_cells > MATERIALIZE_LIMIT:
        raise InvalidArgumentError(
            f"assignment over {grid.n_cells} cells would materialize too much; "
            "use boundary_measure (streaming) instead"
        )
    if cache is None:
        cache = CostCache(grid, spec, targets)
    best = np.empty(grid.n_cells, dtype=np.int32)
    near = np.empty((grid.n_cells, targets.n), dtype=np.bool_)
    tol = np.asarray(tie_tolerance, dtype=cache.dtype or np.float64)
    for lo, hi, v in _score_chunks(cache, a):
        vmax = v.max(axis=1)
        best[lo:hi] = v.argmax(axis=1)
        near[lo:hi] = v >= (vmax - tol)[:, None]
    return CellAssignment(best=best, near=near, tie_tolerance=float(tie_tolerance))


def cell_masses(assignment: CellAssignment, grid: QuadratureGrid) -> tuple[np.ndarray, float]:
    """Mass uniquely assigned to each target, plus the total tied mass.

    Tied cells contribute only to the second return value, so the masses sum
    with the tie mass to the total grid mass.
    """
    if assignment.n_cells != grid.n_cells:
        raise InvalidArgumentError("assignment does not match grid size")
    tied = assignment.tied
    n = assignment.n_targets
    if grid.weights is None:
        w = grid.uniform_weight
        counts = np.bincount(assignment.best[~tied], minlength=n)
        masses = counts * w
        tie_mass = float(np.count_nonzero(tied) * w)
    else:
        masses = np.bincount(
            assignment.best[~tied], weights=grid.weights[~tied], minlength=n
        )
        tie_mass = float(grid.weights[tied].sum())
    return masses, tie_mass


def partition_threshold(grid: QuadratureGrid, tie_tolerance: float) -> float:
    """Verdict threshold on tied mass.

    Genuine tie curves contribute mass on the order of the tie tolerance
    times the box surface-to-volume ratio, plus a quadrature term of order
    one over the resolution; flat tie regions contribute mass bounded away
    from zero.  The threshold sits between the regimes.
    """
    surface_to_volume = 2.0 * sum(1.0 / (hi - lo) for lo, hi in grid.box)
    return max(5.0 * tie_tolerance * surface_to_volume, 20.0 / grid.min_resolution)


@dataclass(frozen=True)
class BoundaryReport:
    """Tie-mass diagnostics for one shift vector.

    ``pair_measures[(i, j)]`` is the quadrature mass of cells where targets i
    and j are simultaneously within the tie tolerance of the maximum;
    ``boundary_mass`` is the mass of the union (any tie).  ``cell_masses``
    counts only uniquely assigned cells, so ``cell_masses.sum() + tie_mass``
    equals the total mass.
    """

    pair_measures: dict[tuple[int, int], float]
    boundary_mass: float
    cell_masses: np.ndarray
    tie_mass: float
    is_mu_partition: bool
    threshold: float
    tie_tolerance: float


def boundary_measure(
    grid: QuadratureGrid,
    spec: CostSpec,
    targets: TargetMeasure,
    shifts,
    tie_tolerance: float,
    cache: CostCache | None = None,
) -> BoundaryReport:
    """Measure every pairwise tie region at the given shifts (streaming).

    Works chunk by chunk, so it is safe on grids too large to label in
    memory.  The partition verdict compares the union mass against
    ``partition_threshold``.
    """
    a = _check_shifts(targets, shifts)
    if not tie_tolerance > 0.0:
        raise InvalidArgumentError("tie_tolerance must be > 0 for boundary reports")
    if cache is None:
        cache = CostCache(grid, spec, targets)
    n = targets.n
    pair_mass = np.zeros((n, n))
    masses = np.zeros(n)
    tie_mass = 0.0
    tol = np.asarray(tie_tolerance, dtype=cache.dtype or np.float64)
    for lo, hi, v in _score_chunks(cache, a):
        vmax = v.max(axis=1)
        near = v >= (vmax - tol)[:, None]
        n_near = near.sum(axis=1)
        tied = n_near >= 2
        w = grid.weights_chunk(lo, hi)
        if isinstance(w, float):
            best = v.argmax(axis=1)
            masses += np.bincount(best[~tied], minlength=n) * w
            tie_mass += float(np.count_nonzero(tied) * w)
            for i in range(n):
                for j in range(i + 1, n):
                    both = near[:, i] & near[:, j]
                    pair_mass[i, j] += float(np.count_nonzero(both)) * w
        else:
            best = v.argmax(axis=1)
            masses += np.bincount(best[~tied], weights=w[~tied], minlength=n)
            tie_mass += float(w[tied].sum())
            for i in range(n):
                for j in range(i + 1, n):
                    both = near[:, i] & near[:, j]
                    pair_mass[i, j] += float(w[both].sum())
    threshold = partition_threshold(grid, tie_tolerance)
    pairs = {
        (i, j): float(pair_mass[i, j]) for i in range(n) for j in range(i + 1, n)
    }
    return BoundaryReport(
        pair_measures=pairs,
        boundary_mass=float(tie_mass),
        cell_masses=masses,
        tie_mass=float(tie_mass),
        is_mu_partition=bool(tie_mass <= threshold),
        threshold=float(threshold),
        tie_tolerance=float(tie_tolerance),
    )


def level_set_measure(
    grid: QuadratureGrid,
    spec: CostSpec,
    targets: TargetMeasure,
    i: int,
    j: int,
    k: float,
    band: float,
) -> float:
    """Quadrature mass of ``{x : |g_ij(x) - k| <= band}``."""
    n = targets.n
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise InvalidArgumentError(f"need two distinct target indices in [0, {n}), got {i}, {j}")
    if not band >= 0.0:
        raise InvalidArgumentError("band must be >= 0")
    ti = TargetCostTable(spec, grid.axes, targets.points[i])
    tj = TargetCostTable(spec, grid.axes, targets.points[j])
    total = 0.0
    for lo in range(0, grid.n_cells, CHUNK_CELLS):
        hi = min(lo + CHUNK_CELLS, grid.n_cells)
        g = ti.chunk(lo, hi) - tj.chunk(lo, hi)
        mask = np.abs(g - k) <= band
        w = grid.weights_chunk(lo, hi)
        if isinstance(w, float):
            total += w * int(np.count_nonzero(mask))
        else:
            total += float(w[mask].sum())
    return total


@dataclass(frozen=True)
class GAtom:
    """One flat value of g_ij: location, mass, and mass strictly below it.

    For target weight nu_i inside ``failing_interval`` the optimal shift
    difference lands on this flat value and the tied region carries its full
    mass, so the assignment cannot split the box cleanly.
    """

    value: float
    mass: float
    mass_below: float

    @property
    def failing_interval(self) -> tuple[float, float]:
        return (self.mass_below, self.mass_below + self.mass)


def flat_value_scan(
    grid: QuadratureGrid,
    spec: CostSpec,
    targets: TargetMeasure,
    i: int,
    j: int,
    atom_threshold: float = 1e-3,
    band: float = 1e-6,
) -> list[GAtom]:
    """Histogram scan for values of g_ij carrying atoms of mass.

    Bins of width ``max(band, 4 * range / r^2)`` are marked when their mass
    exceeds the detection floor; consecutive marked bins merge into one
    reported atom with a mass-weighted location.  Atom locations always lie
    within ``c(y_i, y_j) + band`` in absolute value since ``|g| <= c(y_i, y_j)``
    pointwise.

    On an r-per-axis grid every distinct value of a continuously
    distributed g still carries ~1/r of quadrature mass (its level set
    meets ~r of the r^d cells), so masses below that scale cannot be told
    apart from quantization.  The detection floor is therefore
    ``max(atom_threshold, 8 / min_resolution)``: atoms lighter than 8/r
    need a finer grid to be seen.
    """
    n = targets.n
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise InvalidArgumentError(f"need two distinct target indices in [0, {n}), got {i}, {j}")
    if not (atom_threshold > 0.0 and band >= 0.0):
        raise InvalidArgumentError("atom_threshold must be > 0 and band >= 0")
    ti = TargetCostTable(spec, grid.axes, targets.points[i])
    tj = TargetCostTable(spec, grid.axes, targets.points[j])
    gmin = np.inf
    gmax = -np.inf
    for lo in range(0, grid.n_cells, CHUNK_CELLS):
        hi = min(lo + CHUNK_CELLS, grid.n_cells)
        g = ti.chunk(lo, hi) - tj.chunk(lo, hi)
        gmin = min(gmin, float(g.min()))
        gmax = max(gmax, float(g.max()))
    r = grid.min_resolution
    if gmax <= gmin:
        # g is constant: the whole box is one atom
        return [GAtom(value=float(gmin), mass=1.0, mass_below=0.0)]
    width = max(band, 4.0 * (gmax - gmin) / (r * r))
    nbins = max(1, int(np.ceil((gmax - gmin) / width)))
    edges = np.linspace(gmin, gmax, nbins + 1)
    hist = np.zeros(nbins)
    centroid = np.zeros(nbins)
    for lo in range(0, grid.n_cells, CHUNK_CELLS):
        hi = min(lo + CHUNK_CELLS, grid.n_cells)
        g = ti.chunk(lo, hi) - tj.chunk(lo, hi)
        w = grid.weights_chunk(lo, hi)
        wv = None if isinstance(w, float) else w
        h, _ = np.histogram(g, bins=edges, weights=wv)
        hist += h if wv is not None else h * w
        hw, _ = np.histogram(g, bins=edges, weights=(g * wv if wv is not None else g))
        centroid += hw if wv is not None else hw * w
    marked = hist > max(atom_threshold, 8.0 / r)
    atoms: list[GAtom] = []
    cum = 0.0
    b = 0
    while b < nbins:
        if not marked[b]:
            cum += hist[b]
            b += 1
            continue
        e = b
        mass = 0.0
        weighted = 0.0
        while e < nbins and marked[e]:
            mass += hist[e]
            weighted += centroid[e]
            e += 1
        atoms.append(GAtom(value=float(weighted / mass), mass=float(mass), mass_below=float(cum)))
        cum += mass
        b = e
    return atoms
