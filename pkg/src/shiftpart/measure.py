"""Source measures on boxes and midpoint-rule quadrature grids.

The source measure is either uniform on a box or piecewise constant on a
rectangular density grid.  All integration in the package runs over midpoint
quadrature: cell centers with weights proportional to density times cell
volume, normalized to total mass one.

Indicator integration converges at O(1/r) in the per-axis resolution for
sets with rectifiable boundary, which is what the partition diagnostics
lean on.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "SourceMeasure",
    "QuadratureGrid",
    "build_grid",
    "integrate_indicator",
]

# Default flat-chunk length for streaming passes over large grids.
CHUNK_CELLS = 1 << 21

# centers() refuses to materialize grids larger than this (columns x rows).
MATERIALIZE_LIMIT = 1 << 25


def _check_box(box) -> tuple[tuple[float, float], ...]:
    try:
        parsed = tuple((float(lo), float(hi)) for lo, hi in box)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"box must be a sequence of (lo, hi) pairs: {exc}") from exc
    if not parsed:
        raise InvalidArgumentError("box must have at least one axis")
    for k, (lo, hi) in enumerate(parsed):
        if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
            raise InvalidArgumentError(f"box axis {k}: need finite lo < hi, got ({lo}, {hi})")
    return parsed


@dataclass(frozen=True)
class SourceMeasure:
    """Absolutely continuous source measure on a box.

    ``density`` is either ``None`` (uniform) or an array of nonnegative cell
    values on a rectangular grid over the box (axis k of the array runs along
    coordinate k).  Densities are relative: the measure is normalized to
    total mass one when a quadrature grid is built.
    """

    box: tuple[tuple[float, float], ...]
    density: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "box", _check_box(self.box))
        if self.density is not None:
            dens = np.asarray(self.density, dtype=np.float64)
            if dens.ndim != len(self.box):
                raise InvalidArgumentError(
                    f"density has {dens.ndim} axes, box has {len(self.box)}"
                )
            if dens.size == 0 or not np.all(np.isfinite(dens)) or np.any(dens < 0):
                raise InvalidArgumentError("density values must be finite and >= 0")
            if dens.sum() <= 0.0:
                raise InvalidArgumentError("density must have positive total mass")
            dens = dens.copy()
            dens.flags.writeable = False
            object.__setattr__(self, "density", dens)

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def volume(self) -> float:
        v = 1.0
        for lo, hi in self.box:
            v *= hi - lo
        return v

    @property
    def total_mass(self) -> float:
        """Integral of the stored (unnormalized) density over the box.

        Quadrature weights divide by this, so the normalized measure always
        has mass one; for a uniform measure it is simply the box volume.
        """
        if self.density is None:
            return self.volume
        return float(self.density.mean()) * self.volume

    @classmethod
    def uniform(cls, box) -> "SourceMeasure":
        return cls(box=tuple(box), density=None)

    @classmethod
    def from_density_file(cls, path) -> "SourceMeasure":
        """Load a density from the plain-text grid format.

        Line 1: ``d m_1 ... m_d`` (dimension, then per-axis cell counts).
        Line 2: ``lo_1 hi_1 ... lo_d hi_d`` (box bounds).
        Rest:   ``m_1 * ... * m_d`` nonnegative reals in row-major order.
        """
        text = Path(path).read_text().split("\n")
        lines = [ln for ln in (s.strip() for s in text) if ln and not ln.startswith("#")]
        if len(lines) < 2:
            raise InvalidArgumentError(f"{path}: expected header lines with shape and box")
        head = lines[0].split()
        try:
            d = int(head[0])
            shape = tuple(int(t) for t in head[1:])
        except ValueError as exc:
            raise InvalidArgumentError(f"{path}: bad shape header {lines[0]!r}") from exc
        if d < 1 or len(shape) != d or any(m < 1 for m in shape):
            raise InvalidArgumentError(f"{path}: shape header {lines[0]!r} is inconsistent")
        bounds = lines[1].split()
        if len(bounds) != 2 * d:
            raise InvalidArgumentError(f"{path}: expected {2*d} box bounds, got {len(bounds)}")
        try:
            box = tuple((float(bounds[2 * k]), float(bounds[2 * k + 1])) for k in range(d))
            values = np.array(" ".join(lines[2:]).split(), dtype=np.float64)
        except ValueError as exc:
            raise InvalidArgumentError(f"{path}: non-numeric entry: {exc}") from exc
        expected = int(np.prod(shape))
        if values.size != expected:
            raise InvalidArgumentError(
                f"{path}: expected {expected} density values, got {values.size}"
            )
        return cls(box=box, density=values.reshape(shape))

    def density_at(self, points: np.ndarray) -> np.ndarray:
        """Unnormalized density at each point (nearest density cell)."""
        pts = np.asarray(points, dtype=np.float64)
        if self.density is None:
            return np.ones(pts.shape[0])
        idx = []
        for k, (lo, hi) in enumerate(self.box):
            m = self.density.shape[k]
            j = np.floor((pts[:, k] - lo) / (hi - lo) * m).astype(np.int64)
            idx.append(np.clip(j, 0, m - 1))
        return self.density[tuple(idx)]


@dataclass(frozen=True)
class QuadratureGrid:
    """Midpoint quadrature rule for a source measure.

    ``axes[k]`` holds the cell-center coordinates along axis k; cells are
    enumerated flat in C order (last axis fastest).  For a uniform source the
    common weight is stored as a scalar instead of an N-vector so that large
    three-dimensional grids stay cheap to hold.
    """

    box: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]
    axes: tuple[np.ndarray, ...]
    weights: np.ndarray | None
    uniform_weight: float | None
    cell_volume: float

    @property
    def dim(self) -> int:
        return len(self.resolution)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.resolution))

    @property
    def min_resolution(self) -> int:
        return min(self.resolution)

    def weights_full(self) -> np.ndarray:
        if self.weights is not None:
            return self.weights
        return np.full(self.n_cells, self.uniform_weight)

    def weights_chunk(self, lo: int, hi: int):
        """Weights for flat cells [lo, hi): an array, or a scalar if uniform."""
        if self.weights is not None:
            return self.weights[lo:hi]
        return self.uniform_weight

    def centers_chunk(self, lo: int, hi: int) -> np.ndarray:
        idx = np.arange(lo, hi, dtype=np.int64)
        out = np.empty((hi - lo, self.dim))
        stride = 1
        strides = [0] * self.dim
        for k in range(self.dim - 1, -1, -1):
            strides[k] = stride
            stride *= self.resolution[k]
        for k in range(self.dim):
            out[:, k] = self.axes[k][(idx // strides[k]) % self.resolution[k]]
        return out

    def centers(self) -> np.ndarray:
        if self.n_cells > MATERIALIZE_LIMIT:
            raise InvalidArgumentError(
                f"refusing to materialize {self.n_cells} cell centers; "
                "iterate with centers_chunk instead"
            )
        return self.centers_chunk(0, self.n_cells)

    def iter_chunks(self, chunk: int = CHUNK_CELLS):
        for lo in range(0, self.n_cells, chunk):
            hi = min(lo + chunk, self.n_cells)
            yield lo, hi, self.centers_chunk(lo, hi), self.weights_chunk(lo, hi)


def build_grid(measure: SourceMeasure, resolution) -> QuadratureGrid:
    """Build the midpoint rule for ``measure`` at the given per-axis resolution.

    ``resolution`` is an int (shared by all axes) or one int per axis, each
    at least 2.  Weights are density at the cell center times cell volume,
    normalized to sum to one.
    """
    d = measure.dim
    if isinstance(resolution, (int, np.integer)):
        res = (int(resolution),) * d
    else:
        res = tuple(int(r) for r in resolution)
    if len(res) != d:
        raise InvalidArgumentError(f"resolution has {len(res)} axes, box has {d}")
    if any(r < 2 for r in res):
        raise InvalidArgumentError(f"resolution must be >= 2 per axis, got {res}")
    axes = []
    cell_volume = 1.0
    for (lo, hi), r in zip(measure.box, res):
        h = (hi - lo) / r
        axes.append(lo + (np.arange(r) + 0.5) * h)
        cell_volume *= h
    n = int(np.prod(res))
    if measure.density is None:
        return QuadratureGrid(
            box=measure.box,
            resolution=res,
            axes=tuple(axes),
            weights=None,
            uniform_weight=1.0 / n,
            cell_volume=cell_volume,
        )
    # density case: nearest-density-cell lookup at centers, then normalize
    per_axis_idx = []
    for k, (lo, hi) in enumerate(measure.box):
        m = measure.density.shape[k]
        j = np.floor((axes[k] - lo) / (hi - lo) * m).astype(np.int64)
        per_axis_idx.append(np.clip(j, 0, m - 1))
    mesh = np.meshgrid(*per_axis_idx, indexing="ij")
    w = measure.density[tuple(mesh)].reshape(-1) * cell_volume
    total = w.sum()
    if total <= 0.0:
        raise InvalidArgumentError("density vanishes on every quadrature cell")
    w = w / total
    w.flags.writeable = False
    return QuadratureGrid(
        box=measure.box,
        resolution=res,
        axes=tuple(axes),
        weights=w,
        uniform_weight=None,
        cell_volume=cell_volume,
    )


def integrate_indicator(grid: QuadratureGrid, predicate) -> float:
    """Quadrature mass of ``{x : predicate(x)}``.

    ``predicate`` maps an (M, d) array of cell centers to an (M,) boolean
    array.  The integral is the sum of weights at centers where it holds.
    """
    total = 0.0
    for lo, hi, centers, w in grid.iter_chunks():
        mask = np.asarray(predicate(centers))
        if mask.shape != (hi - lo,) or mask.dtype != np.bool_:
            raise InvalidArgumentError(
                "predicate must return a boolean array matching the number of points"
            )
        if isinstance(w, float):
            total += w * int(np.count_nonzero(mask))
        else:
            total += float(w[mask].sum())
    return total
