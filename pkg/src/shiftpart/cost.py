"""p-norm ground costs.

The exponent is stored exactly: ``p == 1.0`` and ``math.inf`` select the
piecewise-linear branches, every other finite ``p > 1`` the smooth one.  The
two special values are compared with ``==`` / ``isinf`` so that an exponent
like ``1.0000001`` never silently falls into the ``p = 1`` code path.

Evaluation of finite-p norms factors out the largest coordinate so that
exponents up to a few hundred neither overflow nor underflow to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidArgumentError,
    SingularPointError,
    UnsupportedCostError,
)

__all__ = [
    "CostSpec",
    "eval_cost",
    "eval_g",
    "grad_cost",
    "points_cost",
    "points_grad",
    "TargetCostTable",
]


@dataclass(frozen=True)
class CostSpec:
    """Ground cost ``c(x, y) = ||x - y||_p`` on R^d.

    Parameters
    ----------
    p : float
        Exponent, ``1 <= p <= inf``.  Use ``math.inf`` (or ``float("inf")``)
        for the uniform norm; it is kept as the exact IEEE infinity, never a
        large stand-in value.
    d : int
        Ambient dimension, at least 1.
    """

    p: float
    d: int

    def __post_init__(self):
        if isinstance(self.p, bool) or not isinstance(self.p, (int, float)):
            raise InvalidArgumentError(f"exponent p must be a real number, got {self.p!r}")
        object.__setattr__(self, "p", float(self.p))
        if math.isnan(self.p) or self.p < 1.0:
            raise InvalidArgumentError(f"exponent p must satisfy p >= 1, got {self.p}")
        if not isinstance(self.d, int) or self.d < 1:
            raise InvalidArgumentError(f"dimension d must be an integer >= 1, got {self.d!r}")

    @property
    def is_one(self) -> bool:
        return self.p == 1.0

    @property
    def is_inf(self) -> bool:
        return math.isinf(self.p)

    @property
    def is_smooth(self) -> bool:
        """True for p strictly between 1 and infinity."""
        return not (self.is_one or self.is_inf)


def _check_point(spec: CostSpec, x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != (spec.d,):
        raise DimensionMismatchError(
            f"{name} has shape {arr.shape}, expected ({spec.d},) for d={spec.d}"
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} has non-finite coordinates: {arr}")
    return arr


def _abs_pow(z: np.ndarray, p: float) -> np.ndarray:
    """|z|**p for z >= 0, using multiply chains where that is exact and fast."""
    if p == 1.0:
        return z.copy() if isinstance(z, np.ndarray) else z
    if p == 2.0:
        return z * z
    k = int(p)
    if p == k and 2 <= k <= 64:
        out = None
        base = z
        e = k
        while e:
            if e & 1:
                out = base.copy() if out is None else out * base
            e >>= 1
            if e:
                base = base * base
        return out
    if p - 0.5 == int(p - 0.5) and p < 64:
        return _abs_pow(z, p - 0.5) * np.sqrt(z)
    return np.power(z, p)


def _proot(s: np.ndarray, p: float) -> np.ndarray:
    """s**(1/p) for s >= 0 with fast paths for common exponents."""
    if p == 1.0:
        return s
    if p == 2.0:
        return np.sqrt(s)
    if p == 3.0:
        return np.cbrt(s)
    if p == 4.0:
        return np.sqrt(np.sqrt(s))
    if p == 1.5:
        r = np.cbrt(s)
        return r * r
    if p == 6.0:
        return np.sqrt(np.cbrt(s))
    return np.power(s, 1.0 / p)


def points_cost(spec: CostSpec, points: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorized ``c(x, y)`` for an (M, d) array of points against one target.

    The finite-p branch factors out the per-point maximum coordinate, so the
    result stays finite for large exponents regardless of coordinate scale.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != spec.d:
        raise DimensionMismatchError(
            f"points have shape {pts.shape}, expected (M, {spec.d})"
        )
    yv = _check_point(spec, y, "y")
    diff = np.abs(pts - yv)
    if spec.is_inf:
        return diff.max(axis=1)
    if spec.is_one:
        return diff.sum(axis=1)
    m = diff.max(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = diff / m[:, None]
    ratio[m == 0.0] = 0.0
    s = _abs_pow(ratio, spec.p).sum(axis=1)
    return m * _proot(s, spec.p)


def eval_cost(spec: CostSpec, x, y) -> float:
    """Ground cost between two points."""
    xv = _check_point(spec, x, "x")
    return float(points_cost(spec, xv[None, :], y)[0])


def eval_g(spec: CostSpec, x, yi, yj) -> float:
    """Pairwise cost difference ``g(x) = c(x, y_i) - c(x, y_j)``.

    Bounded by ``c(y_i, y_j)`` in absolute value (triangle inequality); the
    extreme values are attained exactly on the flat regions that obstruct
    unique assignment.
    """
    xv = _check_point(spec, x, "x")
    return float(points_cost(spec, xv[None, :], yi)[0] - points_cost(spec, xv[None, :], yj)[0])


def points_grad(spec: CostSpec, points: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of ``x -> c(x, y)`` at each row of ``points`` (smooth p only).

    The k-th component is ``sign(x_k - y_k) * (|x_k - y_k| / c)**(p-1)``,
    which is the overflow-safe form of ``(x_k-y_k)|x_k-y_k|^{p-2} c^{1-p}``.
    Rows equal to ``y`` raise: the cost is not differentiable there.
    """
    if not spec.is_smooth:
        raise UnsupportedCostError(
            f"gradient is undefined for p={spec.p}; defined only for 1 < p < inf"
        )
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != spec.d:
        raise DimensionMismatchError(
            f"points have shape {pts.shape}, expected (M, {spec.d})"
        )
    yv = _check_point(spec, y, "y")
    diff = pts - yv
    c = points_cost(spec, pts, yv)
    if np.any(c == 0.0):
        raise SingularPointError("gradient requested at x == y where the cost is singular")
    ratio = np.abs(diff) / c[:, None]
    return np.sign(diff) * _abs_pow(ratio, spec.p - 1.0)


def grad_cost(spec: CostSpec, x, y) -> np.ndarray:
    """Gradient of the cost with respect to ``x`` at a single point."""
    xv = _check_point(spec, x, "x")
    return points_grad(spec, xv[None, :], y)[0]


class TargetCostTable:
    """Costs from every cell of a product grid to one fixed target.

    On a midpoint grid the p-th power of the cost separates across axes, so
    the whole field is assembled from d precomputed per-axis vectors.  This
    keeps the memory footprint at O(sum of resolutions) until a chunk or the
    full field is requested, which matters for three-dimensional grids.
    """

    def __init__(self, spec: CostSpec, axes: tuple[np.ndarray, ...], y: np.ndarray):
        if len(axes) != spec.d:
            raise DimensionMismatchError(
                f"grid has {len(axes)} axes, cost spec has d={spec.d}"
            )
        yv = _check_point(spec, y, "y")
        self.spec = spec
        self.resolution = tuple(len(a) for a in axes)
        dists = [np.abs(np.asarray(a, dtype=np.float64) - yv[k]) for k, a in enumerate(axes)]
        if spec.is_smooth:
            self._tables = [_abs_pow(dk, spec.p) for dk in dists]
        else:
            self._tables = dists
        # C-order strides in units of cells (last axis fastest)
        strides = []
        acc = 1
        for r in reversed(self.resolution):
            strides.append(acc)
            acc *= r
        self._strides = tuple(reversed(strides))
        self.n_cells = acc

    def full(self, dtype=np.float64) -> np.ndarray:
        """Materialize the whole cost field, flattened in C order."""
        shape = [1] * len(self.resolution)
        acc = None
        for k, tab in enumerate(self._tables):
            shp = list(shape)
            shp[k] = len(tab)
            term = tab.reshape(shp)
            if acc is None:
                acc = np.broadcast_to(term, self.resolution).copy()
            elif self.spec.is_inf:
                np.maximum(acc, term, out=acc)
            else:
                acc += term
        flat = acc.reshape(-1)
        if self.spec.is_smooth:
            flat = _proot(flat, self.spec.p)
        return flat.astype(dtype, copy=False)

    def chunk(self, lo: int, hi: int, dtype=np.float64) -> np.ndarray:
        """Cost field for flat cell indices [lo, hi)."""
        idx = np.arange(lo, hi, dtype=np.int64)
        acc = None
        for k, tab in enumerate(self._tables):
            sub = (idx // self._strides[k]) % self.resolution[k]
            term = tab[sub]
            if acc is None:
                acc = term
            elif self.spec.is_inf:
                np.maximum(acc, term, out=acc)
            else:
                acc += term
        if self.spec.is_smooth:
            acc = _proot(acc, self.spec.p)
        return acc.astype(dtype, copy=False)
