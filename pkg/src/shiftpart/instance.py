"""Problem-instance files: a small INI dialect, parsed with configparser.

An instance fixes the cost exponent, the source box (optionally with a
density table loaded from a side file), the target points and masses, the
quadrature resolution, and solver settings.  Example::

    [cost]
    p = inf
    dimension = 2

    [source]
    box = 0 1 ; 0 1

    [grid]
    resolution = 512

    [target.1]
    point = 0.25 0.5
    mass = 0.5

    [target.2]
    point = 0.75 0.5
    mass = 0.5

    [solver]
    mass_tolerance = 1e-5
    step_rule = backtracking

    [tolerances]
    tie_tolerance = 0.0001
    band = 1e-06
    atom_threshold = 0.001

Floats are written with ``repr`` so that parse(emit(x)) == x exactly.
``p = inf`` selects the max norm.  Target sections are 1-based.  The
``[solver]`` and ``[tolerances]`` sections are optional; ``tie_tolerance``
belongs in ``[tolerances]`` (it is also accepted under ``[solver]`` for
convenience, but not in both).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cost import CostSpec
from .errors import InstanceFormatError
from .measure import SourceMeasure
from .partition import TargetMeasure
from .solver import SolveOptions

__all__ = ["InstanceSpec", "parse_instance", "parse_instance_text", "emit_instance", "write_instance"]

_SOLVER_FIELDS = ("mass_tolerance", "max_iterations", "step_rule", "damping", "tie_tolerance")
_TOLERANCE_FIELDS = ("tie_tolerance", "band", "atom_threshold")


@dataclass(frozen=True)
class InstanceSpec:
    """Plain-data form of one problem instance (all fields hashable)."""

    p: float
    dimension: int
    box: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]
    target_points: tuple[tuple[float, ...], ...]
    target_masses: tuple[float, ...]
    density_file: str | None = None
    solver: tuple[tuple[str, object], ...] = ()
    tolerances: tuple[tuple[str, float], ...] = ()

    def cost_spec(self) -> CostSpec:
        return CostSpec(p=self.p, d=self.dimension)

    def source_measure(self, base_dir=".") -> SourceMeasure:
        if self.density_file is None:
            return SourceMeasure.uniform(self.box)
        measure = SourceMeasure.from_density_file(Path(base_dir) / self.density_file)
        for k, ((lo, hi), (flo, fhi)) in enumerate(zip(self.box, measure.box)):
            if abs(lo - flo) > 1e-12 or abs(hi - fhi) > 1e-12:
                raise InstanceFormatError(
                    f"axis {k} is [{lo}, {hi}] but the density file declares [{flo}, {fhi}]",
                    field="source.box",
                )
        return measure

    def target_measure(self) -> TargetMeasure:
        return TargetMeasure(
            points=np.array(self.target_points), masses=np.array(self.target_masses)
        )

    def solve_options(self, **overrides) -> SolveOptions:
        kwargs = dict(self.solver)
        tol = dict(self.tolerances)
        if "tie_tolerance" in tol:
            kwargs["tie_tolerance"] = tol["tie_tolerance"]
        kwargs.update(overrides)
        return SolveOptions(**kwargs)

    @property
    def band(self) -> float:
        return dict(self.tolerances).get("band", 1e-6)

    @property
    def atom_threshold(self) -> float:
        return dict(self.tolerances).get("atom_threshold", 1e-3)


def _fail(field_name: str, message: str) -> None:
    raise InstanceFormatError(message, field=field_name)


def _floats(field_name: str, raw: str, count: int | None = None) -> tuple[float, ...]:
    try:
        vals = tuple(float(tok) for tok in raw.split())
    except ValueError:
        _fail(field_name, f"expected numbers separated by spaces, got {raw!r}")
    if count is not None and len(vals) != count:
        _fail(field_name, f"expected {count} values, got {len(vals)}")
    return vals


def parse_instance_text(text: str, source: str = "<string>") -> InstanceSpec:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        _fail("file", f"not valid INI syntax: {exc}")

    if not cp.has_section("cost"):
        _fail("cost", "missing [cost] section")
    raw_p = cp.get("cost", "p", fallback=None)
    if raw_p is None:
        _fail("cost.p", "missing")
    raw_p = raw_p.strip().lower()
    if raw_p in ("inf", "infinity"):
        p = math.inf
    else:
        try:
            p = float(raw_p)
        except ValueError:
            _fail("cost.p", f"expected a number or 'inf', got {raw_p!r}")
    if not p >= 1.0:
        _fail("cost.p", f"exponent must be >= 1, got {p}")
    raw_d = cp.get("cost", "dimension", fallback=None)
    if raw_d is None:
        _fail("cost.dimension", "missing")
    try:
        dim = int(raw_d)
    except ValueError:
        _fail("cost.dimension", f"expected an integer, got {raw_d!r}")
    if dim < 1:
        _fail("cost.dimension", f"dimension must be positive, got {dim}")

    if not cp.has_section("source"):
        _fail("source", "missing [source] section")
    raw_box = cp.get("source", "box", fallback=None)
    if raw_box is None:
        _fail("source.box", "missing")
    parts = [seg.strip() for seg in raw_box.split(";")]
    if len(parts) != dim:
        _fail("source.box", f"expected {dim} 'lo hi' groups separated by ';', got {len(parts)}")
    box = []
    for k, seg in enumerate(parts):
        lo, hi = _floats(f"source.box[{k}]", seg, count=2)
        if not lo < hi:
            _fail(f"source.box[{k}]", f"need lo < hi, got {lo} >= {hi}")
        box.append((lo, hi))
    density_file = cp.get("source", "density_file", fallback=None)
    if density_file is not None:
        density_file = density_file.strip()
        if not density_file:
            _fail("source.density_file", "must not be empty when present")

    if not cp.has_section("grid"):
        _fail("grid", "missing [grid] section")
    raw_res = cp.get("grid", "resolution", fallback=None)
    if raw_res is None:
        _fail("grid.resolution", "missing")
    toks = raw_res.split()
    if len(toks) not in (1, dim):
        _fail("grid.resolution", f"expected 1 or {dim} integers, got {len(toks)}")
    try:
        res = tuple(int(tok) for tok in toks)
    except ValueError:
        _fail("grid.resolution", f"expected integers, got {raw_res!r}")
    if len(res) == 1:
        res = res * dim
    for r in res:
        if r < 2:
            _fail("grid.resolution", f"each resolution must be >= 2, got {r}")

    tgt_sections = sorted(
        (s for s in cp.sections() if s.startswith("target.")),
        key=lambda s: s.split(".", 1)[1],
    )
    indices = []
    for s in tgt_sections:
        suffix = s.split(".", 1)[1]
        try:
            indices.append(int(suffix))
        except ValueError:
            _fail(s, "target sections must be [target.<integer>]")
    if sorted(indices) != list(range(1, len(indices) + 1)):
        _fail("target", f"target sections must be numbered 1..n without gaps, got {sorted(indices)}")
    if len(indices) < 2:
        _fail("target", f"need at least 2 targets, got {len(indices)}")
    points, masses = [], []
    for k in sorted(indices):
        sec = f"target.{k}"
        raw_pt = cp.get(sec, "point", fallback=None)
        if raw_pt is None:
            _fail(f"{sec}.point", "missing")
        points.append(_floats(f"{sec}.point", raw_pt, count=dim))
        raw_m = cp.get(sec, "mass", fallback=None)
        if raw_m is None:
            _fail(f"{sec}.mass", "missing")
        (m,) = _floats(f"{sec}.mass", raw_m, count=1)
        if not m > 0.0:
            _fail(f"{sec}.mass", f"mass must be positive, got {m}")
        masses.append(m)
    total = sum(masses)
    if abs(total - 1.0) > 1e-9:
        _fail("target", f"target masses must sum to 1, got {total!r}")

    solver = []
    if cp.has_section("solver"):
        for key in cp.options("solver"):
            if key not in _SOLVER_FIELDS:
                _fail(f"solver.{key}", f"unknown solver option (known: {', '.join(_SOLVER_FIELDS)})")
            raw = cp.get("solver", key)
            if key == "max_iterations":
                try:
                    solver.append((key, int(raw)))
                except ValueError:
                    _fail(f"solver.{key}", f"expected an integer, got {raw!r}")
            elif key == "step_rule":
                val = raw.strip()
                if val not in ("backtracking", "fixed"):
                    _fail(f"solver.{key}", f"expected 'backtracking' or 'fixed', got {val!r}")
                solver.append((key, val))
            else:
                try:
                    solver.append((key, float(raw)))
                except ValueError:
                    _fail(f"solver.{key}", f"expected a number, got {raw!r}")
    tolerances = []
    if cp.has_section("tolerances"):
        for key in cp.options("tolerances"):
            if key not in _TOLERANCE_FIELDS:
                _fail(
                    f"tolerances.{key}",
                    f"unknown tolerance (known: {', '.join(_TOLERANCE_FIELDS)})",
                )
            raw = cp.get("tolerances", key)
            try:
                val = float(raw)
            except ValueError:
                _fail(f"tolerances.{key}", f"expected a number, got {raw!r}")
            if not val > 0.0:
                _fail(f"tolerances.{key}", f"must be positive, got {val}")
            tolerances.append((key, val))
        if any(k == "tie_tolerance" for k, _ in tolerances) and any(
            k == "tie_tolerance" for k, _ in solver
        ):
            _fail(
                "tolerances.tie_tolerance",
                "tie_tolerance given in both [solver] and [tolerances]; pick one",
            )
    inst = InstanceSpec(
        p=p,
        dimension=dim,
        box=tuple(box),
        resolution=res,
        target_points=tuple(points),
        target_masses=tuple(masses),
        density_file=density_file,
        solver=tuple(sorted(solver)),
        tolerances=tuple(sorted(tolerances)),
    )
    try:
        inst.cost_spec()
        inst.target_measure()
        inst.solve_options()
    except Exception as exc:
        _fail("file", f"inconsistent instance: {exc}")
    return inst


def parse_instance(path) -> InstanceSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        _fail("file", f"cannot read {path}: {exc}")
    return parse_instance_text(text, source=str(path))


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return repr(float(x))


def emit_instance(inst: InstanceSpec) -> str:
    lines = ["[cost]", f"p = {_fmt(inst.p)}", f"dimension = {inst.dimension}", ""]
    lines.append("[source]")
    lines.append("box = " + " ; ".join(f"{_fmt(lo)} {_fmt(hi)}" for lo, hi in inst.box))
    if inst.density_file is not None:
        lines.append(f"density_file = {inst.density_file}")
    lines.append("")
    lines.append("[grid]")
    lines.append("resolution = " + " ".join(str(r) for r in inst.resolution))
    lines.append("")
    for k, (pt, m) in enumerate(zip(inst.target_points, inst.target_masses), start=1):
        lines.append(f"[target.{k}]")
        lines.append("point = " + " ".join(_fmt(v) for v in pt))
        lines.append(f"mass = {_fmt(m)}")
        lines.append("")
    if inst.solver:
        lines.append("[solver]")
        for key, val in inst.solver:
            lines.append(f"{key} = {val if not isinstance(val, float) else _fmt(val)}")
        lines.append("")
    if inst.tolerances:
        lines.append("[tolerances]")
        for key, val in inst.tolerances:
            lines.append(f"{key} = {_fmt(val)}")
        lines.append("")
    return "\n".join(lines)


def write_instance(inst: InstanceSpec, path) -> None:
    Path(path).write_text(emit_instance(inst))
