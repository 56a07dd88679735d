"""Instance-file format: exact round-trips and field-addressed errors."""

from __future__ import annotations

import math

import numpy as np
import pytest

from shiftpart.errors import InstanceFormatError
from shiftpart.instance import (
    InstanceSpec,
    emit_instance,
    parse_instance,
    parse_instance_text,
    write_instance,
)

GOOD = """\
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
"""


def make_spec(**overrides) -> InstanceSpec:
    kwargs = dict(
        p=math.inf,
        dimension=2,
        box=((0.0, 1.0), (0.0, 1.0)),
        resolution=(512, 512),
        target_points=((0.25, 0.5), (0.75, 0.5)),
        target_masses=(0.5, 0.5),
    )
    kwargs.update(overrides)
    return InstanceSpec(**kwargs)


# ---------------------------------------------------------------------------
# parsing and round-trips


def test_parse_minimal_instance():
    inst = parse_instance_text(GOOD)
    assert inst.p == math.inf
    assert inst.dimension == 2
    assert inst.box == ((0.0, 1.0), (0.0, 1.0))
    assert inst.resolution == (512, 512)
    assert inst.target_points == ((0.25, 0.5), (0.75, 0.5))
    assert inst.target_masses == (0.5, 0.5)
    assert inst.density_file is None
    assert inst.solver == () and inst.tolerances == ()


def test_emit_parse_round_trip_is_identity():
    # Awkward floats on purpose: repr must round-trip them bit-exactly.
    third = 1.0 / 3.0
    inst = make_spec(
        p=1.5,
        box=((0.0, 1.0), (-0.25, third)),
        resolution=(128, 64),
        target_points=((0.1 + 0.2, 0.5), (0.75, third)),
        target_masses=(third, 1.0 - third),
        solver=(
            ("damping", 0.3),
            ("mass_tolerance", 2e-05),
            ("max_iterations", 500),
            ("step_rule", "fixed"),
        ),
        tolerances=(("atom_threshold", 0.002), ("band", 1e-07)),
    )
    again = parse_instance_text(emit_instance(inst))
    assert again == inst


def test_round_trip_preserves_infinite_exponent():
    inst = parse_instance_text(GOOD)
    text = emit_instance(inst)
    assert "p = inf" in text
    assert parse_instance_text(text) == inst


def test_write_and_parse_file(tmp_path):
    inst = make_spec(tolerances=(("tie_tolerance", 0.0005),))
    path = tmp_path / "pair.ini"
    write_instance(inst, path)
    assert parse_instance(path) == inst


def test_scalar_resolution_broadcasts_to_all_axes():
    text = GOOD.replace("resolution = 512", "resolution = 96")
    assert parse_instance_text(text).resolution == (96, 96)


def test_tie_tolerance_accepted_under_solver_section():
    text = GOOD + "\n[solver]\ntie_tolerance = 0.0005\n"
    inst = parse_instance_text(text)
    assert inst.solve_options().tie_tolerance == 0.0005


# ---------------------------------------------------------------------------
# derived objects and precedence


def test_solve_options_precedence():
    inst = make_spec(
        solver=(("mass_tolerance", 1e-4), ("tie_tolerance", 2e-4)),
    )
    opts = inst.solve_options()
    assert opts.mass_tolerance == 1e-4 and opts.tie_tolerance == 2e-4

    inst = make_spec(
        solver=(("mass_tolerance", 1e-4),),
        tolerances=(("tie_tolerance", 5e-4),),
    )
    opts = inst.solve_options()
    assert opts.tie_tolerance == 5e-4
    # Explicit overrides beat everything in the file.
    assert inst.solve_options(mass_tolerance=2e-3).mass_tolerance == 2e-3


def test_band_and_atom_threshold_defaults():
    inst = make_spec()
    assert inst.band == 1e-6
    assert inst.atom_threshold == 1e-3
    inst = make_spec(tolerances=(("atom_threshold", 0.004), ("band", 2e-6)))
    assert inst.band == 2e-6
    assert inst.atom_threshold == 0.004


def test_source_measure_uniform_and_density(tmp_path):
    assert make_spec().source_measure().density is None

    (tmp_path / "dens.txt").write_text("2 2 2\n0 1 0 1\n1 2 3 4\n")
    inst = make_spec(density_file="dens.txt")
    measure = inst.source_measure(base_dir=tmp_path)
    assert measure.box == ((0.0, 1.0), (0.0, 1.0))
    assert np.array_equal(measure.density, [[1.0, 2.0], [3.0, 4.0]])


def test_density_file_box_mismatch_is_rejected(tmp_path):
    (tmp_path / "dens.txt").write_text("2 2 2\n0 2 0 1\n1 2 3 4\n")
    inst = make_spec(density_file="dens.txt")
    with pytest.raises(InstanceFormatError) as excinfo:
        inst.source_measure(base_dir=tmp_path)
    assert excinfo.value.field == "source.box"


def test_cost_and_target_accessors():
    inst = parse_instance_text(GOOD)
    spec = inst.cost_spec()
    assert spec.p == math.inf and spec.d == 2
    tm = inst.target_measure()
    assert tm.n == 2
    assert np.array_equal(tm.masses, [0.5, 0.5])


# ---------------------------------------------------------------------------
# malformed files: each failure names the offending field


@pytest.mark.parametrize(
    "mangle,field",
    [
        (lambda t: t.replace("[cost]\np = inf\ndimension = 2\n\n", ""), "cost"),
        (lambda t: t.replace("p = inf\n", ""), "cost.p"),
        (lambda t: t.replace("p = inf", "p = 0.5"), "cost.p"),
        (lambda t: t.replace("p = inf", "p = two"), "cost.p"),
        (lambda t: t.replace("dimension = 2\n", ""), "cost.dimension"),
        (lambda t: t.replace("dimension = 2", "dimension = 2.5"), "cost.dimension"),
        (lambda t: t.replace("dimension = 2", "dimension = 0"), "cost.dimension"),
        (lambda t: t.replace("[source]\nbox = 0 1 ; 0 1\n\n", ""), "source"),
        (lambda t: t.replace("box = 0 1 ; 0 1\n", ""), "source.box"),
        (lambda t: t.replace("box = 0 1 ; 0 1", "box = 0 1"), "source.box"),
        (lambda t: t.replace("box = 0 1 ; 0 1", "box = 1 0 ; 0 1"), "source.box[0]"),
        (lambda t: t.replace("box = 0 1 ; 0 1", "box = 0 1 ; one 2"), "source.box[1]"),
        (lambda t: t.replace("[grid]\nresolution = 512\n\n", ""), "grid"),
        (lambda t: t.replace("resolution = 512\n", ""), "grid.resolution"),
        (lambda t: t.replace("resolution = 512", "resolution = 1"), "grid.resolution"),
        (
            lambda t: t.replace("resolution = 512", "resolution = 16 16 16"),
            "grid.resolution",
        ),
        (lambda t: t.replace("[target.2]", "[target.3]"), "target"),
        (
            lambda t: t.split("[target.2]")[0],  # only one target left
            "target",
        ),
        (lambda t: t.replace("point = 0.25 0.5\n", ""), "target.1.point"),
        (lambda t: t.replace("point = 0.25 0.5", "point = 0.25"), "target.1.point"),
        (
            lambda t: t.replace("mass = 0.5\n\n[target.2]", "mass = -0.5\n\n[target.2]"),
            "target.1.mass",
        ),
        (
            lambda t: t.replace("mass = 0.5\n\n[target.2]", "mass = 0.7\n\n[target.2]"),
            "target",
        ),
        (lambda t: t + "\n[solver]\nspeed = 11\n", "solver.speed"),
        (
            lambda t: t + "\n[solver]\nstep_rule = newton\n",
            "solver.step_rule",
        ),
        (
            lambda t: t + "\n[solver]\nmax_iterations = many\n",
            "solver.max_iterations",
        ),
        (lambda t: t + "\n[tolerances]\ngap = 0.1\n", "tolerances.gap"),
        (lambda t: t + "\n[tolerances]\nband = 0\n", "tolerances.band"),
        (
            lambda t: t
            + "\n[solver]\ntie_tolerance = 1e-4\n\n[tolerances]\ntie_tolerance = 1e-4\n",
            "tolerances.tie_tolerance",
        ),
        (lambda t: "not ini at all\n" + t, "file"),
    ],
)
def test_malformed_instance_names_the_field(mangle, field):
    with pytest.raises(InstanceFormatError) as excinfo:
        parse_instance_text(mangle(GOOD))
    assert excinfo.value.field == field
    assert str(excinfo.value).startswith(field + ":")


def test_inconsistent_solver_values_fail_at_parse_time():
    # Values that parse but violate the solver's own validation.
    text = GOOD + "\n[solver]\ndamping = 7\n"
    with pytest.raises(InstanceFormatError) as excinfo:
        parse_instance_text(text)
    assert excinfo.value.field == "file"


def test_unreadable_path_is_reported(tmp_path):
    with pytest.raises(InstanceFormatError) as excinfo:
        parse_instance(tmp_path / "missing.ini")
    assert excinfo.value.field == "file"
