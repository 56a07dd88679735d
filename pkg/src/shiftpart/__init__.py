"""Semi-discrete transport shifts under p-norm costs, with partition diagnostics.

The package solves for dual shifts that split a continuous source measure
on a box among finitely many weighted target points, where the ground cost
is a p-norm distance, and diagnoses whether the induced argmax regions
actually partition the source measure (flat spots of the pairwise cost
difference can carry positive mass and obstruct this).
"""

from .cost import CostSpec, eval_cost, eval_g, grad_cost, points_cost, points_grad
from .errors import (
    AscentMonotonicityError,
    ConvergenceFailureError,
    DimensionMismatchError,
    InstanceFormatError,
    InvalidArgumentError,
    ShiftpartError,
    SingularPointError,
    SizeGuardError,
    UnsupportedCostError,
)
from .instance import (
    InstanceSpec,
    emit_instance,
    parse_instance,
    parse_instance_text,
    write_instance,
)
from .measure import QuadratureGrid, SourceMeasure, build_grid, integrate_indicator
from .oracle import (
    DiscreteLPResult,
    GDistribution,
    MCEstimate,
    export_flow_csv,
    mc_integrate,
    scan_g_distribution,
    solve_discrete_lp,
)
from .partition import (
    BoundaryReport,
    CellAssignment,
    CostCache,
    GAtom,
    TargetMeasure,
    assign_cells,
    boundary_measure,
    cell_masses,
    eval_F,
    flat_value_scan,
    level_set_measure,
    partition_threshold,
)
from .solver import (
    ShiftResult,
    SolveOptions,
    TwoTargetProfile,
    build_two_target_profile,
    dual_objective,
    primal_cost,
    solve_shifts,
)

__version__ = "0.1.0"

__all__ = [
    "AscentMonotonicityError",
    "BoundaryReport",
    "CellAssignment",
    "ConvergenceFailureError",
    "CostCache",
    "CostSpec",
    "DimensionMismatchError",
    "DiscreteLPResult",
    "GAtom",
    "GDistribution",
    "InstanceFormatError",
    "InstanceSpec",
    "InvalidArgumentError",
    "MCEstimate",
    "QuadratureGrid",
    "ShiftResult",
    "ShiftpartError",
    "SingularPointError",
    "SizeGuardError",
    "SolveOptions",
    "SourceMeasure",
    "TargetMeasure",
    "TwoTargetProfile",
    "UnsupportedCostError",
    "assign_cells",
    "boundary_measure",
    "build_grid",
    "build_two_target_profile",
    "cell_masses",
    "dual_objective",
    "emit_instance",
    "eval_F",
    "eval_cost",
    "eval_g",
    "export_flow_csv",
    "flat_value_scan",
    "grad_cost",
    "integrate_indicator",
    "level_set_measure",
    "mc_integrate",
    "parse_instance",
    "parse_instance_text",
    "partition_threshold",
    "points_cost",
    "points_grad",
    "primal_cost",
    "scan_g_distribution",
    "solve_discrete_lp",
    "solve_shifts",
    "write_instance",
    "__version__",
]
