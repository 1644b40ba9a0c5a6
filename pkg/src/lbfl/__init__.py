"""Lower-bounded facility location: approximation pipeline, exact oracles,
gap-instance galleries and a command-line interface."""

__version__ = "0.1.0"

from .bicriteria import BicriteriaSolution, RadiusTable, build_bicriteria_ufl, radius, solve_bicriteria
from .flow import Assignment, FlowNetwork, assign_lower_bounded, cdufl_best_assignment, min_cost_flow
from .local_search import (
    CduflSolution,
    LocalSearchConfig,
    cdufl_local_search,
    cdufl_sqrt2,
    make_delete_optimal,
    ufl_local_search,
)
from .model import (
    CduflInstance,
    CostBreakdown,
    InfeasibleError,
    LbflInstance,
    LbflSolution,
    UflInstance,
    check_feasible,
    evaluate,
    evaluate_lbfl,
    metric_completion,
    validate_metric,
)
from .oracle import exact_cdufl, exact_lbfl, exact_ufl
from .pipeline import PipelineConfig, SolveReport, solve
from .reduction import AggregatedInstance, I2Solution, build_cdufl, build_i2, map_to_original, solve_i2

__all__ = [
    "AggregatedInstance",
    "Assignment",
    "BicriteriaSolution",
    "CduflInstance",
    "CduflSolution",
    "CostBreakdown",
    "FlowNetwork",
    "I2Solution",
    "InfeasibleError",
    "LbflInstance",
    "LbflSolution",
    "LocalSearchConfig",
    "PipelineConfig",
    "RadiusTable",
    "SolveReport",
    "UflInstance",
    "assign_lower_bounded",
    "build_bicriteria_ufl",
    "build_cdufl",
    "build_i2",
    "cdufl_best_assignment",
    "cdufl_local_search",
    "cdufl_sqrt2",
    "check_feasible",
    "evaluate",
    "evaluate_lbfl",
    "exact_cdufl",
    "exact_lbfl",
    "exact_ufl",
    "make_delete_optimal",
    "map_to_original",
    "metric_completion",
    "min_cost_flow",
    "radius",
    "solve",
    "solve_bicriteria",
    "solve_i2",
    "ufl_local_search",
    "validate_metric",
    "__version__",
]
