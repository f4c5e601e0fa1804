"""Total-effect l1 regularization for predictors on a hierarchical tree.

Predictors that form a weighted directed tree (each child generated from
its parent plus independent noise) induce an influence matrix D =
(I - A)^(-1) whose rows collect ancestor-to-descendant path weights.
Penalizing ||D b||_1 regularizes the total effect of each node on the
outcome; stacking [D; alpha*I] adds a direct-effect penalty on top.  The
package provides the tree machinery, two certified solvers, Cp-based
tuning, the alignment diagnostic for support recovery, a replication
harness for method comparison, and a CLI with CSV/JSON/DOT interchange.
"""

__version__ = "0.1.0"

from .diagnostics import IrrepReport, irrepresentability
from .errors import NumericalError, TreeLassoError, ValidationError
from .selection import (
    EffectReport,
    TuningResult,
    cp_value,
    degrees_of_freedom,
    effect_report,
    estimate_noise_variance,
    select_elastic_net,
    select_model,
)
from .simulation import (
    Metrics,
    ReplicationConfig,
    Scenario,
    SCENARIO_NAMES,
    StudyReport,
    evaluate,
    generate_data,
    run_study,
    scenario,
)
from .solvers import (
    Fit,
    PathFit,
    kkt_residual,
    lambda_max,
    solve_elastic_net,
    solve_genlasso,
    solve_genlasso_path,
    solve_lasso_path,
    stack_penalty,
)
from .tree import (
    InfluenceEstimate,
    NodeRole,
    Tree,
    build_tree,
    compositional_adjacency,
    estimate_influence_from_data,
    influence_matrix,
    make_binary_tree,
)

__all__ = [
    "__version__",
    "IrrepReport",
    "irrepresentability",
    "NumericalError",
    "TreeLassoError",
    "ValidationError",
    "EffectReport",
    "TuningResult",
    "cp_value",
    "degrees_of_freedom",
    "effect_report",
    "estimate_noise_variance",
    "select_elastic_net",
    "select_model",
    "Metrics",
    "ReplicationConfig",
    "Scenario",
    "SCENARIO_NAMES",
    "StudyReport",
    "evaluate",
    "generate_data",
    "run_study",
    "scenario",
    "Fit",
    "PathFit",
    "kkt_residual",
    "lambda_max",
    "solve_elastic_net",
    "solve_genlasso",
    "solve_genlasso_path",
    "solve_lasso_path",
    "stack_penalty",
    "InfluenceEstimate",
    "NodeRole",
    "Tree",
    "build_tree",
    "compositional_adjacency",
    "estimate_influence_from_data",
    "influence_matrix",
    "make_binary_tree",
]
