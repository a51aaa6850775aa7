"""Constraint recursion for linear-quadratic problems with singular control cost."""

from .algorithm import (
    EXHAUSTED,
    FEEDBACK,
    STAGNATION,
    AlgorithmResult,
    ConstraintMatrix,
    PartialFeedback,
    SvdSplit,
    feedback_rate_map,
    final_submanifold,
    independent_rows,
    numerical_rank,
    run,
    step,
    svd_split,
)
from .closed_form import (
    TildeBlock,
    theorem2_blocks,
    tilde_closed_form,
    tilde_recurrence,
)
from .dae import (
    LinearDAE,
    WeierstrassSpec,
    build_weierstrass,
    dae_constraint_chain,
    pencil_is_regular,
    random_weierstrass_spec,
)
from .experiments import (
    ExperimentRecord,
    SlopeSummary,
    gen_experiment1,
    gen_experiment2,
    gen_experiment3,
    run_sweep,
    slope_report,
    slope_summary,
    write_records_csv,
    write_slopes_csv,
)
from .geometry import (
    LogLogFit,
    Subspace,
    SubspaceDimensionMismatch,
    loglog_fit,
    loglog_slope,
    max_principal_angle,
    perturb,
)
from .problem import (
    ConstraintBlock,
    CostateTriple,
    LQProblem,
    dynamics_rhs,
    hamiltonian,
    primary_constraint,
    regular_feedback,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "AlgorithmResult",
    "ConstraintBlock",
    "ConstraintMatrix",
    "CostateTriple",
    "EXHAUSTED",
    "ExperimentRecord",
    "FEEDBACK",
    "LQProblem",
    "LinearDAE",
    "LogLogFit",
    "PartialFeedback",
    "STAGNATION",
    "SlopeSummary",
    "Subspace",
    "SubspaceDimensionMismatch",
    "SvdSplit",
    "TildeBlock",
    "WeierstrassSpec",
    "build_weierstrass",
    "dae_constraint_chain",
    "dynamics_rhs",
    "feedback_rate_map",
    "final_submanifold",
    "gen_experiment1",
    "gen_experiment2",
    "gen_experiment3",
    "hamiltonian",
    "independent_rows",
    "loglog_fit",
    "loglog_slope",
    "max_principal_angle",
    "numerical_rank",
    "pencil_is_regular",
    "perturb",
    "primary_constraint",
    "random_weierstrass_spec",
    "regular_feedback",
    "run",
    "run_sweep",
    "slope_report",
    "slope_summary",
    "step",
    "svd_split",
    "theorem2_blocks",
    "tilde_closed_form",
    "tilde_recurrence",
    "validate",
    "write_records_csv",
    "write_slopes_csv",
]
