"""opsplit: reflected operator-splitting solvers for monotone inclusions.

Solves 0 in (A + B)x where A is maximal monotone (given by resolvents)
and B is monotone and Lipschitz (given exactly or through an unbiased
stochastic oracle), plus a primal-dual variant for saddle problems with
an ergodic-gap guarantee.  Includes schedule/variance admissibility
validators, pathwise inequality diagnostics, benchmark problems with
independent reference solutions, and a reproducible experiment harness.
"""

from .kernels import BACKEND
from .operators import (
    LinearMap,
    LipschitzMonotoneMap,
    ProxFunction,
    ResolvableOperator,
    apply_map,
    estimate_operator_norm,
    prox_conjugate,
    resolvent,
)
from .oracles import StochasticOracle, VarianceSchedule, validate_variance
from .problems import (
    InclusionProblem,
    SaddleProblem,
    duality_gap,
    evaluate_gap,
    make_affine_inclusion,
    make_lasso,
    make_matrix_game,
    make_smoothed_saddle,
)
from .schedules import (
    StepSchedule,
    burn_in_n0,
    strongly_monotone_gamma,
    tau,
    validate_pd_schedule,
)
from .solvers import (
    PrimalDualState,
    SolverState,
    Trajectory,
    ergodic_average,
    frb_step,
    reflect,
    rfb_step,
    run,
    spd_step,
    srfb_step,
    srpg_step,
)
from .diagnostics import (
    InequalityReport,
    RunRecord,
    aggregate_expectation,
    check_lemma_main,
    check_lemma_qes,
    check_t_lower_bound,
    fit_rate,
)

__version__ = "0.1.0"
