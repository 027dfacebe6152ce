"""Desk-scale numerics for SDEs dX = b dt + dW whose drift has only
integrability (or Hoelder) regularity: backward heat solves with rough
forcing, the iterated drift-regularization ladder, coupled Euler batches,
and change-of-measure diagnostics."""

from .errors import BoxMismatchError, ResolutionError, RoughDriftError, SingularityError
from .fields import (
    DriftField,
    GridField,
    MixedNorm,
    SpaceTimeBox,
    holder_norm,
    lqp_norm,
    prodi_serrin_check,
)
from .corpus import make_drift, registry_dump, regularization_schedule
from .gridio import read_grid_field, write_grid_field
from .heat import (
    HeatSolution,
    RegularityConstants,
    gradient_field,
    measure_constants,
    smoothed_time_integral,
    solve_backward_heat,
    sup_gradient,
)
from .zvonkin import (
    ContractionReport,
    ZvonkinLadder,
    apply_T,
    build_ladder,
    contraction_report,
    transformed_fields,
)
from .sde import (
    PathBatch,
    SimConfig,
    TransformedBatch,
    a_process,
    drift_difference_decay,
    holder_moment_estimate,
    ito_residual,
    ito_residual_convergence,
    simulate,
    simulate_coupled,
    transformed_process,
)
from .girsanov import (
    GirsanovWeight,
    KernelBound,
    exp_moment_check,
    girsanov_expectation,
    girsanov_weight,
    kernel_bound_estimate,
    khasminskii_check,
    two_estimator_check,
)
from .reports import EstimateReport
from .suites import ExperimentConfig, SuiteResult, corpus_list, run_suite

__version__ = "0.1.0"
