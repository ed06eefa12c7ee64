"""nashlab: anchored Nash inequalities, moderation criteria, and diffusive
heat-kernel bounds for random walks in degenerate static and dynamic
random environments, verified numerically at desk scale."""

from .kernels import BACKEND
from .lattice import (
    EdgeField,
    LatticeGeometry,
    SiteFunction,
    anchored_weight,
    box_average,
    box_median,
    gradient,
    lp_norm,
)
from .inequalities import (
    InequalityReport,
    NashExponents,
    build_path,
    hls_ratio,
    isoperimetric_ratio,
    maximal_Mq,
    nash_exponents,
    nash_ratio,
    opt_lemma,
    path_count,
    poincare_sobolev_ratio,
    function_corpus,
    theta_c,
)
from .environments import (
    DynamicEnvironment,
    ExclusionTrajectory,
    StaticEnvironment,
    env_from_exclusion,
    exclusion_simulate,
    iid_static,
    resampling_env,
    time_reverse,
)
from .heat import (
    HeatTrace,
    IntegratorConfig,
    dirichlet_energy,
    dissipation_check,
    evolve_dynamic,
    evolve_static,
    moment_N,
    reversal_check,
    suggest_radius,
)
from .moderation import (
    BoundReport,
    Kernel,
    ModerationReport,
    WeightField,
    assemble_bounds,
    check_moderation,
    kernel_constants,
    script_Mq,
    weights_from_env,
)
from .maximal import (
    StationaryField,
    lp_maximal_ratio,
    maximal_fn,
    min_fn,
    sample_field,
    weak11_experiment,
)
from .experiments import (
    ExperimentSpec,
    MomentSummary,
    run_exclusion,
    run_static_moment,
    run_tail_estimate,
)

__version__ = "0.1.0"
