"""Golden-ratio proximal ADMM toolkit.

Solvers for linearly constrained separable convex problems
``min g(x) + f(w)  s.t.  Ax + Bw = b`` with two norm-free adaptive
step-size rules, fixed-step baselines, benchmark problem generators, and
a comparison harness.
"""

from .linops import (
    BlurPeriodic,
    DenseMap,
    Div2dPeriodic,
    Grad2dPeriodic,
    Identity,
    Image2D,
    LinearMap,
    NegatedIdentity,
    OTMarginal,
    ScaledIdentity,
    estimate_spectral_norm,
    gaussian_psf,
    local_curvature,
)
from .prox import (
    GroupL21,
    L1,
    LinearNonneg,
    ProxSolveError,
    ProxTerm,
    QuadData,
    SquaredL2,
)
from .solver import (
    ALGORITHMS,
    GOLDEN_RATIO,
    DecreasingStep,
    FixedStep,
    IncreasingStep,
    SolverState,
    SplitProblem,
    StepRule,
    default_xi,
    golden_combine,
    initial_state,
    run,
    step,
    tau_update_alg1,
    tau_update_alg2,
    w_update,
    x_update,
    y_update,
)
from .metrics import CSV_COLUMNS, MetricsRow, RunTrace, fes_gap, objective, psnr
from .problems import (
    DEFAULT_PARAMS,
    ProblemSpec,
    gen_deblur,
    gen_lasso,
    gen_rof,
    gen_uot,
    generate,
    load_problem,
    save_problem,
)
from .harness import (
    ComparisonReport,
    ReferenceSolution,
    RunConfig,
    compare,
    preset_configs,
    preset_rule,
    reference_solve,
)

__version__ = "0.1.0"
