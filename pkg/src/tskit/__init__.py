"""tskit: computational superstructures around black-box timesteppers.

Wraps any cycle-map simulator to locate fixed points (RPM), analyze their
Floquet stability matrix-free (Arnoldi), continue them in a parameter
(pseudo-arclength), and accelerate transient simulation (projective
integration).
"""

from .arnoldi import (
    ArnoldiFactorization,
    FloquetResult,
    RitzPair,
    arnoldi_factorize,
    floquet_multipliers,
)
from .continuation import (
    BranchPoint,
    ContinuationOptions,
    FoldRecord,
    correct,
    detect_fold,
    predict,
    trace_branch,
)
from .core import (
    CallableTimestepper,
    EpsilonPolicy,
    Parameters,
    Timestepper,
    dense_jacobian_bruteforce,
    evaluate_map,
    jacobian_vector_product,
    residual,
)
from .hessenberg import dense_eigenvalues, hessenberg_eigenvalues, hessenberg_reduce
from .projective import (
    EnvelopeTrajectory,
    ProjectiveSchedule,
    chord_estimate,
    chord_estimate_lsq,
    projective_run,
    projective_step,
)
from .rpm import (
    ConvergenceStatus,
    FixedPointResult,
    RpmOptions,
    SlowBasis,
    adapt_basis,
    picard_warmup,
    rpm_solve,
    slow_jacobian,
)
from .runner import RunReport, compare_runs, run_task, write_csv

__version__ = "0.1.0"
