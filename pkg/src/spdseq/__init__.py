"""Learning and testing on sequences of symmetric positive-definite matrices.

Stein-metric geometry of the SPD cone, fast recursive weighted Fréchet
mean estimation (with a Hilbert-sphere validation path), a recurrent
layer whose states and outputs live on the manifold, a gradient-checked
training engine, and a permutation-testing harness for group
differences between sequence populations.
"""

from .data import SpdSequenceDataset, gen_rotating_spd
from .estimator import SpdSequenceClassifier, check_spd_sequences, run_classification
from .exceptions import (
    ArchitectureMismatch,
    Diverged,
    DomainError,
    LogUndefined,
    NoConvergence,
    NotPositiveDefinite,
    SingularTriangular,
    SpdSeqError,
)
from .frechet import (
    FmDiagnostics,
    batch_wfm,
    consistency_report,
    recursive_stein_step,
    recursive_stein_wfm,
)
from .geometry import (
    from_chol_param,
    gl_distance,
    spd_relu,
    stein_distance,
    stein_distance_sq,
    to_chol_param,
    translate,
)
from .layer import DEFAULT_SCALES, SpdRecurrentLayer, realized_weights
from .linalg import (
    cholesky_factor,
    logdet_spd,
    orth_log,
    skew_exp,
    spd_function,
    spd_sqrt,
    sym_eigen,
    tri_solve,
)
from .model import SpdSequenceModel, param_count
from .sphere import SpherePoint, sphere_distance, sphere_embed, sphere_wfm, sphere_wfm_step
from .stats import (
    PermTestResult,
    cramer_baseline,
    fit_predictive,
    model_distance,
    permutation_test,
)
from .training import GradReport, TrainConfig, finite_diff_check, fit, grad

__version__ = "0.1.0"

__all__ = [
    "ArchitectureMismatch",
    "DEFAULT_SCALES",
    "Diverged",
    "DomainError",
    "FmDiagnostics",
    "GradReport",
    "LogUndefined",
    "NoConvergence",
    "NotPositiveDefinite",
    "PermTestResult",
    "SingularTriangular",
    "SpdRecurrentLayer",
    "SpdSeqError",
    "SpdSequenceClassifier",
    "SpdSequenceDataset",
    "SpdSequenceModel",
    "SpherePoint",
    "TrainConfig",
    "batch_wfm",
    "check_spd_sequences",
    "cholesky_factor",
    "consistency_report",
    "cramer_baseline",
    "finite_diff_check",
    "fit",
    "fit_predictive",
    "from_chol_param",
    "gen_rotating_spd",
    "gl_distance",
    "grad",
    "logdet_spd",
    "model_distance",
    "orth_log",
    "param_count",
    "permutation_test",
    "realized_weights",
    "recursive_stein_step",
    "recursive_stein_wfm",
    "run_classification",
    "skew_exp",
    "spd_function",
    "spd_relu",
    "spd_sqrt",
    "sphere_distance",
    "sphere_embed",
    "sphere_wfm",
    "sphere_wfm_step",
    "stein_distance",
    "stein_distance_sq",
    "sym_eigen",
    "to_chol_param",
    "translate",
    "tri_solve",
]
