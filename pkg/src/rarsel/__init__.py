"""Retention-based sparse linear regression toolkit.

A weighted coordinate-descent lasso with per-feature penalty statuses
(unpenalized / weighted / excluded), marginal screening with permutation
thresholds, two- and three-stage retention estimators, baseline pipelines,
and a reproducible sign-recovery simulation harness.
"""

from .core import (
    CoefficientVector,
    DataError,
    Dataset,
    DEFAULT_ZERO_TOL,
    PenaltyProfile,
    SignPattern,
    load_csv,
    sign_of,
    standardize,
)
from .estimators import (
    EstimatorOutput,
    run_ada_lasso,
    run_isis_lasso,
    run_lasso,
    run_mrar,
    run_rar,
    run_sis_lasso,
)
from .evaluation import (
    CvResult,
    EvalResult,
    GicSelection,
    gic_select,
    kfold_cv,
    oracle_sign_success,
    path_sign_matches,
    prediction_mse,
)
from .experiment import (
    CellStats,
    ExperimentConfig,
    MethodSpec,
    RealdataConfig,
    RealdataReport,
    SignRecoveryTable,
    derive_seed,
    emit_table,
    run_experiment,
    run_realdata,
)
from .scenarios import (
    BlockCovariance,
    PopulationDiagnostics,
    ScenarioSpec,
    build_covariance,
    dimension_rule,
    equicorrelated_block,
    load_scenario,
    population_diagnostics,
    sample_dataset,
    save_scenario,
    strong_sets,
)
from .screening import (
    MarginalStats,
    RetentionResult,
    default_screen_size,
    isis_select,
    marginal_coefficients,
    permutation_threshold,
    retain,
    sis_select,
)
from .solver import (
    FitResult,
    KktReport,
    SolutionPath,
    SolverConfig,
    constrained_ols,
    fit,
    fit_path,
    kkt_check,
    lambda_grid,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
