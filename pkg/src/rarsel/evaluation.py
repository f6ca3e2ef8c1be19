"""Path evaluation protocols: oracle sign recovery, cross-validation, GIC, MSE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_ZERO_TOL, CoefficientVector, Dataset, PenaltyProfile, SignPattern
from .solver import SolutionPath, SolverConfig, fit_path


class EvaluationError(ValueError):
    """Invalid evaluation request."""


def path_sign_matches(
    path: SolutionPath,
    truth: SignPattern,
    zero_tol: float = DEFAULT_ZERO_TOL,
    converged_only: bool = True,
) -> bool:
    """True if any solution on the path reproduces the target sign pattern.

    Solutions flagged as not converged are not counted as recoveries unless
    ``converged_only`` is disabled.
    """
    target = truth.signs
    if len(target) != path.n_features:
        raise EvaluationError("sign pattern length does not match the path")
    if path.columns is not None:
        outside = np.delete(target, path.columns)
        if np.any(outside != 0):
            return False  # a true signal lives outside the fitted subspace
        target = target[path.columns]
    coef = path.coef
    signs = np.sign(coef)
    signs[np.abs(coef) <= zero_tol] = 0.0
    rows = (signs == target[None, :]).all(axis=1)
    if converged_only:
        rows = rows & path.converged
    return bool(rows.any())


def oracle_sign_success(
    output,
    truth: SignPattern,
    zero_tol: float = DEFAULT_ZERO_TOL,
    converged_only: bool = True,
) -> bool:
    """Oracle protocol: does any solution on any of the output's paths match?

    Scans the primary path and, for three-step estimators, every recorded
    purge-stage path.
    """
    paths = [output.primary_path]
    stage3 = getattr(output, "stage3_paths", None)
    if stage3:
        paths.extend(stage3.values())
    return any(
        path_sign_matches(path, truth, zero_tol=zero_tol, converged_only=converged_only)
        for path in paths
    )


@dataclass(frozen=True, eq=False)
class GicSelection:
    """Grid point chosen by the generalized information criterion."""

    index: int
    lambda_: float
    scores: np.ndarray


def gic_select(dataset: Dataset, path: SolutionPath, multiplier: float = 1.0) -> GicSelection:
    """Pick the grid point minimizing n log(RSS/n) + df * log(log n) * log p.

    Degrees of freedom count every nonzero coefficient, including unpenalized
    ones.  Ties resolve to the larger penalty.  ``multiplier`` rescales the
    model-size term (1.0 is the documented default form).
    """
    if dataset.n_features != path.n_features:
        raise EvaluationError("path was not fitted on a dataset of this width")
    n = dataset.n_samples
    x = dataset.x if path.columns is None else dataset.x[:, path.columns]
    preds = x @ path.coef.T + path.intercepts[None, :]
    rss = ((dataset.y[:, None] - preds) ** 2).sum(axis=0)
    rss = np.maximum(rss, 1e-12)
    df = path.nnz()
    penalty = multiplier * np.log(np.log(n)) * np.log(path.n_features)
    scores = n * np.log(rss / n) + df * penalty
    index = int(np.argmin(scores))  # first minimum = largest lambda
    return GicSelection(index=index, lambda_=float(path.lambdas[index]), scores=scores)


@dataclass(frozen=True, eq=False)
class CvResult:
    """Cross-validation curve with the refit at the selected penalty."""

    lambda_: float
    index: int
    mean_errors: np.ndarray
    grid: np.ndarray
    coef: CoefficientVector
    intercept: float


def kfold_cv(
    dataset: Dataset,
    profile: PenaltyProfile,
    k: int,
    config: SolverConfig | None = None,
    seed: int = 0,
) -> CvResult:
    """K-fold cross-validation over a shared lambda grid.

    Folds come from a seeded shuffle; the grid is computed once on the full
    data; the selected penalty minimizes the pooled held-out squared error;
    the model is then refit on the full data.
    """
    n = dataset.n_samples
    if not 2 <= k <= n:
        raise EvaluationError(f"k must lie in [2, {n}], got {k}")
    config = config or SolverConfig()
    # The shared grid is the full-data path's realized grid; its solutions
    # double as the full-data refits at the selected penalty.
    full_path = fit_path(dataset, profile, config)
    grid = full_path.lambdas

    rng = np.random.Generator(np.random.Philox(key=seed))
    order = rng.permutation(n)
    folds = np.array_split(order, k)

    sse = np.zeros(grid.size)
    for fold in folds:
        train = np.sort(np.setdiff1d(order, fold))
        sub = dataset.subset_rows(train)
        path = fit_path(sub, profile, config, lambdas=grid)
        preds = dataset.x[fold] @ path.coef.T + path.intercepts[None, :]
        sse += ((dataset.y[fold][:, None] - preds) ** 2).sum(axis=0)
    mean_errors = sse / n

    index = int(np.argmin(mean_errors))  # first minimum = largest lambda
    return CvResult(
        lambda_=float(grid[index]),
        index=index,
        mean_errors=mean_errors,
        grid=grid,
        coef=full_path.solution(index),
        intercept=float(full_path.intercepts[index]),
    )


def prediction_mse(beta: CoefficientVector, intercept: float, test: Dataset) -> float:
    """Mean squared prediction error on a held-out dataset."""
    if len(beta) != test.n_features:
        raise EvaluationError("coefficient vector does not match the test design")
    resid = test.y - intercept - test.x @ beta.values
    return float((resid**2).mean())


@dataclass(frozen=True, eq=False)
class EvalResult:
    """Outcome of evaluating one estimator on one dataset."""

    model_size: int
    oracle_sign_success: bool | None = None
    selected_lambda: float | None = None
    selected_beta: CoefficientVector | None = None
    selected_intercept: float | None = None
    test_mse: float | None = None

    def __post_init__(self):
        if self.selected_beta is not None and self.model_size != self.selected_beta.n_nonzero:
            raise EvaluationError("model_size must equal the support size of selected_beta")

    def to_dict(self, feature_names=None) -> dict:
        coef = None
        if self.selected_beta is not None:
            values = self.selected_beta.values
            coef = {}
            for j in self.selected_beta.support:
                label = feature_names[j] if feature_names is not None else str(int(j) + 1)
                coef[str(label)] = float(values[j])
        return {
            "model_size": self.model_size,
            "oracle_sign_success": self.oracle_sign_success,
            "selected_lambda": self.selected_lambda,
            "selected_intercept": self.selected_intercept,
            "test_mse": self.test_mse,
            "coefficients": coef,
        }
