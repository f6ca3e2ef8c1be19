"""Weighted-penalty least squares by cyclic coordinate descent.

Solves

    min_beta  (2n)^-1 ||y - X beta||^2  +  lambda * sum_j w_j |beta_j|

where each feature is unpenalized (w_j = 0), weighted (0 < w_j < inf) or
excluded (w_j = inf, coefficient hard-fixed at zero).  The per-coordinate
update is the exact scalar minimizer

    beta_j <- S(X_j' r / n + c_j beta_j, lambda w_j) / c_j,   c_j = ||X_j||^2 / n

with S the soft-threshold map; unpenalized coordinates use threshold zero, so
a single cyclic sweep covers all penalty statuses.  The intercept is handled
by centering X and y internally; coefficients are reported on the original
scale and the intercept absorbs the means.

After every full sweep the solver iterates over the current active set
(nonzero or unpenalized coordinates) until stable, then runs one more full
sweep to verify; this is a pure performance tactic and does not change the
output.  Convergence is declared when a full sweep moves no coordinate by
more than ``tol``.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit
from scipy.linalg import solve_triangular

from .core import CoefficientVector, Dataset, PenaltyProfile

#: Unpenalized-block size at which fit_path partials the block out via QR
#: instead of sweeping it.  Large unpenalized blocks make joint coordinate
#: descent ill-conditioned; partialing out solves the same convex problem
#: exactly (the block minimizer given the weighted coordinates is ordinary
#: least squares on projected data).
PARTIAL_OUT_MIN = 32


class SolverError(ValueError):
    """Invalid solver input (negative penalty, empty weighted set, ...)."""


class RankDeficiencyWarning(UserWarning):
    """A least-squares subproblem was rank deficient; minimum-norm solution used."""


@dataclass(frozen=True)
class SolverConfig:
    """Coordinate descent and path-grid settings.

    ``tol`` is the largest absolute coefficient change allowed in a converged
    full sweep (response units).  ``n_lambda`` geometric grid points span
    ``lambda_max`` down to ``lambda_max * lambda_min_ratio``.

    ``max_active`` (optional) stops extending a self-generated path once a
    solution's support exceeds the bound.  Near-saturated supports make the
    subproblem ill-conditioned and are useless for selection; capping them
    keeps paths cheap without touching any solution that could matter.
    Explicitly supplied grids are never truncated.
    """

    max_iters: int = 100_000
    tol: float = 1e-7
    n_lambda: int = 100
    lambda_min_ratio: float = 1e-3
    check_objective: bool = False
    max_active: int | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise SolverError("max_iters must be at least 1")
        if self.tol <= 0:
            raise SolverError("tol must be positive")
        if self.n_lambda < 1:
            raise SolverError("n_lambda must be at least 1")
        if not (0.0 < self.lambda_min_ratio < 1.0):
            raise SolverError("lambda_min_ratio must lie in (0, 1)")
        if self.max_active is not None and self.max_active < 1:
            raise SolverError("max_active must be at least 1 when set")


@njit(cache=True)
def _sweep(x, r, beta, coords, thr, colssq, n):
    """One cyclic pass over ``coords``; returns the largest coefficient move."""
    max_change = 0.0
    for idx in range(coords.shape[0]):
        j = coords[idx]
        cj = colssq[j]
        if cj <= 0.0:
            continue
        old = beta[j]
        g = 0.0
        for i in range(n):
            g += x[i, j] * r[i]
        g = g / n + cj * old
        t = thr[j]
        if t > 0.0:
            if g > t:
                new = (g - t) / cj
            elif g < -t:
                new = (g + t) / cj
            else:
                new = 0.0
        else:
            new = g / cj
        diff = old - new
        if diff != 0.0:
            for i in range(n):
                r[i] += x[i, j] * diff
            beta[j] = new
            if diff < 0.0:
                diff = -diff
            if diff > max_change:
                max_change = diff
    return max_change


@njit(cache=True)
def _solve(x, r, beta, coords, thr, colssq, tol, max_sweeps):
    """Full-sweep / active-set cycling until a full sweep is stable."""
    n = x.shape[0]
    sweeps = 0
    while sweeps < max_sweeps:
        change = _sweep(x, r, beta, coords, thr, colssq, n)
        sweeps += 1
        if change < tol:
            return sweeps, True
        count = 0
        for idx in range(coords.shape[0]):
            j = coords[idx]
            if beta[j] != 0.0 or thr[j] == 0.0:
                count += 1
        active = np.empty(count, dtype=np.int64)
        k = 0
        for idx in range(coords.shape[0]):
            j = coords[idx]
            if beta[j] != 0.0 or thr[j] == 0.0:
                active[k] = j
                k += 1
        while sweeps < max_sweeps:
            change = _sweep(x, r, beta, active, thr, colssq, n)
            sweeps += 1
            if change < tol:
                break
    return sweeps, False


@dataclass(frozen=True, eq=False)
class _CenteredDesign:
    """Internally centered copy of a dataset shared by solver entry points."""

    xc: np.ndarray
    yc: np.ndarray
    x_means: np.ndarray
    y_mean: float
    colssq: np.ndarray

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> "_CenteredDesign":
        x_means = dataset.x.mean(axis=0)
        xc = np.asfortranarray(dataset.x - x_means)
        y_mean = float(dataset.y.mean())
        yc = dataset.y - y_mean
        colssq = (xc * xc).sum(axis=0) / dataset.n_samples
        return cls(xc=xc, yc=yc, x_means=x_means, y_mean=y_mean, colssq=colssq)

    @property
    def n(self) -> int:
        return self.xc.shape[0]

    @property
    def p(self) -> int:
        return self.xc.shape[1]


@dataclass(frozen=True, eq=False)
class FitResult:
    """A single solve: coefficients on the original scale plus fit metadata."""

    coef: CoefficientVector
    intercept: float
    converged: bool = True
    sweeps: int = 0
    rank_deficient: bool = False

    def predict(self, x: np.ndarray) -> np.ndarray:
        return x @ self.coef.values + self.intercept


@dataclass(frozen=True, eq=False)
class SolutionPath:
    """Solutions along a decreasing lambda grid.

    ``coef`` has one row per grid point.  For paths fitted on a column subset
    (``columns`` set), rows live in the subspace and ``solution`` expands them
    back to ``n_features`` with implicit zeros elsewhere.
    """

    lambdas: np.ndarray
    coef: np.ndarray
    intercepts: np.ndarray
    converged: np.ndarray
    kkt_violation: np.ndarray
    n_features: int
    columns: np.ndarray | None = None

    def __post_init__(self):
        lambdas = np.asarray(self.lambdas, dtype=np.float64)
        if lambdas.ndim != 1 or lambdas.size < 1:
            raise SolverError("lambda grid must be a nonempty vector")
        if lambdas.size > 1 and not (np.diff(lambdas) < 0).all():
            raise SolverError("lambda grid must be strictly decreasing")
        coef = np.asarray(self.coef, dtype=np.float64)
        width = self.n_features if self.columns is None else len(self.columns)
        if coef.shape != (lambdas.size, width):
            raise SolverError("coefficient matrix does not match grid and width")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "coef", coef)

    def __len__(self) -> int:
        return self.lambdas.size

    def solution(self, i: int) -> CoefficientVector:
        if self.columns is None:
            return CoefficientVector(self.coef[i])
        full = np.zeros(self.n_features)
        full[self.columns] = self.coef[i]
        return CoefficientVector(full)

    @property
    def betas(self) -> tuple[CoefficientVector, ...]:
        return tuple(self.solution(i) for i in range(len(self)))

    def support_at(self, i: int) -> np.ndarray:
        """Nonzero feature indices (in the full feature space) at grid point i."""
        local = np.flatnonzero(self.coef[i])
        if self.columns is None:
            return local
        return np.sort(self.columns[local])

    def nnz(self) -> np.ndarray:
        return (self.coef != 0).sum(axis=1)


def _check_inputs(dataset: Dataset, profile: PenaltyProfile) -> None:
    if len(profile) != dataset.n_features:
        raise SolverError(
            f"penalty profile has {len(profile)} entries for {dataset.n_features} features"
        )


def _thresholds(profile: PenaltyProfile, lam: float) -> np.ndarray:
    thr = np.zeros(len(profile))
    w_mask = profile.weighted_mask
    thr[w_mask] = lam * profile.weights[w_mask]
    return thr


def _objective(r: np.ndarray, beta: np.ndarray, weights: np.ndarray, lam: float, n: int) -> float:
    w_finite = np.where(np.isfinite(weights), weights, 0.0)
    return float(r @ r) / (2 * n) + lam * float(w_finite @ np.abs(beta))


def _solve_debug(design, beta, r, coords, thr, weights, lam, config) -> tuple[int, bool]:
    # Slow path used by tests: full sweeps only, asserting the objective
    # never increases across sweeps.
    n = design.n
    prev = _objective(r, beta, weights, lam, n)
    for sweep in range(1, config.max_iters + 1):
        change = _sweep(design.xc, r, beta, coords, thr, design.colssq, n)
        obj = _objective(r, beta, weights, lam, n)
        if obj > prev + 1e-10 * max(1.0, abs(prev)):
            raise SolverError(
                f"objective increased across a sweep ({prev} -> {obj}); solver bug"
            )
        prev = obj
        if change < config.tol:
            return sweep, True
    return config.max_iters, False


def _fit_centered(
    design: _CenteredDesign,
    profile: PenaltyProfile,
    lam: float,
    warm: np.ndarray | None,
    config: SolverConfig,
) -> tuple[np.ndarray, np.ndarray, int, bool]:
    """Solve at one lambda; returns (beta, residual, sweeps, converged)."""
    coords = np.flatnonzero(profile.active_mask & (design.colssq > 0)).astype(np.int64)
    thr = _thresholds(profile, lam)
    beta = np.zeros(design.p)
    if warm is not None:
        beta[:] = warm
        beta[profile.excluded_mask] = 0.0
        beta[design.colssq <= 0] = 0.0
    if np.any(beta != 0):
        r = design.yc - design.xc @ beta
    else:
        r = design.yc.copy()
    if config.check_objective:
        sweeps, converged = _solve_debug(
            design, beta, r, coords, thr, profile.weights, lam, config
        )
    else:
        sweeps, converged = _solve(
            design.xc, r, beta, coords, thr, design.colssq, config.tol, config.max_iters
        )
    return beta, r, sweeps, converged


def fit(
    dataset: Dataset,
    profile: PenaltyProfile,
    lam: float,
    warm: CoefficientVector | None = None,
    config: SolverConfig | None = None,
) -> FitResult:
    """Solve the weighted problem at a single penalty level."""
    config = config or SolverConfig()
    if lam < 0:
        raise SolverError("lambda must be nonnegative")
    _check_inputs(dataset, profile)
    design = _CenteredDesign.from_dataset(dataset)
    warm_values = warm.values if warm is not None else None
    beta, _, sweeps, converged = _fit_centered(design, profile, lam, warm_values, config)
    intercept = design.y_mean - float(design.x_means @ beta)
    if not converged:
        warnings.warn(
            f"coordinate descent did not converge within {config.max_iters} sweeps",
            RuntimeWarning,
            stacklevel=2,
        )
    return FitResult(CoefficientVector(beta), intercept, converged, sweeps)


def lambda_grid(
    dataset: Dataset, profile: PenaltyProfile, config: SolverConfig | None = None
) -> np.ndarray:
    """Geometric penalty grid anchored at the smallest lambda that zeroes all weighted features."""
    config = config or SolverConfig()
    _check_inputs(dataset, profile)
    design = _CenteredDesign.from_dataset(dataset)
    return _lambda_grid_centered(design, profile, config)


def _lambda_grid_centered(
    design: _CenteredDesign, profile: PenaltyProfile, config: SolverConfig
) -> np.ndarray:
    w_mask = profile.weighted_mask
    if not w_mask.any():
        raise SolverError("lambda grid needs at least one weighted feature")
    unpen = np.flatnonzero(profile.unpenalized_mask)
    if unpen.size:
        xu = design.xc[:, unpen]
        sol, _, rank, _ = np.linalg.lstsq(xu, design.yc, rcond=None)
        if rank < unpen.size:
            warnings.warn(
                "unpenalized feature set is rank deficient; using the minimum-norm "
                "projection for the grid anchor",
                RankDeficiencyWarning,
                stacklevel=3,
            )
        r0 = design.yc - xu @ sol
    else:
        r0 = design.yc
    scores = np.abs(design.xc[:, w_mask].T @ r0) / (design.n * profile.weights[w_mask])
    lam_max = float(scores.max())
    if lam_max <= 0.0:
        lam_max = 1e-12  # degenerate response; produces an all-zero path
    if config.n_lambda == 1:
        return np.array([lam_max])
    return np.geomspace(lam_max, lam_max * config.lambda_min_ratio, config.n_lambda)


def _validate_grid(lambdas) -> np.ndarray:
    grid = np.asarray(lambdas, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 1:
        raise SolverError("lambda grid must be a nonempty vector")
    if (grid < 0).any():
        raise SolverError("lambda must be nonnegative")
    return grid


def fit_path(
    dataset: Dataset,
    profile: PenaltyProfile,
    config: SolverConfig | None = None,
    lambdas: np.ndarray | None = None,
) -> SolutionPath:
    """Fit the whole grid with warm starts, recording convergence and KKT slack."""
    config = config or SolverConfig()
    _check_inputs(dataset, profile)
    design = _CenteredDesign.from_dataset(dataset)
    grid = None if lambdas is None else _validate_grid(lambdas)
    truncate = config.max_active if lambdas is None else None
    if int(profile.unpenalized_mask.sum()) >= PARTIAL_OUT_MIN:
        return _fit_path_partialed(design, profile, config, grid, truncate)
    if grid is None:
        grid = _lambda_grid_centered(design, profile, config)

    k = grid.size
    coef = np.empty((k, design.p))
    intercepts = np.empty(k)
    converged = np.empty(k, dtype=bool)
    residuals = np.empty((design.n, k), order="F")

    warm = None
    kept = 0
    for i, lam in enumerate(grid):
        beta, r, _, ok = _fit_centered(design, profile, float(lam), warm, config)
        if truncate is not None and i > 0 and np.count_nonzero(beta) > truncate:
            break
        coef[i] = beta
        residuals[:, i] = r
        intercepts[i] = design.y_mean - float(design.x_means @ beta)
        converged[i] = ok
        warm = beta
        kept = i + 1

    grid = grid[:kept]
    coef = coef[:kept]
    violations = _batch_kkt(design, profile, grid, coef, residuals[:, :kept])
    return SolutionPath(
        lambdas=grid,
        coef=coef,
        intercepts=intercepts[:kept],
        converged=converged[:kept],
        kkt_violation=violations,
        n_features=design.p,
        columns=None,
    )


def _fit_path_partialed(
    design: _CenteredDesign,
    profile: PenaltyProfile,
    config: SolverConfig,
    grid: np.ndarray | None,
    truncate: int | None = None,
) -> SolutionPath:
    """Path solver that partials the unpenalized block out of the problem.

    For fixed weighted coordinates the unpenalized block minimizer is OLS on
    the block, so the weighted coordinates solve a plain weighted lasso on
    data projected off the block's column space.  Coordinate descent then
    runs only over the (projected) weighted coordinates; the block is
    recovered in closed form per grid point.  KKT slack is evaluated on the
    original problem, which verifies the equivalence numerically.
    """
    unpen = np.flatnonzero(profile.unpenalized_mask)
    wgt = np.flatnonzero(profile.weighted_mask)
    if wgt.size == 0:
        raise SolverError("lambda grid needs at least one weighted feature")
    n = design.n
    xq = design.xc[:, unpen]

    q_factor, r_factor = np.linalg.qr(xq)
    diag = np.abs(np.diag(r_factor))
    rank_deficient = diag.size > 0 and (
        diag.max() == 0.0 or diag.min() <= max(xq.shape) * np.finfo(float).eps * diag.max()
    )
    if rank_deficient:
        warnings.warn(
            "unpenalized block is rank deficient; using minimum-norm recovery",
            RankDeficiencyWarning,
            stacklevel=3,
        )
        u, s, vt = np.linalg.svd(xq, full_matrices=False)
        keep = s > (s[0] * max(xq.shape) * np.finfo(float).eps if s.size else 0.0)
        basis = u[:, keep]

        def recover_block(rhs):
            return vt[keep].T @ ((basis.T @ rhs) / s[keep][:, None])

    else:
        basis = q_factor

        def recover_block(rhs):
            return solve_triangular(r_factor, basis.T @ rhs, lower=False)

    y_til = design.yc - basis @ (basis.T @ design.yc)
    x_til = np.asfortranarray(design.xc[:, wgt] - basis @ (basis.T @ design.xc[:, wgt]))
    colssq_til = (x_til * x_til).sum(axis=0) / n
    weights_w = profile.weights[wgt]

    if grid is None:
        scores = np.abs(x_til.T @ y_til) / (n * weights_w)
        lam_max = float(scores.max())
        if lam_max <= 0.0:
            lam_max = 1e-12
        if config.n_lambda == 1:
            grid = np.array([lam_max])
        else:
            grid = np.geomspace(lam_max, lam_max * config.lambda_min_ratio, config.n_lambda)

    k = grid.size
    coords = np.flatnonzero(colssq_til > 0).astype(np.int64)
    beta_w = np.zeros(wgt.size)
    r = y_til.copy()
    coef_w = np.empty((k, wgt.size))
    converged = np.empty(k, dtype=bool)
    kept = 0
    for i, lam in enumerate(grid):
        thr = lam * weights_w
        _, ok = _solve(x_til, r, beta_w, coords, thr, colssq_til, config.tol, config.max_iters)
        # The unpenalized block counts as fully active for the support cap.
        if truncate is not None and i > 0 and unpen.size + np.count_nonzero(beta_w) > truncate:
            break
        coef_w[i] = beta_w
        converged[i] = ok
        kept = i + 1
    grid = grid[:kept]
    coef_w = coef_w[:kept]
    converged = converged[:kept]
    k = kept

    block = recover_block(design.yc[:, None] - design.xc[:, wgt] @ coef_w.T)
    coef = np.zeros((k, design.p))
    coef[:, wgt] = coef_w
    coef[:, unpen] = block.T
    intercepts = design.y_mean - coef @ design.x_means
    residuals = np.asfortranarray(design.yc[:, None] - design.xc @ coef.T)
    violations = _batch_kkt(design, profile, grid, coef, residuals)
    return SolutionPath(
        lambdas=grid,
        coef=coef,
        intercepts=intercepts,
        converged=converged,
        kkt_violation=violations,
        n_features=design.p,
        columns=None,
    )


def _violation_matrix(
    gradients: np.ndarray, profile: PenaltyProfile, lam_by_col: np.ndarray, coef_t: np.ndarray
) -> np.ndarray:
    """Worst-case stationarity slack per coordinate (rows) and lambda (cols).

    Unpenalized: |g_j| must vanish.  Weighted with beta_j = 0: |g_j| may not
    exceed lambda w_j.  Weighted with beta_j != 0: g_j must equal
    lambda w_j sign(beta_j).  Excluded coordinates carry no condition.
    """
    w_eff = np.where(np.isfinite(profile.weights), profile.weights, 0.0)
    lam_w = w_eff[:, None] * lam_by_col[None, :]
    abs_g = np.abs(gradients)
    viol = np.zeros_like(gradients)
    unp = profile.unpenalized_mask
    viol[unp, :] = abs_g[unp, :]
    w_mask = profile.weighted_mask
    if w_mask.any():
        nz = coef_t != 0
        at_zero = np.maximum(abs_g - lam_w, 0.0)
        at_nonzero = np.abs(gradients - lam_w * np.sign(coef_t))
        weighted = np.where(nz, at_nonzero, at_zero)
        viol[w_mask, :] = weighted[w_mask, :]
    return viol


def _batch_kkt(design, profile, grid, coef, residuals) -> np.ndarray:
    gradients = design.xc.T @ residuals / design.n
    viol = _violation_matrix(gradients, profile, grid, coef.T)
    return viol.max(axis=0)


@dataclass(frozen=True, eq=False)
class KktReport:
    """Stationarity check of a candidate solution."""

    max_violation: float
    violations: np.ndarray
    flagged: np.ndarray
    tol: float

    @property
    def ok(self) -> bool:
        return self.max_violation <= self.tol


def kkt_check(
    dataset: Dataset,
    profile: PenaltyProfile,
    lam: float,
    beta: CoefficientVector,
    tol: float = 1e-4,
) -> KktReport:
    """Evaluate the subgradient optimality conditions at a given solution."""
    _check_inputs(dataset, profile)
    if len(beta) != dataset.n_features:
        raise SolverError("beta does not match the number of features")
    design = _CenteredDesign.from_dataset(dataset)
    r = design.yc - design.xc @ beta.values
    g = design.xc.T @ r / design.n
    viol = _violation_matrix(
        g[:, None], profile, np.array([lam]), beta.values[:, None]
    )[:, 0]
    return KktReport(
        max_violation=float(viol.max(initial=0.0)),
        violations=viol,
        flagged=viol > tol,
        tol=tol,
    )


def constrained_ols(dataset: Dataset, support: np.ndarray) -> FitResult:
    """Least squares on a feature subset, zeros elsewhere.

    Rank-deficient subsets fall back to the minimum-norm solution and are
    flagged.  An empty support returns the zero vector with the mean response
    as intercept.
    """
    support = np.unique(np.asarray(support, dtype=np.intp))
    if support.size and (support.min() < 0 or support.max() >= dataset.n_features):
        raise SolverError("support indices out of range")
    design = _CenteredDesign.from_dataset(dataset)
    beta = np.zeros(design.p)
    rank_deficient = False
    if support.size:
        xs = design.xc[:, support]
        sol, _, rank, _ = np.linalg.lstsq(xs, design.yc, rcond=None)
        if rank < support.size:
            rank_deficient = True
            warnings.warn(
                "support columns are rank deficient; minimum-norm solution returned",
                RankDeficiencyWarning,
                stacklevel=2,
            )
        beta[support] = sol
    intercept = design.y_mean - float(design.x_means @ beta)
    return FitResult(CoefficientVector(beta), intercept, True, 0, rank_deficient)


# --- path export -----------------------------------------------------------


def _feature_label(j: int, feature_names) -> str:
    if feature_names is not None:
        return str(feature_names[j])
    return str(j + 1)


def path_to_csv(path: SolutionPath, file, feature_names=None) -> None:
    """Write a path as sparse triplets with per-lambda metadata.

    One row per nonzero coefficient; grid points with no nonzero coefficient
    get a single row with empty feature/coefficient cells.
    """
    file = Path(file)
    nnz = path.nnz()
    with file.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "lambda_index",
                "lambda",
                "intercept",
                "nnz",
                "converged",
                "kkt_violation",
                "feature",
                "coefficient",
            ]
        )
        for i in range(len(path)):
            meta = [
                i,
                repr(float(path.lambdas[i])),
                repr(float(path.intercepts[i])),
                int(nnz[i]),
                bool(path.converged[i]),
                repr(float(path.kkt_violation[i])),
            ]
            row_support = np.flatnonzero(path.coef[i])
            if row_support.size == 0:
                writer.writerow(meta + ["", ""])
                continue
            for j_local in row_support:
                j = j_local if path.columns is None else int(path.columns[j_local])
                writer.writerow(
                    meta + [_feature_label(int(j), feature_names), repr(float(path.coef[i, j_local]))]
                )


def path_to_json(path: SolutionPath, file=None, feature_names=None):
    """Serialize a path to JSON (returns the dict; writes it when file given)."""
    payload = {
        "lambdas": [float(v) for v in path.lambdas],
        "intercepts": [float(v) for v in path.intercepts],
        "nnz": [int(v) for v in path.nnz()],
        "converged": [bool(v) for v in path.converged],
        "kkt_violation": [float(v) for v in path.kkt_violation],
        "n_features": int(path.n_features),
        "coefficients": [],
    }
    for i in range(len(path)):
        row_support = np.flatnonzero(path.coef[i])
        entry = {}
        for j_local in row_support:
            j = j_local if path.columns is None else int(path.columns[j_local])
            entry[_feature_label(int(j), feature_names)] = float(path.coef[i, j_local])
        payload["coefficients"].append(entry)
    if file is not None:
        Path(file).write_text(json.dumps(payload, indent=2) + "\n")
    return payload
