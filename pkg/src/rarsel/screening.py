"""Marginal regression screening, permutation thresholds, and retention."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, PenaltyProfile
from .evaluation import gic_select
from .solver import SolverConfig, fit_path


class ScreeningError(ValueError):
    """Invalid screening request (degenerate design, bad sizes, ...)."""


def default_screen_size(n: int) -> int:
    """Simulation default for the screening budget: floor(n / log n)."""
    if n < 2:
        raise ScreeningError("n must be at least 2")
    return int(math.floor(n / math.log(n)))


@dataclass(frozen=True, eq=False)
class MarginalStats:
    """Per-feature simple-regression slopes and their magnitude ranking.

    ``abs_rank`` lists feature indices by decreasing |coef|, ties broken by
    ascending index.  Constant columns get coefficient zero and are flagged.
    """

    coef: np.ndarray
    abs_rank: np.ndarray
    constant_columns: tuple[int, ...] = ()


def _centered_columns(dataset: Dataset):
    x = dataset.x
    means = x.mean(axis=0)
    xc = x - means
    denom = (xc * xc).sum(axis=0)
    tol = dataset.n_samples * (1e-12 * np.maximum(1.0, np.abs(means))) ** 2
    constant = denom <= tol
    return xc, denom, constant


def marginal_coefficients(dataset: Dataset) -> MarginalStats:
    """Slope of the simple least-squares regression of y on each centered column."""
    xc, denom, constant = _centered_columns(dataset)
    if constant.all():
        raise ScreeningError("all design columns are constant; nothing to rank")
    yc = dataset.y - dataset.y.mean()
    with np.errstate(invalid="ignore", divide="ignore"):
        coef = (xc.T @ yc) / denom
    coef[constant] = 0.0
    p = coef.shape[0]
    order = np.lexsort((np.arange(p), -np.abs(coef)))
    return MarginalStats(
        coef=coef,
        abs_rank=order,
        constant_columns=tuple(int(j) for j in np.flatnonzero(constant)),
    )


def sis_select(stats: MarginalStats, d_n: int) -> np.ndarray:
    """Indices of the d_n largest |marginal coefficients| (sorted ascending)."""
    p = stats.coef.shape[0]
    if not 1 <= d_n <= p:
        raise ScreeningError(f"d_n must lie in [1, {p}], got {d_n}")
    return np.sort(stats.abs_rank[:d_n])


def permutation_threshold(dataset: Dataset, m: int, seed: int) -> float:
    """Null scale of marginal association estimated by response permutation.

    Returns the largest |marginal coefficient| observed over ``m`` uniformly
    random permutations of the response across all columns.  Permutations are
    drawn sequentially from a counter-based generator, so the first m' draws
    of a longer run coincide with a shorter run (the threshold is monotone in
    ``m`` for a fixed seed).
    """
    if m < 1:
        raise ScreeningError("m must be at least 1")
    xc, denom, constant = _centered_columns(dataset)
    if constant.all():
        raise ScreeningError("all design columns are constant; nothing to rank")
    n = dataset.n_samples
    rng = np.random.Generator(np.random.Philox(key=seed))
    yc = dataset.y - dataset.y.mean()
    permuted = np.empty((n, m))
    for k in range(m):
        permuted[:, k] = yc[rng.permutation(n)]
    with np.errstate(invalid="ignore", divide="ignore"):
        d = (xc.T @ permuted) / denom[:, None]
    d[constant, :] = 0.0
    return float(np.abs(d).max())


@dataclass(frozen=True, eq=False)
class RetentionResult:
    """Thresholded retention set, capped at ceil(sqrt(n)) features."""

    gamma: float
    retained: np.ndarray
    capped: bool


def retention_cap(n: int) -> int:
    return int(math.ceil(math.sqrt(n)))


def retain(stats: MarginalStats, gamma: float, n: int) -> RetentionResult:
    """Keep features whose |marginal coefficient| reaches gamma.

    When more than ceil(sqrt(n)) features qualify, only the strongest
    qualifiers are kept (ties broken by ascending index) and the result is
    flagged as capped.
    """
    if gamma < 0:
        raise ScreeningError("gamma must be nonnegative")
    cap = retention_cap(n)
    qualifies = np.abs(stats.coef) >= gamma
    hits = np.flatnonzero(qualifies)
    if hits.size > cap:
        ranked = stats.abs_rank[qualifies[stats.abs_rank]]
        return RetentionResult(gamma=gamma, retained=np.sort(ranked[:cap]), capped=True)
    return RetentionResult(gamma=gamma, retained=hits, capped=False)


def isis_select(
    dataset: Dataset,
    d_n: int,
    iterations: int = 3,
    per_iter: int | None = None,
    config: SolverConfig | None = None,
) -> np.ndarray:
    """Iterative screening: rescreen the complement against lasso residuals.

    Round one takes the ``per_iter`` columns with the largest |marginal
    coefficient|.  Each later round fits an l1 path on the current selection,
    picks the penalty by GIC, and screens the remaining columns by their
    marginal coefficient against the residuals, appending the top ``per_iter``.
    Stops once ``d_n`` columns are selected (or rounds are exhausted) and
    truncates to the first ``d_n`` picks in selection order.
    """
    p = dataset.n_features
    if iterations < 1:
        raise ScreeningError("iterations must be at least 1")
    if not 1 <= d_n <= p:
        raise ScreeningError(f"d_n must lie in [1, {p}], got {d_n}")
    if per_iter is None:
        per_iter = math.ceil(d_n / iterations)
    if per_iter < 1:
        raise ScreeningError("per_iter must be at least 1")
    config = config or SolverConfig()

    stats = marginal_coefficients(dataset)
    selected: list[int] = [int(j) for j in stats.abs_rank[: min(per_iter, d_n)]]

    for _ in range(1, iterations):
        if len(selected) >= d_n:
            break
        cols = np.sort(np.asarray(selected, dtype=np.intp))
        sub = dataset.subset_columns(cols)
        path = fit_path(sub, PenaltyProfile.lasso(cols.size), config)
        pick = gic_select(sub, path)
        resid = dataset.y - path.intercepts[pick.index] - sub.x @ path.coef[pick.index]

        remaining = np.setdiff1d(np.arange(p), cols)
        if remaining.size == 0:
            break
        xc_rem = dataset.x[:, remaining]
        means = xc_rem.mean(axis=0)
        xc_rem = xc_rem - means
        denom = (xc_rem * xc_rem).sum(axis=0)
        rc = resid - resid.mean()
        with np.errstate(invalid="ignore", divide="ignore"):
            coef_rem = (xc_rem.T @ rc) / denom
        coef_rem[denom <= dataset.n_samples * (1e-12 * np.maximum(1.0, np.abs(means))) ** 2] = 0.0
        if np.abs(coef_rem).max(initial=0.0) == 0.0:
            break  # nothing left correlates with the residuals
        order = np.lexsort((remaining, -np.abs(coef_rem)))
        selected.extend(int(j) for j in remaining[order[:per_iter]])

    return np.sort(np.asarray(selected[:d_n], dtype=np.intp))
