"""End-to-end selection pipelines built from screening plus the weighted solver.

Every estimator returns an :class:`EstimatorOutput` holding the solution
path(s) consumed by the evaluation protocols.  The two retention-based
methods:

* ``run_rar``   -- threshold the marginal coefficients with a permutation
  null, leave the retained set unpenalized, run an l1 path on the rest.
* ``run_mrar``  -- additionally re-penalize the retained set while keeping
  the extra discoveries of the second stage unpenalized, purging falsely
  retained features.  One purge path is fitted per distinct discovery set
  along the second-stage path (or just the GIC-selected one in "gic" mode).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, PenaltyProfile
from .evaluation import gic_select
from .screening import (
    default_screen_size,
    isis_select,
    marginal_coefficients,
    permutation_threshold,
    retain,
    RetentionResult,
    sis_select,
)
from .solver import SolutionPath, SolverConfig, fit_path


class EstimatorError(ValueError):
    """Invalid estimator configuration."""


@dataclass(frozen=True, eq=False)
class EstimatorOutput:
    """Paths and stage metadata produced by one estimator run."""

    method: str
    primary_path: SolutionPath
    retention: RetentionResult | None = None
    q_set: np.ndarray | None = None
    stage3_paths: dict[tuple[int, ...], SolutionPath] | None = None
    timings: dict[str, float] = field(default_factory=dict)
    empty_retention: bool = False
    screened: np.ndarray | None = None

    def __post_init__(self):
        if (
            self.q_set is not None
            and self.retention is not None
            and np.intersect1d(self.q_set, self.retention.retained).size
        ):
            raise EstimatorError("discovery set overlaps the retained set")

    def all_paths(self) -> list[SolutionPath]:
        paths = [self.primary_path]
        if self.stage3_paths:
            paths.extend(self.stage3_paths.values())
        return paths

    def max_kkt_violation(self) -> float:
        return max(float(p.kkt_violation.max()) for p in self.all_paths())


def run_lasso(dataset: Dataset, config: SolverConfig | None = None) -> EstimatorOutput:
    """Plain l1 path with unit weight on every feature."""
    start = time.perf_counter()
    path = fit_path(dataset, PenaltyProfile.lasso(dataset.n_features), config)
    return EstimatorOutput("lasso", path, timings={"path": time.perf_counter() - start})


def run_ada_lasso(dataset: Dataset, config: SolverConfig | None = None) -> EstimatorOutput:
    """Weights 1/|marginal coefficient|; zero-coefficient columns are excluded."""
    start = time.perf_counter()
    stats = marginal_coefficients(dataset)
    t_screen = time.perf_counter() - start
    profile = PenaltyProfile.adaptive(stats.coef)
    path = fit_path(dataset, profile, config)
    return EstimatorOutput(
        "ada",
        path,
        timings={"screen": t_screen, "path": time.perf_counter() - start - t_screen},
    )


def run_sis_lasso(
    dataset: Dataset, d_n: int | None = None, config: SolverConfig | None = None
) -> EstimatorOutput:
    """Marginal screening to d_n columns, then an l1 path on the survivors."""
    if d_n is None:
        d_n = min(default_screen_size(dataset.n_samples), dataset.n_features)
    start = time.perf_counter()
    kept = sis_select(marginal_coefficients(dataset), d_n)
    t_screen = time.perf_counter() - start
    profile = PenaltyProfile.screened(dataset.n_features, kept)
    path = fit_path(dataset, profile, config)
    return EstimatorOutput(
        "sis",
        path,
        screened=kept,
        timings={"screen": t_screen, "path": time.perf_counter() - start - t_screen},
    )


def run_isis_lasso(
    dataset: Dataset,
    d_n: int | None = None,
    config: SolverConfig | None = None,
    iterations: int = 3,
    per_iter: int | None = None,
) -> EstimatorOutput:
    """Iterative screening to d_n columns, then an l1 path on the survivors."""
    if d_n is None:
        d_n = min(default_screen_size(dataset.n_samples), dataset.n_features)
    start = time.perf_counter()
    kept = isis_select(dataset, d_n, iterations=iterations, per_iter=per_iter, config=config)
    t_screen = time.perf_counter() - start
    profile = PenaltyProfile.screened(dataset.n_features, kept)
    path = fit_path(dataset, profile, config)
    return EstimatorOutput(
        "isis",
        path,
        screened=kept,
        timings={"screen": t_screen, "path": time.perf_counter() - start - t_screen},
    )


def run_rar(
    dataset: Dataset,
    m_permutations: int,
    seed: int,
    config: SolverConfig | None = None,
    gamma_override: float | None = None,
) -> EstimatorOutput:
    """Retention by permutation-thresholded marginal coefficients, then an
    l1 path penalizing only the non-retained features.

    An empty retention set degrades gracefully to the plain l1 path and is
    flagged via ``empty_retention``.
    """
    if m_permutations < 1:
        raise EstimatorError("m_permutations must be at least 1")
    start = time.perf_counter()
    stats = marginal_coefficients(dataset)
    if gamma_override is not None:
        gamma = float(gamma_override)
    else:
        gamma = permutation_threshold(dataset, m_permutations, seed)
    retention = retain(stats, gamma, dataset.n_samples)
    t_screen = time.perf_counter() - start
    profile = PenaltyProfile.retention(dataset.n_features, retention.retained)
    path = fit_path(dataset, profile, config)
    return EstimatorOutput(
        "rar",
        path,
        retention=retention,
        empty_retention=retention.retained.size == 0,
        timings={"screen": t_screen, "path": time.perf_counter() - start - t_screen},
    )


def _purge_profile(cols: np.ndarray, retained: np.ndarray) -> PenaltyProfile:
    weights = np.zeros(cols.size)
    weights[np.isin(cols, retained)] = 1.0
    return PenaltyProfile(weights)


def run_mrar(
    dataset: Dataset,
    m_permutations: int,
    seed: int,
    config: SolverConfig | None = None,
    gamma_override: float | None = None,
    q_mode: str = "enumerate",
) -> EstimatorOutput:
    """Three-stage pipeline: retention, regularization, then a purge stage.

    For each distinct discovery set Q (nonzero second-stage coefficients off
    the retained set) a purge path is fitted with unit weight on the retained
    set, no penalty on Q and all other features excluded, over its own grid.
    ``q_mode="enumerate"`` fits one purge path per distinct Q along the
    second-stage path; ``q_mode="gic"`` fits only the Q at the GIC-selected
    second-stage solution.
    """
    if q_mode not in ("enumerate", "gic"):
        raise EstimatorError(f"unknown q_mode {q_mode!r}")
    stage12 = run_rar(dataset, m_permutations, seed, config, gamma_override)
    retained = stage12.retention.retained
    path2 = stage12.primary_path
    timings = dict(stage12.timings)

    if retained.size == 0:
        # Nothing to purge; the second stage is the whole story.
        return EstimatorOutput(
            "mrar",
            path2,
            retention=stage12.retention,
            stage3_paths={},
            timings=timings,
            empty_retention=True,
        )

    start = time.perf_counter()
    if q_mode == "gic":
        indices = [gic_select(dataset, path2).index]
    else:
        indices = range(len(path2))

    q_sets: dict[tuple[int, ...], np.ndarray] = {}
    for i in indices:
        q = np.setdiff1d(path2.support_at(i), retained)
        q_sets.setdefault(tuple(int(j) for j in q), q)

    stage3: dict[tuple[int, ...], SolutionPath] = {}
    for key, q in q_sets.items():
        cols = np.union1d(retained, q)
        sub = dataset.subset_columns(cols)
        local = fit_path(sub, _purge_profile(cols, retained), config)
        stage3[key] = SolutionPath(
            lambdas=local.lambdas,
            coef=local.coef,
            intercepts=local.intercepts,
            converged=local.converged,
            kkt_violation=local.kkt_violation,
            n_features=dataset.n_features,
            columns=cols,
        )
    timings["purge"] = time.perf_counter() - start

    q_set = None
    if q_mode == "gic":
        q_set = next(iter(q_sets.values()))
    return EstimatorOutput(
        "mrar",
        path2,
        retention=stage12.retention,
        q_set=q_set,
        stage3_paths=stage3,
        timings=timings,
    )
