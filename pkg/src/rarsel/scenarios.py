"""Synthetic Gaussian designs with a correlated leading block and identity tail.

The covariance is Sigma = blockdiag(B, I) where B is a small dense correlation
block holding every signal and every correlated noise.  All population
diagnostics exploit that structure instead of materializing a p x p matrix.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CoefficientVector, Dataset

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib


class ScenarioError(ValueError):
    """Invalid scenario specification or covariance block."""


def dimension_rule(n: int) -> int:
    """Feature count grown with the sample size: floor(100 * exp(n**0.2))."""
    if n < 1:
        raise ScenarioError("n must be positive")
    return int(math.floor(100.0 * math.exp(n**0.2)))


def equicorrelated_block(size: int, r: float) -> np.ndarray:
    """Correlation block with constant off-diagonal r and unit diagonal.

    Positive definiteness requires r in (-1/(size-1), 1), enforced exclusively.
    """
    if size < 1:
        raise ScenarioError("block size must be positive")
    if size > 1 and not (-1.0 / (size - 1) < r < 1.0):
        raise ScenarioError(
            f"equicorrelation r={r} outside (-1/{size - 1}, 1); block not positive definite"
        )
    block = np.full((size, size), float(r))
    np.fill_diagonal(block, 1.0)
    return block


def _scenario_2_block(r0, r1, r2, r3, r4) -> np.ndarray:
    return np.array(
        [
            [1.0, r0, r1, r3],
            [r0, 1.0, r2, r4],
            [r1, r2, 1.0, 0.0],
            [r3, r4, 0.0, 1.0],
        ]
    )


#: Built-in scenario parameters: (block, sigma, beta_s).
SCENARIO_LIBRARY = {
    "1A": (lambda: equicorrelated_block(8, 0.6), 3.5, (3.0, -2.0, 2.0, -2.0)),
    "1B": (lambda: equicorrelated_block(10, 0.6), 1.2, (1.0, 1.0, -1.0, 1.0, -1.0)),
    "2C": (lambda: _scenario_2_block(0.8, -0.1, 0.1, -0.1, 0.1), 2.5, (2.5, -2.0)),
    "2D": (lambda: _scenario_2_block(0.75, 0.2, 0.2, 0.2, -0.2), 2.5, (2.5, -2.0)),
}


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """Parametric description of a simulation setting.

    ``beta_s`` holds the leading coefficients (the rest of beta is zero) and
    must fit inside the correlated block.  ``p`` may be left as None to use
    ``dimension_rule(n)``.
    """

    name: str
    block: np.ndarray
    sigma: float
    beta_s: np.ndarray
    n: int
    p: int | None = None

    def __post_init__(self):
        block = np.asarray(self.block, dtype=np.float64)
        if block.ndim != 2 or block.shape[0] != block.shape[1]:
            raise ScenarioError("block must be a square matrix")
        if not np.allclose(block, block.T, atol=1e-12):
            raise ScenarioError("block must be symmetric")
        if np.abs(np.diag(block) - 1.0).max() > 1e-12:
            raise ScenarioError("block must have unit diagonal")
        beta_s = np.asarray(self.beta_s, dtype=np.float64)
        if beta_s.ndim != 1 or beta_s.shape[0] > block.shape[0]:
            raise ScenarioError("beta_s must be a vector no longer than the block size")
        if self.sigma < 0:
            raise ScenarioError("sigma must be nonnegative")
        if self.n < 2:
            raise ScenarioError("n must be at least 2")
        if self.p is not None and self.p < block.shape[0]:
            raise ScenarioError("p must be at least the block size")
        block.setflags(write=False)
        beta_s.setflags(write=False)
        object.__setattr__(self, "block", block)
        object.__setattr__(self, "beta_s", beta_s)

    @classmethod
    def named(cls, name: str, n: int, p: int | None = None) -> "ScenarioSpec":
        """Instantiate one of the built-in scenarios (1A, 1B, 2C, 2D)."""
        try:
            make_block, sigma, beta_s = SCENARIO_LIBRARY[name]
        except KeyError:
            known = ", ".join(sorted(SCENARIO_LIBRARY))
            raise ScenarioError(f"unknown scenario {name!r}; built-ins: {known}") from None
        return cls(name=name, block=make_block(), sigma=sigma, beta_s=np.asarray(beta_s), n=n, p=p)

    @property
    def block_size(self) -> int:
        return self.block.shape[0]

    @property
    def dimension(self) -> int:
        return self.p if self.p is not None else dimension_rule(self.n)

    @property
    def support(self) -> np.ndarray:
        """Indices of the true signals (nonzero entries of beta_s)."""
        return np.flatnonzero(self.beta_s)

    def beta(self) -> np.ndarray:
        """Full coefficient vector of length p."""
        beta = np.zeros(self.dimension)
        beta[: self.beta_s.shape[0]] = self.beta_s
        return beta


@dataclass(frozen=True, eq=False)
class BlockCovariance:
    """Covariance in (dense block, identity tail) form with its Cholesky factor."""

    block: np.ndarray
    chol_lower: np.ndarray
    p: int

    @property
    def block_size(self) -> int:
        return self.block.shape[0]

    def dense(self) -> np.ndarray:
        """Materialize the full p x p matrix (intended for small-p checks)."""
        full = np.eye(self.p)
        m = self.block_size
        full[:m, :m] = self.block
        return full


def build_covariance(spec: ScenarioSpec) -> BlockCovariance:
    """Assemble blockdiag(B, I) and verify positive definiteness by factorization."""
    try:
        chol = np.linalg.cholesky(spec.block)
    except np.linalg.LinAlgError as exc:
        raise ScenarioError(f"covariance block is not positive definite: {exc}") from exc
    return BlockCovariance(block=spec.block, chol_lower=chol, p=spec.dimension)


def sample_dataset(spec: ScenarioSpec, seed: int) -> Dataset:
    """Draw n rows from N(0, Sigma) plus Gaussian noise on the response.

    Uses a counter-based (Philox) generator keyed by ``seed`` so sampling is
    reproducible and independent streams can be derived for concurrent
    replications.  Draw order is fixed: block normals, tail normals, noise.
    """
    cov = build_covariance(spec)
    n, p, m = spec.n, cov.p, cov.block_size
    rng = np.random.Generator(np.random.Philox(key=seed))

    x = np.empty((n, p), order="F")
    x[:, :m] = rng.standard_normal((n, m)) @ cov.chol_lower.T
    if p > m:
        x[:, m:] = rng.standard_normal((n, p - m))
    noise = rng.standard_normal(n) * spec.sigma

    s_len = spec.beta_s.shape[0]
    y = x[:, :s_len] @ spec.beta_s + noise
    return Dataset(x, y, truth=CoefficientVector(spec.beta()))


@dataclass(frozen=True, eq=False)
class PopulationDiagnostics:
    """Population-level quantities controlling screening and sign recovery.

    marginal_coef[j]  = cov(X_j, Y) = (Sigma beta)_j
    marginal_corr[j]  = marginal_coef[j] / sqrt(var Y)     (unit variances)
    zeta              = max |marginal_coef| over noise coordinates
    irrep_norm        = || Sigma_{N,S} Sigma_{S,S}^{-1} ||_inf over noise rows
    restricted_irrep_norm
                      = same matrix restricted to the signal columns outside
                        the supplied retained set (None when not supplied)
    min_eig_ss        = smallest eigenvalue of Sigma_{S,S}
    conditional_var_max
                      = largest diagonal entry of the conditional covariance
                        of the noises given the signals
    """

    marginal_coef: np.ndarray
    marginal_corr: np.ndarray
    zeta: float
    irrep_norm: float
    restricted_irrep_norm: float | None
    min_eig_ss: float
    var_y: float
    sigma_beta_max: float
    beta_quad_form: float
    min_abs_signal: float
    conditional_var_max: float


def _signal_noise_split(spec: ScenarioSpec):
    support = spec.support
    m = spec.block_size
    block_noise = np.setdiff1d(np.arange(m), support)
    return support, block_noise


def population_diagnostics(
    spec: ScenarioSpec, retained: np.ndarray | None = None
) -> PopulationDiagnostics:
    """Compute the diagnostic quantities for a scenario.

    ``retained`` (optional) is a set of feature indices assumed kept by the
    retention step; it drives the restricted dependency norm.
    """
    p = spec.dimension
    support, block_noise = _signal_noise_split(spec)
    if retained is not None:
        retained = np.asarray(retained, dtype=np.intp)
        if retained.size and (retained.min() < 0 or retained.max() >= p):
            raise ScenarioError("retained set is not a subset of the feature indices")

    beta_sup = spec.beta_s[support]
    sigma_ss = spec.block[np.ix_(support, support)]

    marginal_coef = np.zeros(p)
    if support.size:
        marginal_coef[: spec.block_size] = spec.block[:, support] @ beta_sup
    beta_quad = float(beta_sup @ sigma_ss @ beta_sup) if support.size else 0.0
    var_y = beta_quad + spec.sigma**2
    marginal_corr = marginal_coef / math.sqrt(var_y) if var_y > 0 else np.zeros(p)

    noise_coef = marginal_coef.copy()
    noise_coef[support] = 0.0
    zeta = float(np.abs(noise_coef).max(initial=0.0))

    if support.size:
        # Noise rows outside the block are exactly zero, so only block rows matter.
        dependency = np.linalg.solve(sigma_ss, spec.block[np.ix_(support, block_noise)]).T
        irrep_norm = float(np.abs(dependency).sum(axis=1).max(initial=0.0))
        min_eig = float(np.linalg.eigvalsh(sigma_ss).min())
        if retained is not None:
            weak_cols = ~np.isin(support, retained)
            restricted = float(
                np.abs(dependency[:, weak_cols]).sum(axis=1).max(initial=0.0)
            )
        else:
            restricted = None
        schur = spec.block[np.ix_(block_noise, block_noise)] - spec.block[
            np.ix_(block_noise, support)
        ] @ np.linalg.solve(sigma_ss, spec.block[np.ix_(support, block_noise)])
        cond_var = float(np.diag(schur).max(initial=0.0)) if block_noise.size else 0.0
        if p > spec.block_size:
            cond_var = max(cond_var, 1.0)
        min_abs_signal = float(np.abs(beta_sup).min())
    else:
        irrep_norm = 0.0
        min_eig = math.nan
        restricted = None if retained is None else 0.0
        cond_var = 1.0
        min_abs_signal = math.nan

    return PopulationDiagnostics(
        marginal_coef=marginal_coef,
        marginal_corr=marginal_corr,
        zeta=zeta,
        irrep_norm=irrep_norm,
        restricted_irrep_norm=restricted,
        min_eig_ss=min_eig,
        var_y=var_y,
        sigma_beta_max=float(np.abs(marginal_coef).max(initial=0.0)),
        beta_quad_form=beta_quad,
        min_abs_signal=min_abs_signal,
        conditional_var_max=cond_var,
    )


def strong_sets(
    spec: ScenarioSpec, threshold: float, margin: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """Split features into marginally strong signals R and strong noises Z.

    R = signals whose |population marginal coefficient| clears threshold+margin;
    Z = noises whose |population marginal coefficient| reaches threshold-margin
    (only noises with a nonzero marginal coefficient qualify).
    """
    if threshold <= 0:
        raise ScenarioError("threshold must be positive")
    if margin < 0:
        raise ScenarioError("margin must be nonnegative")
    diag = population_diagnostics(spec)
    coef = np.abs(diag.marginal_coef)
    support = spec.support
    is_signal = np.zeros(spec.dimension, dtype=bool)
    is_signal[support] = True

    strong_signals = np.flatnonzero(is_signal & (coef > threshold + margin))
    strong_noises = np.flatnonzero(~is_signal & (coef > 0) & (coef >= threshold - margin))
    return strong_signals, strong_noises


@dataclass(frozen=True, eq=False)
class RetentionConditionReport:
    """Dependency quantities for retention with possible false noise pickups.

    ``augmented_irrep_max`` maximizes the restricted dependency norm over
    every augmented signal set between S and S union Z; ``noise_on_signal_norm``
    bounds how strongly the strong noises load on the signals.
    """

    strong_signals: np.ndarray
    strong_noises: np.ndarray
    min_eig_signal_noise: float
    augmented_irrep_max: float
    noise_on_signal_norm: float


def retention_condition_quantities(
    spec: ScenarioSpec,
    threshold: float,
    margin: float = 0.0,
    max_noise_enumeration: int = 16,
) -> RetentionConditionReport:
    """Evaluate the robustness quantities for the three-step estimator."""
    strong_signals, strong_noises = strong_sets(spec, threshold, margin)
    support = spec.support
    m = spec.block_size
    if strong_noises.size > max_noise_enumeration:
        raise ScenarioError(
            f"strong noise set has {strong_noises.size} members; enumeration capped at "
            f"{max_noise_enumeration}"
        )

    s_union_z = np.union1d(support, strong_noises)
    sigma_sz = spec.block[np.ix_(s_union_z, s_union_z)]
    min_eig = float(np.linalg.eigvalsh(sigma_sz).min()) if s_union_z.size else math.nan

    sigma_ss = spec.block[np.ix_(support, support)]
    if support.size and strong_noises.size:
        loading = np.linalg.solve(sigma_ss, spec.block[np.ix_(support, strong_noises)]).T
        noise_on_signal = float(np.abs(loading).sum(axis=1).max(initial=0.0))
    else:
        noise_on_signal = 0.0

    weak_signals = np.setdiff1d(support, strong_signals)
    worst = 0.0
    block_index = np.arange(m)
    for k in range(strong_noises.size + 1):
        for extra in itertools.combinations(strong_noises.tolist(), k):
            q = np.union1d(support, np.asarray(extra, dtype=np.intp))
            q_comp = np.setdiff1d(block_index, q)
            cols = np.flatnonzero(np.isin(q, weak_signals))
            if q_comp.size == 0 or cols.size == 0:
                continue
            sigma_qq = spec.block[np.ix_(q, q)]
            dep = np.linalg.solve(sigma_qq, spec.block[np.ix_(q, q_comp)]).T
            worst = max(worst, float(np.abs(dep[:, cols]).sum(axis=1).max(initial=0.0)))

    return RetentionConditionReport(
        strong_signals=strong_signals,
        strong_noises=strong_noises,
        min_eig_signal_noise=min_eig,
        augmented_irrep_max=worst,
        noise_on_signal_norm=noise_on_signal,
    )


# --- scenario (de)serialization -------------------------------------------


def save_scenario(spec: ScenarioSpec, path) -> None:
    """Write a scenario to a TOML file."""
    lines = [
        f'name = "{spec.name}"',
        f"n = {spec.n}",
        f"sigma = {spec.sigma!r}",
        f"beta_s = [{', '.join(repr(float(b)) for b in spec.beta_s)}]",
    ]
    if spec.p is not None:
        lines.insert(2, f"p = {spec.p}")
    lines.append("")
    lines.append("[block]")
    rows = ",\n    ".join(
        "[" + ", ".join(repr(float(v)) for v in row) + "]" for row in spec.block
    )
    lines.append("rows = [\n    " + rows + ",\n]")
    Path(path).write_text("\n".join(lines) + "\n")


def load_scenario(path) -> ScenarioSpec:
    """Read a scenario from a TOML file (either explicit block or equicorrelated)."""
    with Path(path).open("rb") as fh:
        raw = tomllib.load(fh)
    try:
        block_spec = raw["block"]
        if "rows" in block_spec:
            block = np.asarray(block_spec["rows"], dtype=np.float64)
        else:
            block = equicorrelated_block(int(block_spec["size"]), float(block_spec["r"]))
        return ScenarioSpec(
            name=str(raw.get("name", "custom")),
            block=block,
            sigma=float(raw["sigma"]),
            beta_s=np.asarray(raw["beta_s"], dtype=np.float64),
            n=int(raw["n"]),
            p=int(raw["p"]) if "p" in raw else None,
        )
    except KeyError as exc:
        raise ScenarioError(f"scenario file {path} is missing key {exc}") from exc
