"""Config-driven replication harness for sign-recovery tables and real-data runs.

Replications are the unit of parallelism.  A replication's seed derives from
a stable hash of (root seed, scenario, n, replication index), and every
method's internal randomness derives from that plus the method label, so
results are independent of worker count and execution order.  BLAS threading
is pinned to one thread inside replications to keep floating-point reductions
bit-identical across parallelism levels.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .core import CoefficientVector, Dataset, PenaltyProfile, sign_of, standardize
from .estimators import (
    run_ada_lasso,
    run_isis_lasso,
    run_lasso,
    run_mrar,
    run_rar,
    run_sis_lasso,
)
from .evaluation import gic_select, kfold_cv, oracle_sign_success, prediction_mse, EvalResult
from .scenarios import SCENARIO_LIBRARY, ScenarioSpec, load_scenario, sample_dataset
from .screening import default_screen_size, marginal_coefficients, permutation_threshold, retain, sis_select, isis_select
from .solver import SolverConfig, fit_path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

logger = logging.getLogger("rarsel")

WORKERS_ENV_VAR = "RARSEL_WORKERS"

_METHOD_NAMES = ("lasso", "ada", "sis", "isis", "rar", "mrar")
_BASE_LABELS = {
    "lasso": "Lasso",
    "ada": "Ada-lasso",
    "sis": "SIS-lasso",
    "isis": "ISIS-lasso",
}


class ExperimentError(ValueError):
    """Invalid experiment configuration or emission request."""


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from arbitrary parts (order matters)."""
    text = "\x1f".join(str(part) for part in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


@dataclass(frozen=True)
class MethodSpec:
    """One estimator configuration within an experiment."""

    name: str
    permutations: int = 10
    d_n: int | None = None
    iterations: int = 3
    per_iter: int | None = None
    q_mode: str = "enumerate"

    def __post_init__(self):
        if self.name not in _METHOD_NAMES:
            raise ExperimentError(
                f"unknown method {self.name!r}; expected one of {', '.join(_METHOD_NAMES)}"
            )
        if self.permutations < 1:
            raise ExperimentError("permutations must be at least 1")

    @property
    def label(self) -> str:
        if self.name in _BASE_LABELS:
            return _BASE_LABELS[self.name]
        return f"{self.name.upper()}_{self.permutations}"


def parse_method_token(token: str, permutations: int = 10) -> MethodSpec:
    """Parse CLI tokens like ``lasso``, ``rar_30`` or ``mrar:5``."""
    token = token.strip().lower()
    for sep in ("_", ":"):
        if sep in token:
            name, _, m = token.partition(sep)
            return MethodSpec(name=name, permutations=int(m))
    return MethodSpec(name=token, permutations=permutations)


def _harness_solver() -> SolverConfig:
    # Grid depth 0.01 matches the de-facto default of standard path software
    # for n < p; the library-wide default of 1e-3 stays available via config.
    return SolverConfig(lambda_min_ratio=0.01)


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid of scenarios, sample sizes and methods to replicate.

    ``max_active_fraction`` caps each self-generated path once a solution's
    support exceeds that fraction of n.  Sign-exact recovery needs supports of
    the true sparsity size, so the cap cannot change any oracle outcome; it
    only skips the saturated, ill-conditioned tail of each path.
    """

    scenarios: tuple[str, ...]
    n_values: tuple[int, ...]
    methods: tuple[MethodSpec, ...]
    replications: int = 200
    root_seed: int = 20240801
    parallelism: int = 0
    standardize: bool = True
    solver: SolverConfig = field(default_factory=_harness_solver)
    max_active_fraction: float | None = 0.75

    def __post_init__(self):
        if not self.scenarios:
            raise ExperimentError("at least one scenario is required")
        if not self.n_values:
            raise ExperimentError("at least one sample size is required")
        if not self.methods:
            raise ExperimentError("at least one method is required")
        if self.replications < 1:
            raise ExperimentError("replications must be at least 1")
        if self.max_active_fraction is not None and not 0 < self.max_active_fraction <= 1:
            raise ExperimentError("max_active_fraction must lie in (0, 1]")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ExperimentError("duplicate method labels in configuration")
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "n_values", tuple(self.n_values))
        object.__setattr__(self, "methods", tuple(self.methods))

    def solver_for(self, n: int) -> SolverConfig:
        """Solver settings for one replication at sample size n."""
        if self.max_active_fraction is None or self.solver.max_active is not None:
            return self.solver
        return replace(self.solver, max_active=max(1, math.ceil(self.max_active_fraction * n)))

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        with Path(path).open("rb") as fh:
            raw = tomllib.load(fh)
        solver_kwargs = {"lambda_min_ratio": 0.01}
        solver_kwargs.update(raw.get("solver", {}))
        methods = tuple(
            MethodSpec(**entry) for entry in raw.get("methods", [])
        )
        fraction = raw.get("max_active_fraction", 0.75)
        return cls(
            scenarios=tuple(str(s) for s in raw.get("scenarios", ())),
            n_values=tuple(int(n) for n in raw.get("n", ())),
            methods=methods,
            replications=int(raw.get("replications", 200)),
            root_seed=int(raw.get("root_seed", 20240801)),
            parallelism=int(raw.get("parallelism", 0)),
            standardize=bool(raw.get("standardize", True)),
            solver=SolverConfig(**solver_kwargs),
            max_active_fraction=None if fraction in (0, False) else float(fraction),
        )

    @classmethod
    def paper_grid(cls, replications: int = 200, root_seed: int = 20240801) -> "ExperimentConfig":
        """Full default grid: all built-in scenarios, n in {100..500}, all methods."""
        methods = [MethodSpec("lasso"), MethodSpec("sis"), MethodSpec("isis"), MethodSpec("ada")]
        for m in (1, 5, 10, 15, 30):
            methods.append(MethodSpec("rar", permutations=m))
        for m in (1, 5, 10, 15, 30):
            methods.append(MethodSpec("mrar", permutations=m))
        return cls(
            scenarios=("1A", "1B", "2C", "2D"),
            n_values=(100, 200, 300, 400, 500),
            methods=tuple(methods),
            replications=replications,
            root_seed=root_seed,
        )

    @classmethod
    def smoke(cls, root_seed: int = 20240801) -> "ExperimentConfig":
        """Reduced CI profile: 25 replications at n in {300, 500}."""
        return cls(
            scenarios=("1A", "1B", "2C", "2D"),
            n_values=(300, 500),
            methods=(
                MethodSpec("lasso"),
                MethodSpec("sis"),
                MethodSpec("isis"),
                MethodSpec("rar", permutations=10),
                MethodSpec("mrar", permutations=10),
            ),
            replications=25,
            root_seed=root_seed,
        )


def _resolve_scenario(name: str, n: int) -> ScenarioSpec:
    if name in SCENARIO_LIBRARY:
        return ScenarioSpec.named(name, n)
    path = Path(name)
    if path.exists():
        spec = load_scenario(path)
        return ScenarioSpec(
            name=spec.name, block=spec.block, sigma=spec.sigma, beta_s=spec.beta_s, n=n, p=spec.p
        )
    raise ExperimentError(f"scenario {name!r} is neither a built-in name nor a spec file")


def _scenario_label(entry: str) -> str:
    """Display name for a configured scenario (file entries use their name field)."""
    if entry in SCENARIO_LIBRARY:
        return entry
    return load_scenario(entry).name


def run_method(method: MethodSpec, dataset: Dataset, seed: int, solver: SolverConfig):
    """Dispatch a method spec to its estimator."""
    if method.name == "lasso":
        return run_lasso(dataset, solver)
    if method.name == "ada":
        return run_ada_lasso(dataset, solver)
    if method.name == "sis":
        return run_sis_lasso(dataset, method.d_n, solver)
    if method.name == "isis":
        return run_isis_lasso(
            dataset, method.d_n, solver, iterations=method.iterations, per_iter=method.per_iter
        )
    if method.name == "rar":
        return run_rar(dataset, method.permutations, seed, solver)
    if method.name == "mrar":
        return run_mrar(dataset, method.permutations, seed, solver, q_mode=method.q_mode)
    raise ExperimentError(f"unknown method {method.name!r}")


def _run_replication(config: ExperimentConfig, scenario: str, n: int, rep: int) -> dict:
    rep_seed = derive_seed(config.root_seed, scenario, n, rep)
    spec = _resolve_scenario(scenario, n)
    solver = config.solver_for(n)
    started = time.perf_counter()
    dataset = sample_dataset(spec, rep_seed)
    if config.standardize:
        dataset = standardize(dataset)
    truth = sign_of(dataset.truth)

    success: dict[str, bool | None] = {}
    kkt: dict[str, float] = {}
    errors: dict[str, str] = {}
    for method in config.methods:
        method_seed = derive_seed(rep_seed, method.label)
        try:
            output = run_method(method, dataset, method_seed, solver)
            success[method.label] = bool(oracle_sign_success(output, truth))
            kkt[method.label] = output.max_kkt_violation()
        except Exception as exc:  # hard failure: record and exclude from denominator
            success[method.label] = None
            errors[method.label] = f"{type(exc).__name__}: {exc}"
    return {
        "event": "replication",
        "scenario": scenario,
        "n": n,
        "p": spec.dimension,
        "rep": rep,
        "dataset_sha256": dataset.content_hash(),
        "success": success,
        "kkt_max": kkt,
        "errors": errors,
        "elapsed_s": time.perf_counter() - started,
    }


def _replication_task(args) -> dict:
    config, scenario, n, rep = args
    with threadpool_limits(limits=1):
        return _run_replication(config, scenario, n, rep)


@dataclass(frozen=True)
class CellStats:
    """One table cell: exact success counts for a (method, n) pair."""

    successes: int
    attempts: int
    errors: int

    @property
    def proportion(self) -> float:
        return self.successes / self.attempts if self.attempts else math.nan

    @property
    def std_error(self) -> float:
        if not self.attempts:
            return math.nan
        prop = self.proportion
        return math.sqrt(prop * (1.0 - prop) / self.attempts)


@dataclass(frozen=True, eq=False)
class SignRecoveryTable:
    """Per-method, per-(n, p) exact-sign-recovery proportions for one scenario."""

    scenario: str
    methods: tuple[str, ...]
    columns: tuple[tuple[int, int], ...]
    cells: dict[tuple[str, int], CellStats]
    replications: int
    root_seed: int

    def __eq__(self, other) -> bool:
        if not isinstance(other, SignRecoveryTable):
            return NotImplemented
        return (
            self.scenario == other.scenario
            and self.methods == other.methods
            and self.columns == other.columns
            and self.cells == other.cells
            and self.replications == other.replications
            and self.root_seed == other.root_seed
        )

    def proportion(self, method: str, n: int) -> float:
        return self.cells[(method, n)].proportion

    def to_json_dict(self) -> dict:
        payload = {
            "scenario": self.scenario,
            "replications": self.replications,
            "root_seed": self.root_seed,
            "columns": [[n, p] for n, p in self.columns],
            "methods": list(self.methods),
            "cells": {},
        }
        for method in self.methods:
            row = {}
            for n, _ in self.columns:
                cell = self.cells[(method, n)]
                row[str(n)] = {
                    "successes": cell.successes,
                    "attempts": cell.attempts,
                    "errors": cell.errors,
                    "proportion": cell.proportion,
                    "std_error": cell.std_error,
                }
            payload["cells"][method] = row
        return payload

    @classmethod
    def from_json_dict(cls, payload: dict) -> "SignRecoveryTable":
        columns = tuple((int(n), int(p)) for n, p in payload["columns"])
        cells = {}
        for method, row in payload["cells"].items():
            for n_str, cell in row.items():
                cells[(method, int(n_str))] = CellStats(
                    successes=int(cell["successes"]),
                    attempts=int(cell["attempts"]),
                    errors=int(cell["errors"]),
                )
        return cls(
            scenario=str(payload["scenario"]),
            methods=tuple(payload["methods"]),
            columns=columns,
            cells=cells,
            replications=int(payload["replications"]),
            root_seed=int(payload["root_seed"]),
        )

    def to_csv_text(self) -> str:
        lines = ["scenario,method,n,p,proportion,std_error,successes,attempts,errors"]
        for method in self.methods:
            for n, p in self.columns:
                cell = self.cells[(method, n)]
                prop = f"{cell.proportion:.3f}" if cell.attempts else ""
                se = f"{cell.std_error:.4f}" if cell.attempts else ""
                lines.append(
                    f"{self.scenario},{method},{n},{p},{prop},{se},"
                    f"{cell.successes},{cell.attempts},{cell.errors}"
                )
        return "\n".join(lines) + "\n"

    def to_markdown_text(self) -> str:
        header = "| method | " + " | ".join(f"({n}, {p})" for n, p in self.columns) + " |"
        rule = "|" + "---|" * (len(self.columns) + 1)
        lines = [
            f"Scenario {self.scenario} - exact sign recovery proportion over "
            f"{self.replications} replications",
            "",
            header,
            rule,
        ]
        for method in self.methods:
            cells = []
            for n, _ in self.columns:
                cell = self.cells[(method, n)]
                cells.append(f"{cell.proportion:.3f}" if cell.attempts else "-")
            lines.append(f"| {method} | " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"


def emit_table(table: SignRecoveryTable, fmt: str, path) -> Path:
    """Write a table as csv, json or markdown; empty tables are an error."""
    if not table.methods:
        raise ExperimentError("table has no methods; refusing to emit an empty file")
    path = Path(path)
    if fmt == "csv":
        path.write_text(table.to_csv_text())
    elif fmt == "json":
        path.write_text(json.dumps(table.to_json_dict(), indent=2) + "\n")
    elif fmt == "markdown":
        path.write_text(table.to_markdown_text())
    else:
        raise ExperimentError(f"unknown table format {fmt!r}")
    return path


def _resolve_workers(config: ExperimentConfig) -> int:
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        return max(1, int(env))
    if config.parallelism > 0:
        return config.parallelism
    return os.cpu_count() or 1


def run_experiment(
    config: ExperimentConfig,
    out_dir=None,
    formats: tuple[str, ...] = ("csv", "json", "markdown"),
    figures: bool = True,
) -> list[SignRecoveryTable]:
    """Run the full replication grid and aggregate recovery tables.

    Every method within a replication consumes the same sampled dataset.
    Results are keyed by replication index, so tables are identical for any
    worker count.  When ``out_dir`` is given, tables are emitted in the
    requested formats together with line-delimited JSON events and (by
    default) a recovery-curve figure per scenario.
    """
    tasks = [
        (config, scenario, n, rep)
        for scenario in config.scenarios
        for n in config.n_values
        for rep in range(config.replications)
    ]
    workers = _resolve_workers(config)
    logger.info(
        "running %d replications (%d scenarios x %d sizes x %d reps) on %d workers",
        len(tasks),
        len(config.scenarios),
        len(config.n_values),
        config.replications,
        workers,
    )

    records: list[dict] = []
    started = time.perf_counter()
    if workers == 1:
        with threadpool_limits(limits=1):
            for _, scenario, n, rep in tasks:
                records.append(_run_replication(config, scenario, n, rep))
    else:
        chunksize = max(1, len(tasks) // (workers * 16))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_replication_task, tasks, chunksize=chunksize))
    logger.info("replications finished in %.1fs", time.perf_counter() - started)

    for record in records:
        for label, message in record["errors"].items():
            logger.warning(
                "replication %s/n=%d/rep=%d: %s failed and is excluded: %s",
                record["scenario"],
                record["n"],
                record["rep"],
                label,
                message,
            )

    tables = _aggregate_tables(config, records)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_events(out_dir / "events.jsonl", config, records)
        for table in tables:
            safe = re.sub(r"[^A-Za-z0-9._-]+", "_", table.scenario)
            stem = f"recovery_{safe}"
            for fmt in formats:
                suffix = {"csv": ".csv", "json": ".json", "markdown": ".md"}[fmt]
                emit_table(table, fmt, out_dir / (stem + suffix))
            if figures:
                from .plots import save_recovery_figure

                save_recovery_figure(table, out_dir / (stem + ".png"))
    return tables


def _aggregate_tables(config: ExperimentConfig, records: list[dict]) -> list[SignRecoveryTable]:
    labels = [m.label for m in config.methods]
    tables = []
    for entry in config.scenarios:
        scenario = _scenario_label(entry)
        scenario_records = [r for r in records if r["scenario"] == entry]
        columns = []
        cells: dict[tuple[str, int], CellStats] = {}
        for n in sorted(config.n_values):
            at_n = [r for r in scenario_records if r["n"] == n]
            p = at_n[0]["p"] if at_n else 0
            columns.append((n, p))
            for label in labels:
                outcomes = [r["success"][label] for r in at_n]
                successes = sum(1 for o in outcomes if o is True)
                errors = sum(1 for o in outcomes if o is None)
                cells[(label, n)] = CellStats(
                    successes=successes,
                    attempts=len(outcomes) - errors,
                    errors=errors,
                )
        tables.append(
            SignRecoveryTable(
                scenario=scenario,
                methods=tuple(labels),
                columns=tuple(columns),
                cells=cells,
                replications=config.replications,
                root_seed=config.root_seed,
            )
        )
    return tables


def _write_events(path: Path, config: ExperimentConfig, records: list[dict]) -> None:
    with path.open("w") as fh:
        meta = {
            "event": "experiment",
            "scenarios": list(config.scenarios),
            "n": list(config.n_values),
            "methods": [m.label for m in config.methods],
            "replications": config.replications,
            "root_seed": config.root_seed,
            "standardize": config.standardize,
        }
        fh.write(json.dumps(meta) + "\n")
        for record in records:
            fh.write(json.dumps(record) + "\n")


# --- real-data protocol ------------------------------------------------------


@dataclass(frozen=True)
class RealdataConfig:
    """Settings for repeated train/test evaluations on real or synthetic data."""

    repetitions: int = 1
    cv_folds: int = 5
    seed: int = 0
    d_n: int | None = None
    permutations: int = 10
    standardize: bool = True
    solver: SolverConfig = field(default_factory=_harness_solver)
    max_active_fraction: float | None = 0.75

    def __post_init__(self):
        if self.repetitions < 1:
            raise ExperimentError("repetitions must be at least 1")
        if self.cv_folds < 2:
            raise ExperimentError("cv_folds must be at least 2")

    def solver_for(self, n: int) -> SolverConfig:
        if self.max_active_fraction is None or self.solver.max_active is not None:
            return self.solver
        return replace(self.solver, max_active=max(1, math.ceil(self.max_active_fraction * n)))


@dataclass(frozen=True)
class MethodEvalStats:
    """Aggregated metrics for one method over repeated splits.

    Standard deviations are None (absent) when only one repetition ran.
    """

    test_mse_mean: float
    test_mse_sd: float | None
    path_mse_mean: float
    path_mse_sd: float | None
    model_size_mean: float
    model_size_sd: float | None
    repetitions: int


@dataclass(frozen=True, eq=False)
class RealdataReport:
    """Per-method prediction/model-size table over repeated random splits."""

    methods: tuple[str, ...]
    stats: dict[str, MethodEvalStats]
    repetitions: int

    def to_json_dict(self) -> dict:
        return {
            "repetitions": self.repetitions,
            "methods": list(self.methods),
            "stats": {
                label: {
                    "test_mse_mean": s.test_mse_mean,
                    "test_mse_sd": s.test_mse_sd,
                    "path_mse_mean": s.path_mse_mean,
                    "path_mse_sd": s.path_mse_sd,
                    "model_size_mean": s.model_size_mean,
                    "model_size_sd": s.model_size_sd,
                }
                for label, s in self.stats.items()
            },
        }

    def to_csv_text(self) -> str:
        lines = [
            "method,test_mse_mean,test_mse_sd,path_mse_mean,path_mse_sd,"
            "model_size_mean,model_size_sd,repetitions"
        ]
        for label in self.methods:
            s = self.stats[label]

            def cell(v):
                return "" if v is None else f"{v:.6g}"

            lines.append(
                f"{label},{cell(s.test_mse_mean)},{cell(s.test_mse_sd)},"
                f"{cell(s.path_mse_mean)},{cell(s.path_mse_sd)},"
                f"{cell(s.model_size_mean)},{cell(s.model_size_sd)},{s.repetitions}"
            )
        return "\n".join(lines) + "\n"


def method_final_problem(
    method: MethodSpec, train: Dataset, seed: int, config: RealdataConfig
) -> tuple[Dataset, PenaltyProfile, np.ndarray | None]:
    """The design/profile pair defining a method's final regularization step.

    Returns (dataset, profile, columns); ``columns`` maps a reduced design
    back to the full feature space (None when the design is full-width).
    For the three-step method the second stage is tuned by GIC and the purge
    problem on the retained-plus-discovered columns is returned.
    """
    p = train.n_features
    solver = config.solver_for(train.n_samples)
    name = method.name
    if name == "lasso":
        return train, PenaltyProfile.lasso(p), None
    if name == "ada":
        return train, PenaltyProfile.adaptive(marginal_coefficients(train).coef), None
    if name in ("sis", "isis"):
        d_n = method.d_n if method.d_n is not None else config.d_n
        if d_n is None:
            d_n = min(default_screen_size(train.n_samples), p)
        if name == "sis":
            kept = sis_select(marginal_coefficients(train), d_n)
        else:
            kept = isis_select(
                train, d_n, iterations=method.iterations, per_iter=method.per_iter,
                config=solver,
            )
        return train, PenaltyProfile.screened(p, kept), None
    if name in ("rar", "mrar"):
        stats = marginal_coefficients(train)
        gamma = permutation_threshold(train, method.permutations, derive_seed(seed, "perm"))
        retention = retain(stats, gamma, train.n_samples)
        retained = retention.retained
        profile = PenaltyProfile.retention(p, retained)
        if name == "rar" or retained.size == 0:
            return train, profile, None
        path2 = fit_path(train, profile, solver)
        pick = gic_select(train, path2)
        q = np.setdiff1d(path2.support_at(pick.index), retained)
        cols = np.union1d(retained, q)
        sub = train.subset_columns(cols)
        weights = np.zeros(cols.size)
        weights[np.isin(cols, retained)] = 1.0
        return sub, PenaltyProfile(weights), cols
    raise ExperimentError(f"unknown method {name!r}")


def _standardize_pair(train: Dataset, test: Dataset) -> tuple[Dataset, Dataset]:
    """Standardize the training design and map the test design through the
    training transform (no leakage of test statistics)."""
    train_std = standardize(train)
    # Transform relative to the raw train data: undo nothing on test, apply
    # the same shift/scale the training set received.
    shift = train_std.column_means - train.column_means
    scale = train_std.column_scales / train.column_scales
    test_x = (test.x - shift) / scale
    test_std = Dataset(
        test_x,
        test.y,
        column_means=train_std.column_means,
        column_scales=train_std.column_scales,
        standardized=False,
        truth=None,
        feature_names=test.feature_names,
    )
    return train_std, test_std


def _evaluate_method_on_split(
    method: MethodSpec,
    train: Dataset,
    test: Dataset,
    seed: int,
    config: RealdataConfig,
) -> tuple[float, float, int]:
    """(cv-selected test MSE, path-optimal test MSE, cv-selected model size)."""
    design, profile, cols = method_final_problem(method, train, seed, config)
    solver = config.solver_for(train.n_samples)
    cv = kfold_cv(design, profile, config.cv_folds, solver, derive_seed(seed, "cv"))
    test_x = test.x if cols is None else test.x[:, cols]

    resid = test.y - cv.intercept - test_x @ cv.coef.values
    test_mse = float((resid**2).mean())

    path = fit_path(design, profile, solver)
    preds = test_x @ path.coef.T + path.intercepts[None, :]
    path_mse = float(((test.y[:, None] - preds) ** 2).mean(axis=0).min())
    return test_mse, path_mse, cv.coef.n_nonzero


def run_realdata(
    train: Dataset,
    test: Dataset,
    methods: tuple[MethodSpec, ...],
    config: RealdataConfig | None = None,
) -> RealdataReport:
    """Repeated train/test protocol: CV-tuned test error, path-optimal error
    and model size per method.

    With one repetition the provided split is used as-is; otherwise the rows
    of train and test are pooled and re-split at the same sizes with a seeded
    shuffle per repetition.
    """
    config = config or RealdataConfig()
    if train.n_features != test.n_features:
        raise ExperimentError("train and test have different numbers of features")
    labels = [m.label for m in methods]
    if len(set(labels)) != len(labels):
        raise ExperimentError("duplicate method labels")

    n_train = train.n_samples
    pooled_x = np.vstack([train.x, test.x])
    pooled_y = np.concatenate([train.y, test.y])
    total = pooled_x.shape[0]

    per_method: dict[str, dict[str, list[float]]] = {
        label: {"test": [], "path": [], "size": []} for label in labels
    }
    for rep in range(config.repetitions):
        if config.repetitions == 1:
            tr, te = train, test
        else:
            rng = np.random.Generator(
                np.random.Philox(key=derive_seed(config.seed, "split", rep))
            )
            order = rng.permutation(total)
            tr_rows, te_rows = np.sort(order[:n_train]), np.sort(order[n_train:])
            tr = Dataset(pooled_x[tr_rows], pooled_y[tr_rows], feature_names=train.feature_names)
            te = Dataset(pooled_x[te_rows], pooled_y[te_rows], feature_names=train.feature_names)
        if config.standardize:
            tr, te = _standardize_pair(tr, te)
        for method in methods:
            seed = derive_seed(config.seed, rep, method.label)
            test_mse, path_mse, size = _evaluate_method_on_split(method, tr, te, seed, config)
            per_method[method.label]["test"].append(test_mse)
            per_method[method.label]["path"].append(path_mse)
            per_method[method.label]["size"].append(size)

    def summarize(values: list[float]) -> tuple[float, float | None]:
        arr = np.asarray(values)
        mean = float(arr.mean())
        sd = float(arr.std(ddof=1)) if arr.size > 1 else None
        return mean, sd

    stats = {}
    for label in labels:
        test_mean, test_sd = summarize(per_method[label]["test"])
        path_mean, path_sd = summarize(per_method[label]["path"])
        size_mean, size_sd = summarize(per_method[label]["size"])
        stats[label] = MethodEvalStats(
            test_mse_mean=test_mean,
            test_mse_sd=test_sd,
            path_mse_mean=path_mean,
            path_mse_sd=path_sd,
            model_size_mean=size_mean,
            model_size_sd=size_sd,
            repetitions=config.repetitions,
        )
    return RealdataReport(methods=tuple(labels), stats=stats, repetitions=config.repetitions)


def evaluate_method(
    method: MethodSpec,
    dataset: Dataset,
    metric: str,
    seed: int = 0,
    config: RealdataConfig | None = None,
    test: Dataset | None = None,
) -> EvalResult:
    """One-shot evaluation used by the CLI: oracle, cv, gic or mse."""
    config = config or RealdataConfig()
    solver = config.solver_for(dataset.n_samples)
    if metric == "oracle":
        if dataset.truth is None:
            raise ExperimentError("oracle metric needs a dataset with ground truth")
        output = run_method(method, dataset, derive_seed(seed, method.label), solver)
        truth = sign_of(dataset.truth)
        success = oracle_sign_success(output, truth)
        # Report the GIC-selected point on the primary path for context.
        pick = gic_select(dataset, output.primary_path)
        beta = output.primary_path.solution(pick.index)
        return EvalResult(
            model_size=beta.n_nonzero,
            oracle_sign_success=success,
            selected_lambda=pick.lambda_,
            selected_beta=beta,
            selected_intercept=float(output.primary_path.intercepts[pick.index]),
        )

    design, profile, cols = method_final_problem(method, dataset, derive_seed(seed, method.label), config)

    def expand(values: np.ndarray) -> CoefficientVector:
        if cols is None:
            return CoefficientVector(values)
        full = np.zeros(dataset.n_features)
        full[cols] = values
        return CoefficientVector(full)

    if metric == "gic":
        path = fit_path(design, profile, solver)
        pick = gic_select(design, path)
        beta = expand(path.coef[pick.index])
        return EvalResult(
            model_size=beta.n_nonzero,
            selected_lambda=pick.lambda_,
            selected_beta=beta,
            selected_intercept=float(path.intercepts[pick.index]),
        )
    if metric in ("cv", "mse"):
        cv = kfold_cv(design, profile, config.cv_folds, solver, derive_seed(seed, "cv"))
        beta = expand(cv.coef.values)
        test_mse = None
        if metric == "mse":
            if test is None:
                raise ExperimentError("mse metric needs a test dataset")
            test_mse = prediction_mse(beta, cv.intercept, test)
        return EvalResult(
            model_size=beta.n_nonzero,
            selected_lambda=cv.lambda_,
            selected_beta=beta,
            selected_intercept=cv.intercept,
            test_mse=test_mse,
        )
    raise ExperimentError(f"unknown metric {metric!r}")

