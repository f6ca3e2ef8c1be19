"""Command-line interface: simulate, fit, screen, evaluate, diagnose, realdata."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .core import DataError, PenaltyProfile, load_csv, standardize
from .estimators import run_mrar
from .evaluation import gic_select
from .experiment import (
    ExperimentConfig,
    ExperimentError,
    MethodSpec,
    RealdataConfig,
    derive_seed,
    emit_table,
    evaluate_method,
    parse_method_token,
    run_experiment,
    run_method,
    run_realdata,
)
from .scenarios import (
    ScenarioSpec,
    load_scenario,
    population_diagnostics,
    retention_condition_quantities,
    sample_dataset,
    strong_sets,
)
from .screening import (
    default_screen_size,
    marginal_coefficients,
    permutation_threshold,
    retain,
)
from .solver import SolverConfig, fit_path, path_to_csv, path_to_json


def _response_arg(value: str):
    try:
        return int(value)
    except ValueError:
        return value


def _add_data_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="delimited input file")
    parser.add_argument(
        "--response",
        required=True,
        type=_response_arg,
        help="response column: name (with header) or 0-based index",
    )
    parser.add_argument(
        "--no-header", action="store_true", help="input file has no header row"
    )
    parser.add_argument(
        "--no-standardize",
        action="store_true",
        help="skip column standardization before fitting",
    )


def _load_dataset(args, path_attr: str = "data"):
    dataset = load_csv(
        getattr(args, path_attr), response=args.response, header=not args.no_header
    )
    if not args.no_standardize:
        dataset = standardize(dataset)
    return dataset


def _solver_config(args) -> SolverConfig:
    kwargs = {}
    if getattr(args, "n_lambda", None):
        kwargs["n_lambda"] = args.n_lambda
    if getattr(args, "lambda_min_ratio", None):
        kwargs["lambda_min_ratio"] = args.lambda_min_ratio
    return SolverConfig(**kwargs)


def _scenario_from_args(args) -> ScenarioSpec:
    if args.scenario_file:
        spec = load_scenario(args.scenario_file)
        if args.n:
            spec = ScenarioSpec(
                name=spec.name, block=spec.block, sigma=spec.sigma,
                beta_s=spec.beta_s, n=args.n, p=spec.p,
            )
        return spec
    if not args.scenario or not args.n:
        raise ExperimentError("need --scenario and --n (or --scenario-file)")
    return ScenarioSpec.named(args.scenario, args.n)


def _penalty_profile_from_file(path, dataset) -> PenaltyProfile:
    """JSON mapping feature (name or 1-based index) -> 0 | weight | "inf"."""
    spec = json.loads(Path(path).read_text())
    features = spec.get("features", spec)
    default = float(spec.get("default", 1.0)) if isinstance(spec, dict) else 1.0
    weights = np.full(dataset.n_features, default)
    names = dataset.feature_names
    lookup = {str(name): j for j, name in enumerate(names)} if names else {}
    for key, value in features.items():
        if key == "default":
            continue
        if str(key) in lookup:
            j = lookup[str(key)]
        else:
            j = int(key) - 1
            if not 0 <= j < dataset.n_features:
                raise DataError(f"penalty file feature {key!r} out of range")
        weights[j] = np.inf if str(value).lower() in ("inf", "infinity") else float(value)
    return PenaltyProfile(weights)


def _cmd_simulate(args) -> int:
    if args.config:
        config = ExperimentConfig.from_toml(args.config)
    elif args.smoke:
        config = ExperimentConfig.smoke()
    elif args.paper_grid:
        config = ExperimentConfig.paper_grid()
    else:
        print(
            "simulate needs --config FILE, --smoke, or --paper-grid "
            "(the full grid takes hours)",
            file=sys.stderr,
        )
        return 2
    if args.workers:
        config = ExperimentConfig(
            scenarios=config.scenarios,
            n_values=config.n_values,
            methods=config.methods,
            replications=config.replications,
            root_seed=config.root_seed,
            parallelism=args.workers,
            standardize=config.standardize,
            solver=config.solver,
        )
    formats = tuple(args.formats.split(","))
    tables = run_experiment(
        config, out_dir=args.out, formats=formats, figures=not args.no_figures
    )
    for table in tables:
        print(table.to_markdown_text())
    return 0


def _cmd_fit(args) -> int:
    dataset = _load_dataset(args)
    config = _solver_config(args)
    if args.penalty_file:
        profile = _penalty_profile_from_file(args.penalty_file, dataset)
        path = fit_path(dataset, profile, config)
        label = "custom"
    else:
        method = MethodSpec(
            name=args.method,
            permutations=args.permutations,
            d_n=args.dn,
        )
        seed = derive_seed(args.seed, method.label)
        output = run_method(method, dataset, seed, config)
        path = output.primary_path
        label = method.label
        if args.method == "mrar" and output.stage3_paths:
            # Emit the purge path of the GIC-selected discovery set.
            pick = gic_select(dataset, output.primary_path)
            q = tuple(
                int(j)
                for j in np.setdiff1d(
                    output.primary_path.support_at(pick.index),
                    output.retention.retained,
                )
            )
            path = output.stage3_paths.get(q, path)

    if args.emit == "csv":
        out = args.out or f"{label}_path.csv"
        path_to_csv(path, out, feature_names=dataset.feature_names)
        print(f"wrote {out}")
    else:
        payload = path_to_json(path, args.out, feature_names=dataset.feature_names)
        if args.out:
            print(f"wrote {args.out}")
        else:
            json.dump(payload, sys.stdout, indent=2)
            print()
    return 0


def _cmd_screen(args) -> int:
    dataset = _load_dataset(args)
    stats = marginal_coefficients(dataset)
    names = dataset.feature_names
    top = min(args.top, dataset.n_features)
    print(f"{'rank':>4}  {'feature':>12}  {'coef':>12}  {'|coef|':>12}")
    for rank, j in enumerate(stats.abs_rank[:top], start=1):
        label = names[j] if names else str(j + 1)
        print(f"{rank:>4}  {label:>12}  {stats.coef[j]:>12.6f}  {abs(stats.coef[j]):>12.6f}")
    gamma = permutation_threshold(dataset, args.permutations, args.seed)
    print(f"\npermutation threshold ({args.permutations} permutations): {gamma:.6f}")
    n = dataset.n_samples if not args.no_cap else None
    result = retain(stats, gamma, dataset.n_samples)
    retained = result.retained if not args.no_cap else np.flatnonzero(
        np.abs(stats.coef) >= gamma
    )
    labels = [str(names[j]) if names else str(j + 1) for j in retained]
    capped = " (capped)" if (not args.no_cap and result.capped) else ""
    print(f"retention set{capped}: {', '.join(labels) if labels else '(empty)'}")
    return 0


def _cmd_evaluate(args) -> int:
    if args.scenario or args.scenario_file:
        spec = _scenario_from_args(args)
        dataset = sample_dataset(spec, args.seed)
        if not args.no_standardize:
            dataset = standardize(dataset)
    else:
        dataset = _load_dataset(args)
    test = None
    if args.test:
        test = load_csv(args.test, response=args.response, header=not args.no_header)
    method = MethodSpec(name=args.method, permutations=args.permutations, d_n=args.dn)
    config = RealdataConfig(cv_folds=args.folds, solver=_solver_config(args))
    result = evaluate_method(
        method, dataset, args.metric, seed=args.seed, config=config, test=test
    )
    json.dump(result.to_dict(dataset.feature_names), sys.stdout, indent=2)
    print()
    return 0


def _cmd_diagnose(args) -> int:
    if args.scenario_file:
        spec = load_scenario(args.scenario_file)
    else:
        spec = ScenarioSpec.named(args.scenario, args.n or 100)
    retained = None
    if args.retained:
        retained = np.asarray([int(t) - 1 for t in args.retained.split(",")])
    diag = population_diagnostics(spec, retained=retained)
    m = spec.block_size
    print(f"scenario {spec.name}: block size {m}, p = {spec.dimension}, sigma = {spec.sigma}")
    print(f"var(Y) = {diag.var_y:.6f}   beta' Sigma beta = {diag.beta_quad_form:.6f}")
    with np.printoptions(precision=4, suppress=True):
        print(f"|marginal correlations| (block): {np.abs(diag.marginal_corr[:m])}")
        print(f"|marginal coefficients| (block): {np.abs(diag.marginal_coef[:m])}")
    print(f"zeta (max noise marginal coefficient) = {diag.zeta:.6f}")
    print(f"dependency norm (noise on signals)    = {diag.irrep_norm:.6f}")
    if diag.restricted_irrep_norm is not None:
        print(f"restricted dependency norm            = {diag.restricted_irrep_norm:.6f}")
    print(f"min eigenvalue of signal block        = {diag.min_eig_ss:.6f}")
    print(f"max conditional noise variance        = {diag.conditional_var_max:.6f}")
    print(f"max |Sigma beta| = {diag.sigma_beta_max:.6f}   min signal = {diag.min_abs_signal:.6f}")
    if args.threshold:
        r_set, z_set = strong_sets(spec, args.threshold, args.margin)
        report = retention_condition_quantities(spec, args.threshold, args.margin)
        print(f"\nthreshold {args.threshold} (margin {args.margin}):")
        print(f"  strong signals R = {[int(j) + 1 for j in r_set]}")
        print(f"  strong noises  Z = {[int(j) + 1 for j in z_set]}")
        print(f"  min eig of signal+noise block  = {report.min_eig_signal_noise:.6f}")
        print(f"  worst augmented dependency     = {report.augmented_irrep_max:.6f}")
        print(f"  noise-on-signal loading norm   = {report.noise_on_signal_norm:.6f}")
    return 0


def _cmd_realdata(args) -> int:
    train = load_csv(args.train, response=args.response, header=not args.no_header)
    test = load_csv(args.test, response=args.response, header=not args.no_header)
    methods = tuple(
        parse_method_token(tok, args.permutations) for tok in args.methods.split(",")
    )
    config = RealdataConfig(
        repetitions=args.repetitions,
        cv_folds=args.folds,
        seed=args.seed,
        d_n=args.dn,
        permutations=args.permutations,
        standardize=not args.no_standardize,
        solver=_solver_config(args),
    )
    report = run_realdata(train, test, methods, config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "realdata.csv").write_text(report.to_csv_text())
    (out_dir / "realdata.json").write_text(json.dumps(report.to_json_dict(), indent=2) + "\n")
    if not args.no_figures:
        from .plots import save_realdata_figure

        save_realdata_figure(report, out_dir / "realdata.png")
    print(report.to_csv_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rarsel",
        description=(
            "Retention-based sparse linear regression: weighted lasso paths, "
            "marginal screening, and sign-recovery simulation tables"
        ),
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="info-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a replication experiment and emit tables")
    p_sim.add_argument("--config", help="experiment TOML file")
    p_sim.add_argument("--smoke", action="store_true", help="reduced CI profile")
    p_sim.add_argument(
        "--paper-grid", action="store_true", help="full default grid (very long run)"
    )
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--workers", type=int, default=0, help="worker processes")
    p_sim.add_argument("--formats", default="csv,json,markdown")
    p_sim.add_argument("--no-figures", action="store_true")
    p_sim.set_defaults(func=_cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit one method and export its path")
    _add_data_args(p_fit)
    p_fit.add_argument(
        "--method", default="lasso",
        choices=["lasso", "ada", "sis", "isis", "rar", "mrar"],
    )
    p_fit.add_argument("--penalty-file", help="JSON feature->{0, w, inf} map (custom fit)")
    p_fit.add_argument("--permutations", type=int, default=10)
    p_fit.add_argument("--dn", type=int, default=None, help="screening budget")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--emit", choices=["json", "csv"], default="json")
    p_fit.add_argument("--out", help="output file (default: stdout for json)")
    p_fit.add_argument("--n-lambda", type=int, default=None)
    p_fit.add_argument("--lambda-min-ratio", type=float, default=None)
    p_fit.set_defaults(func=_cmd_fit)

    p_screen = sub.add_parser("screen", help="marginal coefficient ranking and threshold")
    _add_data_args(p_screen)
    p_screen.add_argument("--top", type=int, default=20, help="rows to print")
    p_screen.add_argument("--permutations", type=int, default=10)
    p_screen.add_argument("--seed", type=int, default=0)
    p_screen.add_argument(
        "--no-cap", action="store_true", help="do not cap the retention set at ceil(sqrt(n))"
    )
    p_screen.set_defaults(func=_cmd_screen)

    p_eval = sub.add_parser("evaluate", help="evaluate one method, emit JSON result")
    p_eval.add_argument("--data", help="delimited input file")
    p_eval.add_argument("--response", type=_response_arg, default=0)
    p_eval.add_argument("--no-header", action="store_true")
    p_eval.add_argument("--no-standardize", action="store_true")
    p_eval.add_argument("--scenario", help="built-in scenario name for synthetic data")
    p_eval.add_argument("--scenario-file")
    p_eval.add_argument("--n", type=int, help="sample size for synthetic data")
    p_eval.add_argument(
        "--method", default="lasso",
        choices=["lasso", "ada", "sis", "isis", "rar", "mrar"],
    )
    p_eval.add_argument("--metric", choices=["oracle", "cv", "gic", "mse"], required=True)
    p_eval.add_argument("--test", help="test file for the mse metric")
    p_eval.add_argument("--permutations", type=int, default=10)
    p_eval.add_argument("--dn", type=int, default=None)
    p_eval.add_argument("--folds", type=int, default=5)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--n-lambda", type=int, default=None)
    p_eval.add_argument("--lambda-min-ratio", type=float, default=None)
    p_eval.set_defaults(func=_cmd_evaluate)

    p_diag = sub.add_parser("diagnose", help="population diagnostics for a scenario")
    p_diag.add_argument("--scenario", help="built-in scenario name")
    p_diag.add_argument("--scenario-file")
    p_diag.add_argument("--n", type=int, default=None)
    p_diag.add_argument("--retained", help="1-based retained indices, comma separated")
    p_diag.add_argument("--threshold", type=float, default=None)
    p_diag.add_argument("--margin", type=float, default=0.0)
    p_diag.set_defaults(func=_cmd_diagnose)

    p_real = sub.add_parser("realdata", help="train/test comparison of methods")
    p_real.add_argument("--train", required=True)
    p_real.add_argument("--test", required=True)
    p_real.add_argument("--response", required=True, type=_response_arg)
    p_real.add_argument("--no-header", action="store_true")
    p_real.add_argument("--no-standardize", action="store_true")
    p_real.add_argument(
        "--methods", default="lasso,sis,isis,ada,rar,mrar",
        help="comma separated method tokens (rar_30 style accepted)",
    )
    p_real.add_argument("--repetitions", type=int, default=1)
    p_real.add_argument("--folds", type=int, default=5)
    p_real.add_argument("--seed", type=int, default=0)
    p_real.add_argument("--dn", type=int, default=None)
    p_real.add_argument("--permutations", type=int, default=10)
    p_real.add_argument("--out", required=True, help="output directory")
    p_real.add_argument("--no-figures", action="store_true")
    p_real.add_argument("--n-lambda", type=int, default=None)
    p_real.add_argument("--lambda-min-ratio", type=float, default=None)
    p_real.set_defaults(func=_cmd_realdata)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except (DataError, ExperimentError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
