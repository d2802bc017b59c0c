"""Command-line interface.

Subcommands mirror the workflow: calibrate baseline rates, compute
probability-limit sweeps, simulate trials, fit/test a dataset, run Monte
Carlo studies, size a trial, and render report figures alongside the
delimited outputs.  Exit codes: 0 success, 2 configuration error, 3
numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .censoring import km_censoring
from .datagen import CensoringSpec, calibrate_censoring_rate, generate_dataset
from .dataset import Dataset
from .directbinomial import db_fit, db_fit_unconstrained, default_grid
from .errors import CiflimitsError, ConfigError, DomainError
from .finegray import fg_fit
from .inference import (cox_wald, gof_db_contrast, gof_db_wald, gof_fg_wald,
                        gray_test, joint_cox_wald, latouche_sample_size,
                        logrank_cause, wald_cif)
from .limits import SWEEP_CSV_HEADER, limit_grid_sweep
from .process import CifGenerativeModel, IntensityModel, adequacy_curve, calibrate_baseline
from .study import StudyConfig, emit_table, run_study


def _write_json(payload, path):
    text = json.dumps(payload, indent=2)
    if path is None or path == "-":
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _load_truth(config: dict):
    family = config.get("family", "intensity")
    tau = float(config.get("tau", 1.0))
    if family == "intensity":
        if "rate1" in config:
            truth = IntensityModel(
                rate1=config["rate1"], rate2=config["rate2"],
                log_hr1=float(np.log(config.get("exp_g1", 1.0))),
                log_hr2=float(np.log(config.get("exp_g2", 1.0))),
                shape1=config.get("kappa1", 1.0),
                shape2=config.get("kappa2", 1.0), tau=tau)
        else:
            truth = IntensityModel.calibrated(
                config.get("p_event", 0.6), config.get("p_type1", 0.6),
                shape1=config.get("kappa1", 1.0),
                shape2=config.get("kappa2", 1.0), tau=tau,
                exp_hr1=config.get("exp_g1", 1.0),
                exp_hr2=config.get("exp_g2", 1.0))
    elif family == "cif":
        truth = CifGenerativeModel.calibrated(
            config.get("f1_target", 0.36), exp_b=config.get("exp_b", 1.0),
            exp_b2=config.get("exp_b2"), variant=config.get("variant", "extended"),
            tau=tau)
    else:
        raise ConfigError(f"unknown truth family {family!r}")
    if "rate" in config:
        rho = float(config["rate"])
    elif config.get("pi_r", 0.2) > 0:
        rho = calibrate_censoring_rate(truth, config.get("pi_r", 0.2), tau,
                                       config.get("p_treat", 0.5))
    else:
        rho = 0.0
    return truth, CensoringSpec(rate=rho, tau=tau)


def _cmd_calibrate(args):
    rate1, rate2 = calibrate_baseline(args.pT, args.p1, args.kappa1,
                                      args.kappa2, args.tau)
    _write_json({"rate1": rate1, "rate2": rate2, "p_event": args.pT,
                 "p_type1": args.p1, "kappa1": args.kappa1,
                 "kappa2": args.kappa2, "tau": args.tau}, args.out)
    return 0


def _cmd_limits(args):
    with open(args.config) as fh:
        cfg = json.load(fh)
    rows = limit_grid_sweep(
        exp_g1_values=cfg.get("exp_g1", [1.0]),
        exp_g2_values=cfg.get("exp_g2", [1.0]),
        p_type1_values=cfg.get("p1", [0.6]),
        kappa1_values=cfg.get("kappa1", [1.0]),
        kappa2=cfg.get("kappa2", 1.0),
        p_event=cfg.get("p_event", 0.6),
        tau=cfg.get("tau", 1.0),
        pi_r=cfg.get("pi_r", 0.2),
        p_treat=cfg.get("p_treat", 0.5),
        out_csv=args.out)
    failed = [r for r in rows if r["error"]]
    if failed:
        print(f"{len(failed)} sweep cell(s) failed; see the error column",
              file=sys.stderr)
    if args.plot:
        from .plots import plot_limit_sweep
        plot_limit_sweep(rows, args.out + ".png")
    return 0


def _cmd_simulate(args):
    with open(args.config) as fh:
        cfg = json.load(fh)
    truth, cens = _load_truth(cfg)
    data = generate_dataset(truth, args.n, cens, seed=args.seed,
                            p_treat=cfg.get("p_treat", 0.5))
    data.to_csv(args.out)
    return 0


def _grid_from_args(args, tau: float):
    if args.grid:
        return np.array([float(v) for v in args.grid.split(",")])
    return default_grid(tau, args.grid_size)


def _cmd_fit(args):
    data = Dataset.from_csv(args.data, tau=args.tau)
    curves = km_censoring(data, stratify_by_x=args.stratify)
    if args.method == "fg":
        fit = fg_fit(data, curves, weight_scheme=args.weight_scheme)
        payload = {"beta_hat": fit.beta_hat, "se_naive": fit.se_naive,
                   "se_robust": fit.se_robust, "n_events": fit.n_events,
                   "breslow": [{"t": float(t), "dGamma": float(d)}
                               for t, d in zip(fit.breslow_times,
                                               fit.breslow_dgamma)]}
    elif args.method == "db":
        grid = _grid_from_args(args, data.tau)
        fit = db_fit(data, curves, grid)
        payload = {"grid": [float(s) for s in fit.grid],
                   "alpha_hat": [float(a) for a in fit.alpha_hat],
                   "beta_hat": fit.beta_hat,
                   "cov": [[float(v) for v in row] for row in fit.cov],
                   "n_boot": None}
    else:
        raise ConfigError(f"unknown method {args.method!r}")
    _write_json(payload, args.out)
    return 0


_ALL_TESTS = ("T_LR_l1", "T_Cox_l1", "T_Cox_l1l2", "T_Gray_F1", "T_FG_F1",
              "T_DB6_F1", "T_DB3_F1")


def _cmd_test(args):
    data = Dataset.from_csv(args.data, tau=args.tau)
    curves = km_censoring(data, stratify_by_x=args.stratify)
    wanted = _ALL_TESTS if args.tests == "all" else tuple(args.tests.split(","))
    results = []
    for name in wanted:
        if name == "T_LR_l1":
            res = logrank_cause(data, 1)
        elif name == "T_Cox_l1":
            res = cox_wald(data, 1)
        elif name == "T_Cox_l1l2":
            res = joint_cox_wald(data)
        elif name == "T_Gray_F1":
            res = gray_test(data, curves, args.weight_scheme)
        elif name == "T_FG_F1":
            res = wald_cif(fg_fit(data, curves, args.weight_scheme))
        elif name.startswith("T_DB") and name.endswith("_F1"):
            r = int(name[4:-3])
            res = wald_cif(db_fit(data, curves, default_grid(data.tau, r)))
        elif name == "GOF_FG_Wald":
            res = gof_fg_wald(data, curves, args.b_spec, args.weight_scheme)
        elif name == "GOF_DB_Wald":
            res = gof_db_wald(data, curves, default_grid(data.tau, args.grid_size),
                              args.b_spec)
        elif name == "GOF_DB_Contrast":
            ufit = db_fit_unconstrained(data, curves,
                                        default_grid(data.tau, args.grid_size),
                                        n_boot=args.n_boot, seed=args.seed)
            res = gof_db_contrast(ufit)
        else:
            raise ConfigError(f"unknown test {name!r}")
        results.append(res.to_dict())
    _write_json(results, args.out)
    return 0


def _cmd_study(args):
    config = StudyConfig.from_json(args.config)
    if args.reps is not None:
        config = StudyConfig(**{**json.load(open(args.config)),
                                "n_sim": args.reps})
    result = run_study(config, threads=args.threads)
    emit_table(result, args.format, args.out)
    if args.format != "json":
        emit_table(result, "json", args.out + ".json")
    if args.plot:
        from .plots import plot_study_rates
        plot_study_rates(result, args.out + ".png")
    return 0


def _cmd_samplesize(args):
    n = latouche_sample_size(args.omega, 1.0 - args.power, args.beta1,
                             args.px1, args.pobs)
    print(n)
    return 0


def _cmd_report(args):
    from .plots import plot_adequacy_curves, plot_km_curve, plot_limit_sweep, plot_study_rates

    if args.kind == "sweep":
        plot_limit_sweep(args.input, args.out)
    elif args.kind == "study":
        from .study import ScenarioResult, StudyResult
        with open(args.input) as fh:
            raw = json.load(fh)
        config = StudyConfig(**raw["config"])
        scenarios = [ScenarioResult(**s) for s in raw["scenarios"]]
        plot_study_rates(StudyResult(config, scenarios), args.out)
    elif args.kind == "adequacy":
        with open(args.config) as fh:
            cfg = json.load(fh)
        truth, _ = _load_truth({**cfg, "pi_r": 0})
        grid = np.linspace(truth.tau / args.grid_points, truth.tau,
                           args.grid_points)
        values = adequacy_curve(truth, grid)
        csv_path = args.out.rsplit(".", 1)[0] + ".csv"
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", "cloglog_diff"])
            for t, v in zip(grid, values):
                writer.writerow([format(t, ".12g"), format(v, ".12g")])
        plot_adequacy_curves({"true process": (grid, values)}, args.out)
    elif args.kind == "censoring":
        data = Dataset.from_csv(args.data, tau=args.tau)
        curve = km_censoring(data)
        csv_path = args.out.rsplit(".", 1)[0] + ".csv"
        curve.to_csv(csv_path)
        plot_km_curve(curve, args.out)
    else:
        raise ConfigError(f"unknown report kind {args.kind!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ciflimits",
        description="Competing-risks CIF regression, estimand limits and "
                    "Monte Carlo test studies")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="solve baseline rates from design constraints")
    p.add_argument("--pT", type=float, required=True,
                   help="P(T <= tau | X=0), total event probability")
    p.add_argument("--p1", type=float, required=True,
                   help="P(T1 < T2 | T <= tau, X=0), type-1 share")
    p.add_argument("--kappa1", type=float, default=1.0)
    p.add_argument("--kappa2", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("limits", help="probability-limit sweep to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action="store_true",
                   help="also render <out>.png")
    p.set_defaults(func=_cmd_limits)

    p = sub.add_parser("simulate", help="generate one dataset CSV")
    p.add_argument("--config", required=True, help="truth JSON")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="fit the CIF model to a dataset")
    p.add_argument("--method", choices=("fg", "db"), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--grid", default=None, help="comma-separated grid times")
    p.add_argument("--grid-size", type=int, default=6)
    p.add_argument("--weight-scheme", choices=("stabilized", "raw"),
                   default="stabilized")
    p.add_argument("--stratify", action="store_true",
                   help="stratify the censoring curve by arm")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("test", help="run the hypothesis-test battery")
    p.add_argument("--data", required=True)
    p.add_argument("--tests", default="all")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--grid-size", type=int, default=6)
    p.add_argument("--b-spec", choices=("t", "log"), default="t")
    p.add_argument("--n-boot", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weight-scheme", choices=("stabilized", "raw"),
                   default="stabilized")
    p.add_argument("--stratify", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_test)

    p = sub.add_parser("study", help="Monte Carlo rejection-rate study")
    p.add_argument("--config", required=True)
    p.add_argument("--reps", type=int, default=None,
                   help="override n_sim from the config")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json", "markdown"),
                   default="csv")
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_study)

    p = sub.add_parser("samplesize", help="closed-form FG sample size")
    p.add_argument("--omega", type=float, default=0.05)
    p.add_argument("--power", type=float, required=True)
    p.add_argument("--beta1", type=float, required=True)
    p.add_argument("--pobs", type=float, required=True,
                   help="proportion of observed type-1 events")
    p.add_argument("--px1", type=float, default=0.5)
    p.set_defaults(func=_cmd_samplesize)

    p = sub.add_parser("report", help="render figures from outputs")
    p.add_argument("kind", choices=("sweep", "study", "adequacy", "censoring"))
    p.add_argument("--in", dest="input", default=None,
                   help="sweep CSV or study JSON")
    p.add_argument("--config", default=None, help="truth JSON (adequacy)")
    p.add_argument("--data", default=None, help="dataset CSV (censoring)")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--grid-points", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CiflimitsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
