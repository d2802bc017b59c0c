"""Monte Carlo study runner for rejection-rate tables.

Each scenario pairs calibrated truth parameters with the deterministic
limits of the CIF-effect estimators, then loops seeded replicates through
the full estimation and test battery.  Replicates are independent work
units keyed by (seed, scenario, replicate), so results are identical for
any worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from itertools import product
from multiprocessing import Pool

import numpy as np

from .censoring import km_censoring
from .datagen import CensoringSpec, calibrate_censoring_rate, generate_dataset
from .directbinomial import db_fit, default_grid
from .errors import (CiflimitsError, ConfigError, FitError, TestError,
                     VarianceError)
from .finegray import fg_fit
from .inference import cox_wald, gray_test, joint_cox_wald, logrank_cause, wald_cif
from .limits import limit_db, limit_fg
from .process import CifGenerativeModel, IntensityModel

__all__ = ["StudyConfig", "ScenarioResult", "StudyResult", "run_study",
           "emit_table", "DEFAULT_TESTS"]

DEFAULT_TESTS = ("T_LR_l1", "T_Cox_l1", "T_Cox_l1l2", "T_Gray_F1",
                 "T_FG_F1", "T_DB6_F1", "T_DB3_F1")


@dataclass(frozen=True)
class StudyConfig:
    """Design of one Monte Carlo study (a set of scenarios at a common scale)."""

    family: str = "intensity"
    n: int = 1000
    n_sim: int = 1000
    omega: float = 0.05
    tau: float = 1.0
    seed: int = 0
    p_treat: float = 0.5
    pi_r: float = 0.2
    grids: tuple = (6, 3)
    tests: tuple = DEFAULT_TESTS
    weight_scheme: str = "stabilized"
    # intensity family
    p_event: float = 0.6
    p_type1: float = 0.6
    kappa1: float = 1.0
    kappa2: float = 1.0
    exp_g1: tuple = (1.0,)
    exp_g2: tuple = (1.0,)
    # cif family
    f1_target: float = 0.36
    variant: str = "extended"
    exp_b: tuple = (1.0,)
    exp_b2: tuple = (1.0,)

    def __post_init__(self):
        if self.family not in ("intensity", "cif"):
            raise ConfigError(f"unknown family {self.family!r}")
        if self.n < 10:
            raise ConfigError("n must be >= 10")
        if self.n_sim < 1:
            raise ConfigError("n_sim must be >= 1")
        if not 0.0 < self.omega < 1.0:
            raise ConfigError("omega must lie in (0, 1)")
        if not 0.0 <= self.pi_r < 1.0:
            raise ConfigError("pi_r must lie in [0, 1)")
        for name in ("grids", "tests", "exp_g1", "exp_g2", "exp_b", "exp_b2"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @classmethod
    def from_json(cls, path) -> "StudyConfig":
        with open(path) as fh:
            raw = json.load(fh)
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(f"bad study config: {exc}") from exc

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2)

    def scenarios(self):
        """Enumerate scenario parameter dicts in table row order."""
        if self.family == "intensity":
            return [{"exp_g1": g1, "exp_g2": g2}
                    for g2, g1 in product(self.exp_g2, self.exp_g1)]
        if self.variant == "coupled":
            return [{"exp_b": b, "exp_b2": None} for b in self.exp_b]
        return [{"exp_b": b, "exp_b2": b2}
                for b, b2 in product(self.exp_b, self.exp_b2)]

    def build_truth(self, params: dict):
        if self.family == "intensity":
            return IntensityModel.calibrated(
                self.p_event, self.p_type1, shape1=self.kappa1,
                shape2=self.kappa2, tau=self.tau,
                exp_hr1=params["exp_g1"], exp_hr2=params["exp_g2"])
        return CifGenerativeModel.calibrated(
            self.f1_target, exp_b=params["exp_b"], exp_b2=params["exp_b2"],
            variant=self.variant, tau=self.tau)


@dataclass
class ScenarioResult:
    params: dict
    beta_star_fg: float
    beta_star_db6: float
    beta_star_db3: float
    censoring_rate: float
    rejection: dict
    mc_se: dict
    failures: dict
    n_used: dict
    flagged: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StudyResult:
    config: StudyConfig
    scenarios: list

    def to_dict(self) -> dict:
        return {"config": asdict(self.config),
                "scenarios": [s.to_dict() for s in self.scenarios]}


def _replicate_pvalues(truth, cens, n, seed, rep_key, tests, p_treat,
                       weight_scheme):
    """P-values of all requested tests on one replicate; NaN marks failure."""
    data = generate_dataset(truth, n, cens, seed=seed, replicate=rep_key,
                            p_treat=p_treat)
    out = {}
    curve = None
    try:
        curve = km_censoring(data)
    except CiflimitsError:
        return {t: math.nan for t in tests}
    for name in tests:
        try:
            if name == "T_LR_l1":
                res = logrank_cause(data, 1)
            elif name == "T_LR_l2":
                res = logrank_cause(data, 2)
            elif name == "T_Cox_l1":
                res = cox_wald(data, 1)
            elif name == "T_Cox_l2":
                res = cox_wald(data, 2)
            elif name == "T_Cox_l1l2":
                res = joint_cox_wald(data)
            elif name == "T_Gray_F1":
                res = gray_test(data, curve, weight_scheme)
            elif name == "T_FG_F1":
                res = wald_cif(fg_fit(data, curve, weight_scheme))
            elif name.startswith("T_DB") and name.endswith("_F1"):
                r = int(name[4:-3])
                res = wald_cif(db_fit(data, curve, default_grid(data.tau, r)))
            else:
                raise ConfigError(f"unknown test {name!r}")
            out[name] = res.p_value
        except (FitError, VarianceError, TestError):
            out[name] = math.nan
    return out


def _worker(args):
    return _replicate_pvalues(*args)


def run_study(config: StudyConfig, threads: int = 1) -> StudyResult:
    """Run all scenarios; deterministic given the config seed."""
    results = []
    for scen_idx, params in enumerate(config.scenarios()):
        truth = config.build_truth(params)
        rho = (calibrate_censoring_rate(truth, config.pi_r, config.tau,
                                        config.p_treat)
               if config.pi_r > 0 else 0.0)
        cens = CensoringSpec(rate=rho, tau=config.tau)
        lim_cens = cens if rho > 0 else None
        beta_fg = limit_fg(truth, config.p_treat, censoring=lim_cens).beta_star
        beta_db6 = limit_db(truth, default_grid(config.tau, 6),
                            config.p_treat).beta_star
        beta_db3 = limit_db(truth, default_grid(config.tau, 3),
                            config.p_treat).beta_star

        tasks = [(truth, cens, config.n, config.seed,
                  (scen_idx << 32) + rep, config.tests,
                  config.p_treat, config.weight_scheme)
                 for rep in range(config.n_sim)]
        if threads > 1:
            with Pool(threads) as pool:
                rows = pool.map(_worker, tasks, chunksize=16)
        else:
            rows = [_worker(t) for t in tasks]

        rejection, mc_se, failures, n_used = {}, {}, {}, {}
        for name in config.tests:
            pvals = np.array([r[name] for r in rows])
            ok = ~np.isnan(pvals)
            n_ok = int(ok.sum())
            n_used[name] = n_ok
            failures[name] = int(len(pvals) - n_ok)
            if n_ok == 0:
                rejection[name] = math.nan
                mc_se[name] = math.nan
                continue
            rate = float(np.mean(pvals[ok] < config.omega))
            rejection[name] = rate
            mc_se[name] = math.sqrt(rate * (1.0 - rate) / n_ok)
        flagged = any(f > 0.01 * config.n_sim for f in failures.values())
        results.append(ScenarioResult(
            params=params, beta_star_fg=beta_fg, beta_star_db6=beta_db6,
            beta_star_db3=beta_db3, censoring_rate=rho, rejection=rejection,
            mc_se=mc_se, failures=failures, n_used=n_used, flagged=flagged))
    return StudyResult(config=config, scenarios=results)


_TEST_COLUMNS = ["T_LR_l1", "T_Cox_l1", "T_Cox_l1l2", "T_Gray_F1",
                 "T_FG_F1", "T_DB6_F1", "T_DB3_F1"]


def _table_rows(result: StudyResult):
    if result.config.family == "intensity":
        param_cols = ["exp_g2", "exp_g1"]
    else:
        param_cols = ["exp_b", "exp_b2"]
    header = param_cols + _TEST_COLUMNS + ["bstar_fg", "bstar_db6", "bstar_db3"]
    rows = []
    for scen in result.scenarios:
        row = []
        if result.config.family == "intensity":
            row += [scen.params["exp_g2"], scen.params["exp_g1"]]
        else:
            row += [scen.params["exp_b"], scen.params["exp_b2"]]
        for t in _TEST_COLUMNS:
            row.append(scen.rejection.get(t, ""))
        row += [scen.beta_star_fg, scen.beta_star_db6, scen.beta_star_db3]
        rows.append(row)
    return header, rows


def _fmt(value, digits: int = 12) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, f".{digits}g")
    return str(value)


def emit_table(result: StudyResult, fmt: str = "csv", path=None) -> str:
    """Render the study as csv, markdown or json; optionally write a file."""
    if fmt == "json":
        text = json.dumps(result.to_dict(), indent=2)
    elif fmt == "csv":
        header, rows = _table_rows(result)
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
    elif fmt == "markdown":
        header, rows = _table_rows(result)
        lines = ["| " + " | ".join(header) + " |",
                 "|" + "|".join(["---"] * len(header)) + "|"]
        for row in rows:
            lines.append("| " + " | ".join(_fmt(v, 6) for v in row) + " |")
        text = "\n".join(lines) + "\n"
    else:
        raise ConfigError(f"unknown table format {fmt!r}")
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
