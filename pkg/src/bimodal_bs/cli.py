"""Command-line driver: ``python -m bimodal_bs <command> ...``.

Commands
--------
fit       fit BBS and competitor models to a data file
simulate  run the Monte Carlo studies described in a scenario file
curves    tabulate pdf, cdf, sf and hazard on a grid
ci        confidence intervals for S(t), E[T] and Var[T]
km        Kaplan-Meier estimate

Exit status is 0 on success, 2 for bad input and 3 for numerical failure.
Machine-readable rows carry 17 significant digits; human tables 4 decimals.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import competitors as _comp
from .bbs import BbsParams, bbs_cdf, bbs_logsf, bbs_pdf, bbs_sf
from .datasets import Dataset, KmCurve, km_estimate, load_dataset
from .errors import (BbsError, CiUnavailableError, DomainError, FitError, IngestionError,
                     MomentError, OptimizationError, OverflowHazardError, QuadratureError,
                     ScenarioError)
from .estimation import FitResult, LrTest, ProfileGrid, fit_profile, lr_test_bs_vs_bbs
from .inference import CiResult, ci_mean, ci_survival, ci_variance
from .simulation import SimReport, load_scenarios, run_scenario

ALL_MODELS = ("bbs", "bbso", "mxbs", "bs", "ln")
EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def _g17(v) -> str:
    return format(float(v), ".17g")


def _f4(v) -> str:
    return "nan" if v is None or not math.isfinite(v) else f"{v:.4f}"


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


@dataclass
class ModelRow:
    model: str
    params: Dict[str, float] = field(default_factory=dict)
    se: Dict[str, float] = field(default_factory=dict)
    loglik: float = float("nan")
    aic: float = float("nan")
    bic: float = float("nan")
    k: int = 0
    converged: bool = False
    error: str = ""


@dataclass
class FitReport:
    """One row per requested model, plus the AIC/BIC winners and the LR test."""

    dataset: str
    n: int
    rows: List[ModelRow]
    best_aic: Optional[str]
    best_bic: Optional[str]
    lr: Optional[LrTest] = None
    bbs_fit: Optional[FitResult] = None

    def to_dict(self):
        return {
            "dataset": self.dataset,
            "n": self.n,
            "models": [r.__dict__ for r in self.rows],
            "best_aic": self.best_aic,
            "best_bic": self.best_bic,
            "lr_test": None if self.lr is None else self.lr.__dict__,
        }


def _row_from_bbs(f: FitResult) -> ModelRow:
    p = f.params
    return ModelRow("bbs", {"alpha": p.alpha, "beta": p.beta, "delta": p.delta},
                    {"alpha": f.se_alpha, "beta": f.se_beta, "delta": float("nan")},
                    f.loglik, f.aic, f.bic, 3, f.converged)


def _row_from_model(m: _comp.ModelFit) -> ModelRow:
    params = {k: float(getattr(m.params, k)) for k in m.params.__dataclass_fields__}
    return ModelRow(m.model, params, dict(m.se), m.loglik, m.aic, m.bic, m.k, m.converged)


def cmd_fit(dataset: Dataset, models: Sequence[str] = ALL_MODELS, delta_grid=None,
            refine: bool = False, fixed_p: Optional[float] = None) -> FitReport:
    """Fit each requested model; a failing model is reported in its row only."""
    data = dataset.arrays()
    rows, bbs_fit = [], None
    for m in models:
        try:
            if m == "bbs":
                bbs_fit = fit_profile(data, delta_grid, refine=refine)
                rows.append(_row_from_bbs(bbs_fit))
            else:
                fit = _comp.model_fit(data, m, fixed_p=fixed_p if m == "mxbs" else None)
                rows.append(_row_from_model(fit))
        except (FitError, OptimizationError, DomainError) as exc:
            rows.append(ModelRow(m, error=str(exc)))
    ok = [r for r in rows if not r.error]
    best_aic = min(ok, key=lambda r: r.aic).model if ok else None
    best_bic = min(ok, key=lambda r: r.bic).model if ok else None
    lr = None
    if bbs_fit is not None and "bs" in models:
        try:
            lr = lr_test_bs_vs_bbs(data, bbs_fit)
        except (FitError, OptimizationError):
            lr = None
    return FitReport(dataset.name, dataset.n, rows, best_aic, best_bic, lr, bbs_fit)


def format_fit_report(rep: FitReport) -> str:
    lines = [f"dataset {rep.dataset} (n={rep.n})", ""]
    lines.append(f"{'model':<6} {'parameter':<10} {'estimate':>14} {'se':>12}")
    for r in rep.rows:
        if r.error:
            lines.append(f"{r.model:<6} failed: {r.error}")
            continue
        for i, (k, v) in enumerate(r.params.items()):
            lines.append(f"{r.model if i == 0 else '':<6} {k:<10} {_f4(v):>14} "
                         f"{'' if not math.isfinite(r.se.get(k, float('nan'))) else _f4(r.se[k]):>12}")
    lines += ["", f"{'model':<6} {'loglik':>12} {'AIC':>12} {'BIC':>12}"]
    for r in rep.rows:
        if not r.error:
            lines.append(f"{r.model:<6} {_f4(r.loglik):>12} {_f4(r.aic):>12} {_f4(r.bic):>12}")
    lines.append("")
    lines.append(f"best by AIC: {rep.best_aic}; best by BIC: {rep.best_bic}")
    if rep.lr is not None:
        lines.append(f"LR (BS vs BBS) = {_f4(rep.lr.statistic)}; critical value "
                     f"{_f4(rep.lr.critical_value)}; reject BS: {rep.lr.reject_at_5pct}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------


def cmd_curves(params, lo: float, hi: float, points: int, log_spacing: bool = False):
    """Rows ``(t, pdf, cdf, sf, hr)`` on an evenly (or log) spaced grid.

    The hazard is ``nan`` where the survival function is below 1e-300.
    """
    if not (0 < lo < hi and math.isfinite(hi)):
        raise DomainError("range must satisfy 0 < lo < hi < inf")
    if int(points) < 2:
        raise DomainError("points must be >= 2")
    t = np.geomspace(lo, hi, int(points)) if log_spacing else np.linspace(lo, hi, int(points))
    if isinstance(params, BbsParams):
        pdf, cdf, sf = bbs_pdf(t, params), bbs_cdf(t, params), bbs_sf(t, params)
        logsf = bbs_logsf(t, params)
    else:
        pdf, cdf, sf = (_comp.model_pdf(t, params), _comp.model_cdf(t, params),
                        _comp.model_sf(t, params))
        logsf = _comp.model_logsf(t, params)
    with np.errstate(divide="ignore", invalid="ignore"):
        hr = np.where(logsf >= math.log(1e-300), pdf / sf, np.nan)
    return [tuple(float(v) for v in row) for row in zip(t, pdf, cdf, sf, hr)]


# ---------------------------------------------------------------------------
# ci and km
# ---------------------------------------------------------------------------


def cmd_ci(dataset: Dataset, targets: Sequence[str], rho: float = 0.025,
           fit: Optional[FitResult] = None, delta_grid=None) -> List[CiResult]:
    """Intervals for ``survival@t``, ``mean`` and ``variance`` targets."""
    data = dataset.arrays()
    fit = fit or fit_profile(data, delta_grid)
    out = []
    for tg in targets:
        tg = tg.strip()
        if tg == "mean":
            out.append(ci_mean(fit, data, rho))
        elif tg == "variance":
            out.append(ci_variance(fit, data, rho))
        elif tg.startswith("survival@"):
            try:
                t = float(tg.split("@", 1)[1])
            except ValueError as exc:
                raise DomainError(f"bad survival target {tg!r}") from exc
            out.append(ci_survival(t, fit, data, rho))
        else:
            raise DomainError(f"unknown target {tg!r}")
    return out


def cmd_km(dataset: Dataset) -> KmCurve:
    return km_estimate(dataset)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _sim_rows(rep: SimReport):
    sc = rep.scenario
    rows = []
    for tag in sc.fit_targets:
        for k, v in rep.mean_estimates.get(tag, {}).items():
            rows.append((sc.name, tag, "mean", k, v))
        if tag in rep.mean_loglik:
            rows.append((sc.name, tag, "mean_loglik", "", rep.mean_loglik[tag]))
        rows.append((sc.name, tag, "failures", "", float(rep.failures.get(tag, 0))))
    for k in rep.bias:
        rows.append((sc.name, "bbs", "bias", k, rep.bias[k]))
        rows.append((sc.name, "bbs", "mse", k, rep.mse[k]))
    rows.append((sc.name, "", "censored_fraction", "", rep.censored_fraction))
    return rows


def _scenario_echo(sc) -> str:
    params = ", ".join(f"{k}={v}" for k, v in sc.params)
    return (f"# scenario {sc.name or '-'}: study {sc.study}, generator {sc.generator}({params}), "
            f"n={sc.n}, censor_proportion={sc.censor_proportion}, replications={sc.replications}, "
            f"seed={sc.seed}, fit_targets={','.join(sc.fit_targets)}")


def cmd_simulate(scenario_path, seed: Optional[int] = None, reps: Optional[int] = None,
                 out_dir=None, workers: Optional[int] = None):
    """Run every scenario in a file; write ``report.txt`` and ``report.tsv`` to ``out_dir``."""
    from dataclasses import replace

    scenarios = load_scenarios(scenario_path)
    if seed is not None:
        scenarios = [replace(s, seed=int(seed)) for s in scenarios]
    if reps is not None:
        scenarios = [replace(s, replications=int(reps)) for s in scenarios]
    reports = [run_scenario(s, workers) for s in scenarios]
    human, machine = [], ["scenario\tmodel\tstatistic\tparameter\tvalue"]
    for rep in reports:
        human.append(_scenario_echo(rep.scenario))
        for name, tag, stat, k, v in _sim_rows(rep):
            human.append(f"{tag or '-':<6} {stat:<18} {k or '-':<8} {_f4(v):>12}")
            machine.append(f"{name}\t{tag}\t{stat}\t{k}\t{_g17(v)}")
        human.append("")
    if out_dir is not None:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / "report.txt").write_text("\n".join(human) + "\n", encoding="utf-8")
        echo = "\n".join(_scenario_echo(r.scenario) for r in reports)
        (d / "report.tsv").write_text(echo + "\n" + "\n".join(machine) + "\n", encoding="utf-8")
    return reports, "\n".join(human)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _parse_range(text, what):
    parts = text.split(":")
    if len(parts) != 2:
        raise DomainError(f"{what} must look like lo:hi")
    return float(parts[0]), float(parts[1])


def _grid_from_arg(text):
    if text is None:
        return None
    parts = text.split(":")
    if len(parts) == 3:
        lo, step, hi = (float(x) for x in parts)
        return ProfileGrid.from_range(lo, hi, step)
    lo, hi = _parse_range(text, "--delta-grid")
    return ProfileGrid.from_range(lo, hi, 1.0)


def _load(args):
    return load_dataset(args.file, fmt=args.format, time_column=args.time_column,
                        event_column=args.event_column)


def _add_data_args(p):
    p.add_argument("file")
    p.add_argument("--format", choices=("csv", "tsv"), default=None)
    p.add_argument("--time-column", default=None)
    p.add_argument("--event-column", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="python -m bimodal_bs", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit models to a data file")
    _add_data_args(p)
    p.add_argument("--models", default=",".join(ALL_MODELS))
    p.add_argument("--delta-grid", default="-20:20")
    p.add_argument("--refine", action="store_true", help="also search a 0.1 grid near the winner")
    p.add_argument("--fixed-p", type=float, default=None, help="hold the mixture weight fixed")
    p.add_argument("--out", default=None, help="write the report as JSON to this path")

    p = sub.add_parser("simulate", help="run a scenario file")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("curves", help="tabulate pdf/cdf/sf/hr")
    p.add_argument("--model", default="bbs", choices=("bbs",) + _comp.MODEL_TAGS)
    for name in ("alpha", "beta", "delta", "gamma", "mu", "sigma",
                 "alpha1", "beta1", "alpha2", "beta2", "p"):
        p.add_argument(f"--{name}", type=float, default=None)
    p.add_argument("--range", required=True)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--log", action="store_true", help="log-spaced grid")

    p = sub.add_parser("ci", help="confidence intervals from the profiled BBS fit")
    _add_data_args(p)
    p.add_argument("--target", default="mean,variance")
    p.add_argument("--rho", type=float, default=0.025)
    p.add_argument("--delta-grid", default="-20:20")

    p = sub.add_parser("km", help="Kaplan-Meier estimate")
    _add_data_args(p)
    return ap


def _curve_params(args):
    def need(*names):
        vals = [getattr(args, n) for n in names]
        missing = [n for n, v in zip(names, vals) if v is None]
        if missing:
            raise DomainError(f"model {args.model} needs --{', --'.join(missing)}")
        return vals

    if args.model == "bbs":
        a, b = need("alpha", "beta")
        return BbsParams(a, b, args.delta or 0.0)
    cls = {"bs": (_comp.BsParams, ("alpha", "beta")),
           "ln": (_comp.LnParams, ("mu", "sigma")),
           "bbso": (_comp.BbsoParams, ("alpha", "beta", "gamma")),
           "mxbs": (_comp.MxbsParams, ("alpha1", "beta1", "alpha2", "beta2", "p"))}[args.model]
    return cls[0](*need(*cls[1]))


def _run(args, out) -> int:
    if args.command == "fit":
        ds = _load(args)
        models = [m.strip().lower() for m in args.models.split(",") if m.strip()]
        bad = [m for m in models if m not in ALL_MODELS]
        if bad:
            raise DomainError(f"unknown models {bad}")
        rep = cmd_fit(ds, models, _grid_from_arg(args.delta_grid), args.refine, args.fixed_p)
        print(format_fit_report(rep), file=out)
        if args.out:
            Path(args.out).write_text(json.dumps(rep.to_dict(), indent=2), encoding="utf-8")
        return EXIT_OK if all(not r.error for r in rep.rows) else EXIT_NUMERIC
    if args.command == "simulate":
        _, text = cmd_simulate(args.scenario, args.seed, args.reps, args.out, args.workers)
        print(text, file=out)
        return EXIT_OK
    if args.command == "curves":
        lo, hi = _parse_range(args.range, "--range")
        rows = cmd_curves(_curve_params(args), lo, hi, args.points, args.log)
        print("t\tpdf\tcdf\tsf\thr", file=out)
        for row in rows:
            print("\t".join(_g17(v) for v in row), file=out)
        return EXIT_OK
    if args.command == "ci":
        ds = _load(args)
        res = cmd_ci(ds, args.target.split(","), args.rho, delta_grid=_grid_from_arg(args.delta_grid))
        print("target\tt\testimate\tlower\tupper\tconfidence", file=out)
        for r in res:
            print("\t".join([r.target, "" if r.t is None else _g17(r.t), _g17(r.estimate),
                             _g17(r.lower), _g17(r.upper), _g17(r.confidence)]), file=out)
        return EXIT_OK
    if args.command == "km":
        km = cmd_km(_load(args))
        print("time\tsurvival\tat_risk\tevents", file=out)
        for row in zip(km.times, km.survival, km.at_risk, km.events):
            print(f"{_g17(row[0])}\t{_g17(row[1])}\t{row[2]}\t{row[3]}", file=out)
        return EXIT_OK
    raise DomainError(f"unknown command {args.command}")


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return _run(args, out)
    except (IngestionError, ScenarioError, DomainError) as exc:
        for row, reason in getattr(exc, "rejected", []):
            print(f"row {row}: {reason}", file=sys.stderr)
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FitError, OptimizationError, QuadratureError, CiUnavailableError, MomentError,
            OverflowHazardError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
