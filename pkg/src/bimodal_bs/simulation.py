"""Monte Carlo studies: estimator bias/MSE under censoring, and model comparison.

Study 1 draws BBS samples, censors them at random and refits ``(alpha, beta)``
with ``delta`` at its true value.  Study 2 draws from a BS, log-normal or
BS-mixture generator and fits the profiled BBS model alongside BBSO.

Every replication owns the substream ``RngStream(seed, (replication,))``,
so results do not depend on the number of worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize as _optimize

from .bbs import BbsParams, bbs_sample, bbs_sf
from .competitors import BsParams, LnParams, MxbsParams, model_fit, model_sample
from .errors import DomainError, FitError, ScenarioError
from .estimation import ProfileGrid, fit_fixed_delta, fit_profile
from .numerics import RngStream, integrate_interval
from .observations import Observation

GENERATOR_KEYS = {
    "bbs": ("alpha", "beta", "delta"),
    "bs": ("alpha", "beta"),
    "ln": ("mu", "sigma"),
    "mxbs": ("alpha1", "beta1", "alpha2", "beta2", "p"),
}
_SCALAR_KEYS = ("study", "generator", "n", "censor_proportion", "replications", "seed",
                "fit_targets", "delta_grid", "censor_reference", "name")


@dataclass(frozen=True)
class Scenario:
    """One simulation cell.

    ``censor_reference`` chooses how the censoring bound is calibrated:
    ``'empirical'`` matches the censored fraction on each drawn sample,
    ``'population'`` uses the generator's survival function (BBS only).
    """

    generator: str
    params: Tuple[Tuple[str, float], ...]
    n: int
    censor_proportion: float = 0.0
    replications: int = 1000
    seed: int = 1
    fit_targets: Tuple[str, ...] = ("bbs",)
    delta_grid: Tuple[float, ...] = tuple(float(d) for d in range(-20, 21))
    study: int = 1
    censor_reference: str = "empirical"
    name: str = ""

    def __post_init__(self):
        if self.generator not in GENERATOR_KEYS:
            raise ScenarioError(f"unknown generator {self.generator!r}")
        keys = tuple(k for k, _ in self.params)
        if set(keys) != set(GENERATOR_KEYS[self.generator]):
            raise ScenarioError(f"generator {self.generator} needs parameters "
                                f"{', '.join(GENERATOR_KEYS[self.generator])}")
        if int(self.n) < 4:
            raise ScenarioError("n must be >= 4")
        if int(self.replications) < 1:
            raise ScenarioError("replications must be >= 1")
        if not 0.0 <= self.censor_proportion < 1.0:
            raise ScenarioError("censor_proportion must lie in [0, 1)")
        if self.study not in (1, 2):
            raise ScenarioError("study must be 1 or 2")
        if self.study == 1 and self.generator != "bbs":
            raise ScenarioError("study 1 needs the bbs generator")
        if self.study == 2 and self.generator == "bbs":
            raise ScenarioError("study 2 needs a bs, ln or mxbs generator")
        if self.censor_reference not in ("empirical", "population"):
            raise ScenarioError("censor_reference must be 'empirical' or 'population'")
        if self.censor_reference == "population" and self.generator != "bbs":
            raise ScenarioError("population censoring calibration is available for bbs only")
        for tag in self.fit_targets:
            if tag not in ("bbs", "bbso", "bs", "ln", "mxbs"):
                raise ScenarioError(f"unknown fit target {tag!r}")

    @property
    def param_dict(self) -> Dict[str, float]:
        return dict(self.params)

    def generator_params(self):
        d = self.param_dict
        return {"bbs": BbsParams, "bs": BsParams, "ln": LnParams, "mxbs": MxbsParams}[
            self.generator](**d)


@dataclass
class SimReport:
    """Aggregated replications of one scenario.

    ``bias`` and ``mse`` (Study 1) map parameter names to values.
    ``mean_estimates`` and ``mean_loglik`` are keyed by fitted model tag;
    ``failures`` counts replications whose fit failed for that model.
    """

    scenario: Scenario
    bias: Dict[str, float] = field(default_factory=dict)
    mse: Dict[str, float] = field(default_factory=dict)
    mean_estimates: Dict[str, Dict[str, float]] = field(default_factory=dict)
    mean_loglik: Dict[str, float] = field(default_factory=dict)
    failures: Dict[str, int] = field(default_factory=dict)
    used: Dict[str, int] = field(default_factory=dict)
    censored_fraction: float = 0.0


# ---------------------------------------------------------------------------
# censoring
# ---------------------------------------------------------------------------


def censoring_bound(times, proportion: float, sf=None) -> float:
    """``c`` with ``(1/c) int_0^c S(u) du = proportion``.

    For ``C ~ Uniform(0, c)`` independent of ``T`` this integral is
    ``P(C < T)``.  ``S`` is the empirical survival of ``times`` unless a
    survival function ``sf`` is supplied.
    """
    t = np.asarray(times, dtype=float)
    if not 0.0 < proportion < 1.0:
        raise ScenarioError("censoring proportion must lie in (0, 1) for calibration")
    if sf is None:
        def frac(c):
            return float(np.mean(np.minimum(t, c))) / c
    else:
        def frac(c):
            return integrate_interval(sf, 0.0, c, 1e-12, 1e-10) / c
    lo, hi = float(np.min(t)) * 1e-3, float(np.max(t)) * 1e3
    # past the largest time the fraction decays like mean / c
    for _ in range(60):
        if frac(hi) < proportion:
            break
        hi *= 16.0
    try:
        return math.exp(_optimize.brentq(lambda lc: frac(math.exp(lc)) - proportion,
                                         math.log(lo), math.log(hi), xtol=1e-12))
    except ValueError as exc:
        raise ScenarioError(f"cannot calibrate censoring to proportion {proportion}") from exc


def make_censoring(times, proportion: float, rng: RngStream, sf=None) -> List[Observation]:
    """Right-censor ``times`` with ``Uniform(0, c)`` censoring times.

    ``c`` comes from :func:`censoring_bound`, so the expected censored
    fraction equals ``proportion``.  ``proportion = 0`` returns every time
    untouched as an event.
    """
    t = np.asarray(times, dtype=float)
    if not 0.0 <= proportion < 1.0:
        raise ScenarioError("censoring proportion must lie in [0, 1)")
    if proportion == 0.0:
        return [Observation(float(x), True) for x in t]
    c = censoring_bound(t, proportion, sf)
    cens = c * rng.uniform(t.size)
    return [Observation(float(min(x, y)), bool(x <= y)) for x, y in zip(t, cens)]


def _censor_arrays(t, proportion, rng, sf=None):
    if proportion == 0.0:
        return t, np.ones(t.size, dtype=bool)
    obs = make_censoring(t, proportion, rng, sf)
    return (np.array([o.time for o in obs]), np.array([o.event for o in obs]))


# ---------------------------------------------------------------------------
# replications
# ---------------------------------------------------------------------------


def _draw(sc: Scenario, rng: RngStream):
    gp = sc.generator_params()
    if sc.generator == "bbs":
        return bbs_sample(sc.n, gp, rng)
    return model_sample(sc.n, gp, rng)


def _replicate(args):
    sc, r = args
    rng = RngStream(sc.seed, (r,))
    t = _draw(sc, rng)
    sf = None
    if sc.censor_reference == "population" and sc.censor_proportion > 0:
        gp = sc.generator_params()
        sf = lambda u: bbs_sf(np.maximum(u, 1e-300), gp)  # noqa: E731
    t, ev = _censor_arrays(t, sc.censor_proportion, rng.substream(0), sf)
    out = {"censored": float(np.mean(~ev))}
    for tag in sc.fit_targets:
        try:
            if tag == "bbs" and sc.study == 1:
                f = fit_fixed_delta((t, ev), sc.param_dict["delta"])
                ok = f.converged
                est = {"alpha": f.params.alpha, "beta": f.params.beta}
                ll = f.loglik
            elif tag == "bbs":
                f = fit_profile((t, ev), ProfileGrid(sc.delta_grid))
                ok = f.converged
                est = {"alpha": f.params.alpha, "beta": f.params.beta, "delta": f.params.delta}
                ll = f.loglik
            else:
                mf = model_fit((t, ev), tag)
                ok = True
                est = dict(zip(*_names_values(mf.params)))
                ll = mf.loglik
        except (FitError, DomainError):
            ok = False
        out[tag] = (est, ll) if ok and math.isfinite(ll) else None
    return out


def _names_values(params):
    names = list(params.__dataclass_fields__)
    return names, [float(getattr(params, k)) for k in names]


def _run(sc: Scenario, workers: Optional[int]):
    jobs = [(sc, r) for r in range(sc.replications)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    return [_replicate(j) for j in jobs]


def _aggregate(sc: Scenario, results, truth: Optional[Dict[str, float]]) -> SimReport:
    rep = SimReport(sc)
    rep.censored_fraction = math.fsum(r["censored"] for r in results) / len(results)
    for tag in sc.fit_targets:
        good = [r[tag] for r in results if r[tag] is not None]
        rep.failures[tag] = len(results) - len(good)
        rep.used[tag] = len(good)
        if not good:
            continue
        names = list(good[0][0])
        rep.mean_estimates[tag] = {k: math.fsum(g[0][k] for g in good) / len(good) for k in names}
        rep.mean_loglik[tag] = math.fsum(g[1] for g in good) / len(good)
        if truth is not None and tag == "bbs":
            for k in ("alpha", "beta"):
                errs = [g[0][k] - truth[k] for g in good]
                rep.bias[k] = math.fsum(errs) / len(errs)
                rep.mse[k] = math.fsum(e * e for e in errs) / len(errs)
    return rep


def run_study1(scenario: Scenario, workers: Optional[int] = None) -> SimReport:
    """Bias and MSE of ``(alpha, beta)`` at known ``delta`` under random censoring."""
    if scenario.generator != "bbs":
        raise ScenarioError("study 1 needs a bbs generator")
    sc = replace(scenario, study=1, fit_targets=("bbs",))
    return _aggregate(sc, _run(sc, workers), sc.param_dict)


def run_study2(scenario: Scenario, workers: Optional[int] = None) -> SimReport:
    """Mean estimates and mean maximised log-likelihood of each fitted model."""
    if scenario.generator not in ("bs", "ln", "mxbs"):
        raise ScenarioError("study 2 needs a bs, ln or mxbs generator")
    targets = scenario.fit_targets if scenario.fit_targets != ("bbs",) else ("bbs", "bbso")
    sc = replace(scenario, study=2, fit_targets=targets)
    return _aggregate(sc, _run(sc, workers), None)


def run_scenario(scenario: Scenario, workers: Optional[int] = None) -> SimReport:
    return run_study1(scenario, workers) if scenario.study == 1 else run_study2(scenario, workers)


# ---------------------------------------------------------------------------
# scenario files
# ---------------------------------------------------------------------------


def _parse_grid(text):
    parts = text.split(":")
    try:
        if len(parts) == 2:
            lo, hi = float(parts[0]), float(parts[1])
            return ProfileGrid.from_range(lo, hi, 1.0).delta_values
        if len(parts) == 3:
            lo, step, hi = (float(x) for x in parts)
            return ProfileGrid.from_range(lo, hi, step).delta_values
        return tuple(float(x) for x in text.split(","))
    except (ValueError, DomainError) as exc:
        raise ValueError(f"bad delta grid {text!r}") from exc


def _build(fields: Dict[str, Tuple[int, str]], section: str) -> Scenario:
    def get(key, conv, default=None):
        if key not in fields:
            if default is None:
                raise ScenarioError(f"section {section or '(top)'}: missing key '{key}'")
            return default
        lineno, raw = fields[key]
        try:
            return conv(raw)
        except ValueError as exc:
            raise ScenarioError(f"line {lineno}: bad value for key '{key}': {raw!r}") from exc

    gen = get("generator", str.strip)
    if gen not in GENERATOR_KEYS:
        raise ScenarioError(f"line {fields['generator'][0]}: unknown generator {gen!r} for key 'generator'")
    params = tuple((k, get(k, float)) for k in GENERATOR_KEYS[gen])
    allowed = set(_SCALAR_KEYS) | set(GENERATOR_KEYS[gen])
    for key, (lineno, _) in fields.items():
        if key not in allowed:
            raise ScenarioError(f"line {lineno}: unknown key '{key}' for generator {gen}")
    study = get("study", int, 1 if gen == "bbs" else 2)
    targets = get("fit_targets", lambda s: tuple(x.strip() for x in s.split(",") if x.strip()),
                  ("bbs",) if study == 1 else ("bbs", "bbso"))
    return Scenario(
        generator=gen,
        params=params,
        n=get("n", int),
        censor_proportion=get("censor_proportion", float, 0.0),
        replications=get("replications", int, 1000),
        seed=get("seed", int, 1),
        fit_targets=targets,
        delta_grid=get("delta_grid", _parse_grid, tuple(float(d) for d in range(-20, 21))),
        study=study,
        censor_reference=get("censor_reference", str.strip, "empirical"),
        name=get("name", str.strip, section),
    )


def parse_scenarios(text: str) -> List[Scenario]:
    """Read ``key = value`` scenario text.

    Lines starting with ``#`` are comments.  ``[name]`` starts a new
    scenario; keys before the first header are defaults shared by all of
    them.  Errors name the offending key and line.
    """
    defaults: Dict[str, Tuple[int, str]] = {}
    sections: List[Tuple[str, Dict[str, Tuple[int, str]]]] = []
    current = defaults
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("[") and s.endswith("]"):
            current = {}
            sections.append((s[1:-1].strip(), current))
            continue
        if "=" not in s:
            raise ScenarioError(f"line {lineno}: expected key = value, got {s!r}")
        key, val = (x.strip() for x in s.split("=", 1))
        if not key:
            raise ScenarioError(f"line {lineno}: empty key")
        if key in current:
            raise ScenarioError(f"line {lineno}: duplicate key '{key}'")
        current[key] = (lineno, val)
    if not sections:
        sections = [("", {})]
    out = []
    for name, fields in sections:
        merged = {**defaults, **fields}
        try:
            out.append(_build(merged, name))
        except ScenarioError:
            raise
        except (DomainError, TypeError) as exc:
            raise ScenarioError(f"section {name or '(top)'}: {exc}") from exc
    return out


def load_scenarios(path) -> List[Scenario]:
    with open(path, encoding="utf-8") as fh:
        return parse_scenarios(fh.read())
