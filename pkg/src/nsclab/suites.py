"""Verification suites for the monotonicity, continuity and recovery properties of gamma.

Scales are pinned in ``suites.json``. Each suite runs independent trials
(optionally on a process pool), collects one margin per check and trial,
and reduces them with order-insensitive min/max so the report does not
depend on scheduling.
"""
from __future__ import annotations

import json
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from functools import partial
from importlib import resources

import numpy as np

from .derived import k_star, staircase
from .matgen import derive_seed, gaussian
from .parallel import pmap
from .nsc import NscConfig, NscQuery, Prepared, Status, nsc_estimate, nsc_exact_d1, nsc_exact_l1_enum
from .recovery import IrlsConfig, failure_witness, recovery_experiment

COUNTEREXAMPLE = np.array([[1.0, 1.0], [1.0, 1.0]]) / math.sqrt(2.0)
EQUAL_MAGNITUDE = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])  # ker = span([1, 1, -1])


def load_scales() -> dict:
    return json.loads(resources.files("nsclab").joinpath("suites.json").read_text())


@dataclass
class VerificationReport:
    suite: str
    trials: int = 0
    checks: dict = field(default_factory=dict)  # name -> {"passed": bool, "worst": float}
    statuses: Counter = field(default_factory=Counter)
    margins: list = field(default_factory=list)
    seconds: float = 0.0

    def record(self, name: str, passed: bool, margin: float, trial=None):
        c = self.checks.setdefault(name, {"passed": True, "worst": math.inf, "failed_trials": []})
        c["passed"] = c["passed"] and bool(passed)
        c["worst"] = min(c["worst"], float(margin))
        if not passed and trial is not None:
            c["failed_trials"].append(trial)
        self.margins.append({"suite": self.suite, "check": name, "trial": trial, "margin": float(margin),
                             "passed": bool(passed)})

    def merge(self, trial_out: dict):
        t = trial_out.get("trial")
        for name, (ok, margin) in trial_out["checks"].items():
            self.record(name, ok, margin, t)
        self.statuses.update(trial_out.get("statuses", {}))
        self.trials += 1

    @property
    def failures(self) -> list:
        return [n for n, c in self.checks.items() if not c["passed"]]

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> dict:
        return {"suite": self.suite, "trials": self.trials, "passed": self.passed,
                "checks": {n: {"passed": c["passed"], "worst_margin": c["worst"]} for n, c in self.checks.items()},
                "statuses": dict(self.statuses), "seconds": round(self.seconds, 3)}


def _add(checks, name, ok, margin):
    prev = checks.get(name)
    if prev is None:
        checks[name] = (bool(ok), float(margin))
    else:
        checks[name] = (prev[0] and bool(ok), min(prev[1], float(margin)))


def _matrix(suite, seed, t, shape, normalize=False):
    return gaussian(shape[0], shape[1], derive_seed(seed, suite, t), normalize).data


# -- per-trial workers (top level so they pickle) --------------------------------

def _trial_l0(args, seed, cfg, config):
    t, shape = args
    A = _matrix("l0:%dx%d" % tuple(shape), seed, t, shape)
    prep = Prepared.from_matrix(A, config.rank_tol)
    checks, st = {}, Counter()
    _add(checks, "spark_is_M+1", prep.spark.spark == shape[0] + 1, -abs(prep.spark.spark - shape[0] - 1))
    L = prep.spark.L
    for k in cfg["ks"]:
        est = nsc_estimate(A, NscQuery(0.0, k), config, prep)
        st[est.status.value] += 1
        target = k / (shape[0] + 1 - k)
        _add(checks, "closed_form_k/(L+1-k)", est.value == target and est.status is Status.EXACT,
             -abs(est.value - target))
    est = nsc_estimate(A, NscQuery(0.0, cfg["k_inf"]), config, prep)
    st[est.status.value] += 1
    _add(checks, "infinite_at_k=spark", est.status is Status.INFINITE and cfg["k_inf"] == L + 1, 0.0)
    return {"trial": f"{shape[0]}x{shape[1]}#{t}", "checks": checks, "statuses": st}


def _trial_d1(args, seed, cfg, config):
    t, M = args
    A = _matrix(f"d1:{M}", seed, t, (M, M + 1))
    prep = Prepared.from_matrix(A, config.rank_tol)
    forced = NscConfig(**{**config.__dict__, "force": "multistart"})
    checks, st = {}, Counter()
    for p in np.linspace(0.0, 1.0, cfg["p_points"]):
        for k in cfg["ks"]:
            closed = nsc_exact_d1(prep.basis, float(p), k)
            est = nsc_estimate(A, NscQuery(float(p), k), forced, prep)
            st[est.status.value] += 1
            err = abs(est.value - closed.value)
            _add(checks, "multistart_vs_closed_form", err <= cfg["tol"], cfg["tol"] - err)
    return {"trial": f"{M}x{M + 1}#{t}", "checks": checks, "statuses": st}


def _curve(A, prep, ps, k, config):
    ests = [nsc_estimate(A, NscQuery(float(p), k), config, prep) for p in ps]
    return np.array([e.value for e in ests]), Counter(e.status.value for e in ests)


def _trial_thm1(t, seed, cfg, config):
    shape = cfg["shape"]
    A = _matrix("thm1", seed, t, shape)
    prep = Prepared.from_matrix(A, config.rank_tol)
    checks, st = {}, Counter()
    ks = sorted(set(cfg["ks"]) | {k + 1 for k in cfg["ks"]})
    for p in cfg["ps"]:
        vals = {}
        for k in ks:
            est = nsc_estimate(A, NscQuery(float(p), k), config, prep)
            st[est.status.value] += 1
            _add(checks, "exact_status", est.status is Status.EXACT, 0.0 if est.status is Status.EXACT else -1.0)
            vals[k] = est.value
        for k in cfg["ks"]:
            gap = vals[k + 1] - vals[k]
            _add(checks, "strict_increase_in_k", gap > 0, gap)
    return {"trial": t, "checks": checks, "statuses": st}


def _trial_thm2(t, seed, cfg, config):
    A = _matrix("thm1", seed, t, cfg["shape"])  # same fixtures as the k-monotonicity suite
    prep = Prepared.from_matrix(A, config.rank_tol)
    step = cfg["step"]
    n = int(round(1.0 / step))
    ps = np.linspace(0.0, 1.0, n + 1)
    checks, st = {}, Counter()
    for k in cfg["ks"]:
        g, s = _curve(A, prep, ps, k, config)
        st.update(s)
        drop = float(np.min(np.diff(g)))
        _add(checks, "non_decreasing_in_p", drop >= -cfg["mono_tol"], drop + cfg["mono_tol"])
        mods = []
        for delta in cfg["deltas"]:
            sh = int(round(delta / step))
            mods.append(float(np.max(np.abs(g[sh:] - g[:-sh]))))
        worst = min(a - b for a, b in zip(mods[:-1], mods[1:]))
        _add(checks, "modulus_non_increasing", worst >= 0.0, worst)
    return {"trial": t, "checks": checks, "statuses": st}


def _trial_thm3(t, seed, cfg, config):
    A = _matrix("thm3", seed, t, cfg["shape"])
    prep = Prepared.from_matrix(A, config.rank_tol)
    ps = np.linspace(0.0, 1.0, cfg["p_points"])
    checks, st = {}, Counter()
    for k in cfg["ks"]:
        g, s = _curve(A, prep, ps, k, config)
        st.update(s)
        _add(checks, "exact_status", s.get(Status.EXACT.value, 0) == len(ps), 0.0)
        d = float(np.min(np.diff(g)))
        _add(checks, "strict_increase_in_p", d > cfg["min_step"], d - cfg["min_step"])
        rise = g[-1] - g[0]
        _add(checks, "gamma1_minus_gamma0", rise > cfg["min_rise"], rise - cfg["min_rise"])
    return {"trial": t, "checks": checks, "statuses": st}


def _trial_staircase(t, seed, cfg, config):
    A = _matrix("staircase", seed, t, cfg["shape"])
    prep = Prepared.from_matrix(A, config.rank_tol)
    sc = staircase(A, np.linspace(0.0, 1.0, cfg["p_points"]), config=config, prepared=prep)
    checks = {}
    L = prep.spark.L
    _add(checks, "starts_at_floor(L/2)", sc.values[0] == L // 2, -abs(int(sc.values[0]) - L // 2))
    inc = int(np.max(np.diff(sc.values), initial=0))
    _add(checks, "non_increasing", inc <= 0, -inc)
    bad = [j.drop for j in sc.jumps if j.drop != 1]
    _add(checks, "unit_drops", not bad, -len(bad))
    return {"trial": t, "checks": checks, "statuses": sc.statuses}


def _trial_remark3(t, seed, cfg, config):
    A = _matrix("remark3", seed, t, cfg["shape"], normalize=True)
    prep = Prepared.from_matrix(A, config.rank_tol)
    checks = {}
    _add(checks, "spark_at_least_3", prep.spark.spark >= 3, prep.spark.spark - 3)
    est = nsc_estimate(A, NscQuery(1.0, 1), config, prep)
    _add(checks, "gamma_l1_k1_below_1", est.value < 1.0, 1.0 - est.value)
    return {"trial": t, "checks": checks, "statuses": Counter([est.status.value])}


def _trial_l1exact(t, seed, cfg, config):
    A = _matrix("thm1", seed, t, cfg["shape"])
    prep = Prepared.from_matrix(A, config.rank_tol)
    forced = NscConfig(**{**config.__dict__, "force": "multistart"})
    checks, st = {}, Counter()
    for k in cfg["ks"]:
        exact = nsc_exact_l1_enum(prep.basis, k)
        est = nsc_estimate(A, NscQuery(1.0, k), forced, prep)
        st[exact.status.value] += 1
        st[est.status.value] += 1
        err = abs(est.value - exact.value)
        _add(checks, "multistart_matches_lp", err <= cfg["tol"], cfg["tol"] - err)
        slack = cfg["sound_slack"] * max(1.0, exact.value)
        _add(checks, "estimator_below_exact", est.value <= exact.value + slack, exact.value + slack - est.value)
    return {"trial": t, "checks": checks, "statuses": st}


# -- suites ---------------------------------------------------------------------

def _run(name, worker, items, seed, cfg, config, jobs):
    rep = VerificationReport(name)
    t0 = time.perf_counter()
    for out in pmap(partial(worker, seed=seed, cfg=cfg, config=config), items, jobs):
        rep.merge(out)
    rep.seconds = time.perf_counter() - t0
    if "seconds" in cfg:
        rep.record("runtime_budget", rep.seconds < cfg["seconds"], cfg["seconds"] - rep.seconds)
    return rep


def suite_l0(cfg, seed=1, config=NscConfig(), jobs=1, trials=None):
    n = trials or cfg["trials"]
    items = [(t, s) for s in cfg["shapes"] for t in range(n)]
    return _run("l0", _trial_l0, items, seed, cfg, config, jobs)


def suite_d1(cfg, seed=1, config=NscConfig(), jobs=1, trials=None):
    n = trials or cfg["trials"]
    items = [(t, M) for M in cfg["ms"] for t in range(n)]
    return _run("d1", _trial_d1, items, seed, cfg, config, jobs)


def suite_counterexample(cfg, seed=1, config=NscConfig(), jobs=1, trials=None):
    rep = VerificationReport("counterexample")
    t0 = time.perf_counter()
    prep = Prepared.from_matrix(COUNTEREXAMPLE, config.rank_tol)
    for p in np.linspace(0.0, 1.0, cfg["p_points"]):
        est = nsc_estimate(COUNTEREXAMPLE, NscQuery(float(p), 1), config, prep)
        rep.statuses[est.status.value] += 1
        err = abs(est.value - 1.0)
        rep.record("gamma_equals_1", err <= cfg["tol"], cfg["tol"] - err, float(p))
        ks = k_star(COUNTEREXAMPLE, float(p), config=config, prepared=prep)
        rep.record("k_star_zero", ks == 0, -ks, float(p))
    rep.trials = cfg["p_points"]
    rep.seconds = time.perf_counter() - t0
    rep.record("runtime_budget", rep.seconds < cfg["seconds"], cfg["seconds"] - rep.seconds)
    return rep


def suite_thm1(cfg, seed=1, config=NscConfig(), jobs=1, trials=None):
    return _run("thm1", _trial_thm1, range(trials or cfg["trials"]), seed, cfg, config, jobs)


def suite_thm2(cfg, seed=1, config=NscConfig(), jobs=1, trials=None):
    return _run("thm2", _trial_thm2, range(trials or cfg["trials"]), seed, cfg, config, jobs)


def suite_thm3(cfg, seed=1, config=NscConfig(), jobs=1, trials=None):
    rep = _run("thm3", _trial_thm3, range(trials or cfg["trials"]), seed, cfg, config, jobs)
    prep = Prepared.from_matrix(EQUAL_MAGNITUDE, config.rank_tol)
    for k in (1, 2):
        g, _ = _curve(EQUAL_MAGNITUDE, prep, np.linspace(0.0, 1.0, cfg["p_points"]), k, config)
        spread = float(g.max() - g.min())
        rep.record("equal_magnitude_constant_in_p", spread <= 1e-12, 1e-12 - spread, f"k={k}")
    return rep


def suite_staircase(cfg, seed=1, config=NscConfig(), jobs=1, trials=None):
    return _run("staircase", _trial_staircase, range(trials or cfg["trials"]), seed, cfg, config, jobs)


def suite_remark3(cfg, seed=1, config=NscConfig(), jobs=1, trials=None):
    return _run("remark3", _trial_remark3, range(trials or cfg["trials"]), seed, cfg, config, jobs)


def suite_l1exact(cfg, seed=1, config=NscConfig(), jobs=1, trials=None):
    return _run("l1exact", _trial_l1exact, range(trials or cfg["trials"]), seed, cfg, config, jobs)


def recovery_fixtures(cfg, seed=1, config=NscConfig(), max_candidates=500):
    """First fixtures (in seed order) meeting the success and failure criteria."""
    success, failure = [], []
    for j in range(max_candidates):
        if len(success) >= cfg["fixtures"]:
            break
        A = _matrix("recovery-success", seed, j, cfg["success_shape"], normalize=True)
        est = nsc_estimate(A, NscQuery(1.0, cfg["success_k"]), config)
        if est.status is Status.EXACT and est.value <= cfg["gamma_max"]:
            success.append((j, A, est))
    for j in range(max_candidates):
        if len(failure) >= cfg["fixtures"]:
            break
        p = cfg["failure_ps"][j % len(cfg["failure_ps"])]
        A = _matrix("recovery-failure", seed, j, cfg["failure_shape"])
        est = nsc_estimate(A, NscQuery(p, cfg["failure_k"]), config)
        if est.finite and est.certificate.theta_value >= cfg["theta_min"]:
            failure.append((j, A, p, est))
    return success, failure


def suite_recovery(cfg, seed=1, config=NscConfig(), jobs=1, trials=None):
    rep = VerificationReport("recovery")
    t0 = time.perf_counter()
    success, failure = recovery_fixtures(cfg, seed, config)
    rep.record("enough_success_fixtures", len(success) == cfg["fixtures"], len(success) - cfg["fixtures"])
    rep.record("enough_failure_fixtures", len(failure) == cfg["fixtures"], len(failure) - cfg["fixtures"])
    icfg = IrlsConfig(recover_tol=cfg["recover_tol"])
    for j, A, est in success:
        r = recovery_experiment(A, cfg["success_k"], 1.0, seed=derive_seed(seed, "signals", j), config=icfg,
                                supports="all", draws=cfg["draws"])
        worst = max(t["error"] for t in r.trials)
        rep.record("irls_recovers_all", r.rate == 1.0, cfg["recover_tol"] - worst, j)
        rep.statuses[est.status.value] += 1
    for j, A, p, est in failure:
        w = failure_witness(A, est.certificate, p)
        gap = w.objective_true - w.objective_alt
        rep.record("witness_strictly_better", gap > 0, gap, j)
        same = float(np.linalg.norm(A @ w.x_alt - w.instance.y))
        rep.record("witness_feasible", same <= 1e-10, 1e-10 - same, j)
        rep.statuses[est.status.value] += 1
    rep.trials = len(success) + len(failure)
    rep.seconds = time.perf_counter() - t0
    rep.record("runtime_budget", rep.seconds < cfg["seconds"], cfg["seconds"] - rep.seconds)
    return rep


SUITES = {
    "l0": suite_l0,
    "d1": suite_d1,
    "counterexample": suite_counterexample,
    "thm1": suite_thm1,
    "thm2": suite_thm2,
    "thm3": suite_thm3,
    "recovery": suite_recovery,
    "staircase": suite_staircase,
    "remark3": suite_remark3,
    "l1exact": suite_l1exact,
}


def run_suite(name, seed=1, config=NscConfig(), jobs=1, trials=None, scales=None) -> VerificationReport:
    scales = scales or load_scales()
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](scales[name], seed=seed, config=config, jobs=jobs, trials=trials)
