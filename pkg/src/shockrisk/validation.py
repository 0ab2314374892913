"""Invariant suites run by ``shockrisk validate``.

Each suite returns a SuiteResult with the worst observed discrepancy and
the bound it was held to. Suites are deterministic, including the Monte
Carlo one, which uses a fixed seed.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from . import analytic, closed_forms
from .analytic import Model, Rates
from .schemes import Scheme, derived_risky_set, in_failure_set, in_risky_set
from .simulator import SimConfig, run as run_simulation, z_score
from .special import partial_exp_sum, tail_exp_sum, two_index_bessel_m
from .thresholds import (
    DIVERGENT,
    Deterministic,
    Geometric,
    Harmonic,
    NegBinomial2,
    ShiftedPoisson,
)

STANDARD_RATES = Rates(1.0, 2.0)
STANDARD_TIMES = (0.1, 0.5, 1.0, 2.0, 5.0)


def standard_thresholds():
    return [Geometric(0.3), ShiftedPoisson(2.0), Harmonic(), NegBinomial2(0.4), Deterministic(3)]


def light_tailed_thresholds():
    return [Geometric(0.3), ShiftedPoisson(2.0), NegBinomial2(0.4), Deterministic(3)]


@dataclass
class SuiteResult:
    name: str
    passed: bool
    worst: float
    bound: float
    checks: int
    seconds: float = 0.0
    detail: str = ""


class _Tracker:
    def __init__(self, name, bound):
        self.name, self.bound = name, bound
        self.worst, self.checks, self.where = 0.0, 0, ""
        self.failed = False

    def check(self, err, where=""):
        self.checks += 1
        if not err <= self.bound:  # also catches nan
            self.failed = True
        if err > self.worst or math.isnan(err):
            self.worst, self.where = err, where

    def result(self):
        return SuiteResult(self.name, not self.failed and self.checks > 0,
                           self.worst, self.bound, self.checks, detail=self.where)


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300) if b else abs(a)


def exp_sum_identity(kmax=50, xs=np.linspace(0.0, 20.0, 41)):
    tr = _Tracker("exp_sum_identity", 1e-12)
    for k in range(kmax + 1):
        for x in xs:
            x = float(x)
            tr.check(_rel(partial_exp_sum(k, x) + tail_exp_sum(k, x), math.exp(x)), f"k={k} x={x}")
    return tr.result()


def generating_identity(xs=(0.5, 1.0, 2.0), params=(0.5, 1.0), n_max=60):
    """sum over n, m in Z of a^n b^m M_{n,m}(x) = exp{x (a + b + 1/(a b))}."""
    tr = _Tracker("bessel_generating_identity", 1e-8)
    idx = range(-n_max, n_max + 1)
    for x in xs:
        table = {(n, m): two_index_bessel_m(n, m, x) for n in idx for m in idx}
        for a in params:
            for b in params:
                s = math.fsum(a**n * b**m * v for (n, m), v in table.items())
                tr.check(_rel(s, math.exp(x * (a + b + 1.0 / (a * b)))), f"x={x} a={a} b={b}")
    return tr.result()


def threshold_normalization():
    tr = _Tracker("threshold_normalization", 1e-12)
    for d in standard_thresholds():
        kmax = d.bounded_truncation_index(1e-12, 10_000)
        total = math.fsum(d.pmf(k) for k in range(1, kmax + 1)) + d.survival(kmax)
        tr.check(abs(total - 1.0), d.name)
    return tr.result()


def risky_set_equivalence(kmax=12, bound=25):
    tr = _Tracker("risky_set_equivalence", 0.0)
    for scheme in Scheme:
        for x1 in range(bound + 1):
            for x2 in range(bound + 1):
                owners = [k for k in range(2 * bound + 2) if in_failure_set(scheme, k, (x1, x2))]
                tr.check(float(len(owners) != 1), f"{scheme.value} partition at {(x1, x2)}")
                for k in range(1, kmax + 1):
                    for i in (1, 2):
                        same = in_risky_set(scheme, k, i, (x1, x2)) == derived_risky_set(scheme, k, i, (x1, x2))
                        tr.check(float(not same), f"{scheme.value} k={k} i={i} {(x1, x2)}")
    return tr.result()


def closed_vs_series(rates=STANDARD_RATES, times=STANDARD_TIMES):
    tr = _Tracker("closed_vs_series", 1e-9)
    for scheme in Scheme:
        for d in standard_thresholds():
            m = Model(rates, scheme, d)
            for t in times:
                where = f"{scheme.value} {d.name} t={t}"
                for i in (1, 2):
                    tr.check(_rel(closed_forms.subdensity(scheme, rates, d, i, t),
                                  analytic.subdensity(m, i, t)), where + f" f{i}")
                tr.check(_rel(closed_forms.survival(scheme, rates, d, t),
                              analytic.survival(m, t)), where + " survival")
    return tr.result()


def proposition_independence(rates=STANDARD_RATES, times=np.linspace(0.05, 5.0, 50)):
    tr = _Tracker("sum_independence", 1e-10)
    for d in standard_thresholds()[:4]:
        m = Model(rates, Scheme.SUM, d)
        deltas = [analytic.delta_probability(m, i) for i in (1, 2)]
        for i, di in zip((1, 2), deltas):
            tr.check(abs(di - rates.rate(i) / rates.total), f"{d.name} delta{i}")
        for t in times:
            t = float(t)
            fs = [analytic.subdensity(m, i, t) for i in (1, 2)]
            for i in (0, 1):
                tr.check(abs(fs[i] - deltas[i] * sum(fs)), f"{d.name} t={t:g}")
    return tr.result()


def min_max_complementarity(rates=STANDARD_RATES, times=STANDARD_TIMES):
    tr = _Tracker("min_max_complementarity", 1e-10)
    for d in standard_thresholds():
        for t in times:
            for i in (1, 2):
                lhs = closed_forms.min_subdensity(rates, d, i, t) + closed_forms.max_subdensity(rates, d, i, t)
                rhs = closed_forms.single_stream_subdensity(rates.rate(i), d, t)
                tr.check(abs(lhs - rhs), f"{d.name} t={t} f{i}")
            lhs = closed_forms.min_survival(rates, d, t) + closed_forms.max_survival(rates, d, t)
            rhs = sum(closed_forms.single_stream_survival(rates.rate(i), d, t) for i in (1, 2))
            tr.check(abs(lhs - rhs), f"{d.name} t={t} survival")
    return tr.result()


def cause_probability_sum(rates=STANDARD_RATES):
    tr = _Tracker("cause_probability_sum", 10 * 1e-12)
    for scheme in Scheme:
        for d in standard_thresholds():
            m = Model(rates, scheme, d)
            tr.check(abs(analytic.delta_probability(m, 1) + analytic.delta_probability(m, 2) - 1.0),
                     f"{scheme.value} {d.name}")
    return tr.result()


def horizon(scheme, rates, d, level=1e-10):
    """A time t with survival(t) < level."""
    t = 1.0
    while closed_forms.survival(scheme, rates, d, t) >= level:
        t *= 2.0
    return t


def density_normalization(rates=STANDARD_RATES):
    tr = _Tracker("density_normalization", 1e-6)
    for scheme in Scheme:
        for d in light_tailed_thresholds():
            def f(t):
                return sum(closed_forms.subdensity(scheme, rates, d, i, t) for i in (1, 2))
            end = horizon(scheme, rates, d)
            area, _ = integrate.quad(f, 0.0, end, limit=200, epsabs=1e-12, epsrel=1e-10)
            tr.check(abs(area - 1.0), f"{scheme.value} {d.name}")
    return tr.result()


def survival_shape(rates=STANDARD_RATES, grid=np.linspace(0.0, 8.0, 81)):
    tr = _Tracker("survival_shape", 0.0)
    for scheme in Scheme:
        for d in standard_thresholds():
            m = Model(rates, scheme, d)
            tr.check(float(analytic.survival(m, 0.0) != 1.0), f"{scheme.value} {d.name} at 0")
            values = [analytic.survival(m, float(t)) for t in grid]
            rises = max(b - a for a, b in zip(values, values[1:]))
            tr.check(max(rises, 0.0), f"{scheme.value} {d.name} monotone")
    return tr.result()


def survival_density_consistency(rates=STANDARD_RATES, grid=(0.3, 0.8, 1.5, 3.0), h=1e-4):
    tr = _Tracker("survival_density_consistency", 1e-5)
    for scheme in Scheme:
        for d in standard_thresholds():
            m = Model(rates, scheme, d)
            for t in grid:
                slope = -(analytic.survival(m, t + h) - analytic.survival(m, t - h)) / (2 * h)
                tr.check(abs(slope - analytic.total_density(m, t)), f"{scheme.value} {d.name} t={t}")
    return tr.result()


def sum_moments():
    tr = _Tracker("sum_moments", 1e-9)
    m = Model(Rates(1.0, 1.0), Scheme.SUM, Geometric(0.5))
    for s, want in ((1, 1.0), (2, 2.0)):
        got = [analytic.conditional_moment(m, i, s) for i in (1, 2)]
        for g in got:
            tr.check(abs(g - want), f"s={s}")
        tr.check(abs(got[0] - got[1]), f"s={s} cause symmetry")
    harmonic = Model(Rates(1.0, 1.0), Scheme.SUM, Harmonic())
    for i in (1, 2):
        tr.check(0.0 if analytic.conditional_moment(harmonic, i, 1) == DIVERGENT else math.inf,
                 f"harmonic cause {i} divergent")
    return tr.result()


def clt_trend(lam_t0=1.0, hs=(25, 100, 400), noise=0.005):
    tr = _Tracker("clt_error_trend", noise)
    d = Geometric(0.5)
    errs = []
    for h in hs:
        lam = lam_t0 / h
        errs.append(abs(closed_forms.clt_survival(h, lam, d, 1.0) - closed_forms.superposed_survival(h, lam, d, 1.0)))
    for a, b in zip(errs, errs[1:]):
        tr.check(max(b - a, 0.0), f"errors {errs}")
    return tr.result()


def simulation_agreement(samples=20_000, seed=2024, z_bound=4.0):
    """Monte Carlo agreement on a reduced matrix, at a 4-sigma bound."""
    tr = _Tracker("simulation_agreement", z_bound)
    grid = [0.25, 0.5, 1.0, 2.0]
    for scheme in Scheme:
        for d in (Geometric(0.3), Deterministic(3)):
            m = Model(STANDARD_RATES, scheme, d)
            summ = run_simulation(m, SimConfig(samples=samples, seed=seed), grid)
            tr.check(0.0 if summ.inconsistent_count == 0 else math.inf, f"{scheme.value} {d.name} consistency")
            for t, s, se in zip(grid, summ.survival, summ.survival_se):
                tr.check(z_score(s, analytic.survival(m, t), se, samples), f"{scheme.value} {d.name} S({t})")
            for i in (1, 2):
                tr.check(z_score(summ.delta_hat[i - 1], analytic.delta_probability(m, i), summ.delta_se[i - 1], samples),
                         f"{scheme.value} {d.name} delta{i}")
    return tr.result()



SUITES = (
    exp_sum_identity,
    generating_identity,
    threshold_normalization,
    risky_set_equivalence,
    closed_vs_series,
    proposition_independence,
    min_max_complementarity,
    cause_probability_sum,
    density_normalization,
    survival_shape,
    survival_density_consistency,
    sum_moments,
    clt_trend,
    simulation_agreement,
)


def run_all(suites=SUITES) -> list[SuiteResult]:
    results = []
    for suite in suites:
        start = time.perf_counter()
        res = suite()
        res.seconds = time.perf_counter() - start
        results.append(res)
    return results


def report(results: list[SuiteResult]) -> dict:
    return {
        "passed": all(r.passed for r in results),
        "suites": [asdict(r) for r in results],
    }
