"""Closed-form fast paths for the sum, min and max schemes.

Each quantity reduces to a single series over the threshold index k,
with the inner lattice sums collapsed by the binomial theorem (sum scheme)
or into partial/tail exponential sums (min and max schemes). For the
concrete threshold families, tabulated Bessel-type expressions are used
where they have been checked against the single series; see
``TABLE_FAST_PATHS``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .analytic import Rates
from .special import (
    NonConvergenceError,
    bessel_i,
    poisson_head,
    poisson_tail,
    two_index_bessel_m,
)
from .thresholds import (
    DIVERGENT,
    Geometric,
    Harmonic,
    NegBinomial2,
    ShiftedPoisson,
    ThresholdDistribution,
)

DEFAULT_TOL = 1e-12
_MAX_TERMS = 100_000
# beyond this exponent scale the Bessel forms overflow; use the plain series
_EXP_LIMIT = 600.0

#: Tabulated expressions that passed the agreement check against the
#: single series and are therefore dispatched.
TABLE_FAST_PATHS = {
    ("sum", "geometric"), ("sum", "poisson1"), ("sum", "harmonic"), ("sum", "negbinom2"),
    ("min_subdensity", "geometric"), ("min_subdensity", "poisson1"),
    ("min_subdensity", "harmonic"),
    ("min_survival", "geometric"), ("min_survival", "harmonic"),
}


def _check(i=None, t=0.0):
    if i is not None and i not in (1, 2):
        raise ValueError(f"cause index must be 1 or 2, got {i}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")


def _cap(mu: float) -> int:
    return math.ceil(mu + 12.0 * math.sqrt(mu) + 30.0)


def _poisson_pmf(mu: float, n: int) -> np.ndarray:
    """Poisson(mu) pmf at 0..n."""
    x = np.arange(n + 1)
    if mu == 0:
        return (x == 0).astype(float)
    return np.exp(x * math.log(mu) - mu - gammaln(x + 1))


def _truncated(d: ThresholdDistribution, tol: float, lattice_end: int, evaluate) -> float:
    """evaluate(kmax) with kmax chosen so that P(M > kmax) < tol * value.

    Every inner factor is a probability, so the dropped remainder is at
    most P(M > kmax).
    """
    kmax = d.bounded_truncation_index(tol, lattice_end)
    value = evaluate(kmax)
    if kmax < lattice_end and 0.0 < value < 1.0 and d.survival(kmax) >= tol * value:
        kmax = d.bounded_truncation_index(tol * value, lattice_end)
        value = evaluate(kmax)
    return value


def _table(kind: str, d: ThresholdDistribution) -> bool:
    return (kind, d.name) in TABLE_FAST_PATHS


def _sum_bessel_terms(term, tol, what):
    """Sum term(n) for n = 0, 1, ... until the terms fall below tol."""
    total = 0.0
    prev = math.inf
    for n in range(_MAX_TERMS):
        v = term(n)
        total += v
        if v <= prev and v <= tol * total:
            return total
        prev = v
    raise NonConvergenceError(f"{what}: no convergence in {_MAX_TERMS} terms", partial=total)


# ----------------------------------------------------------------- sum scheme


def _first_passage_density(total_rate: float, d: ThresholdDistribution, t: float,
                           tol: float) -> float:
    """Density of the M-th arrival of a Poisson(total_rate) stream."""
    tau = total_rate * t
    if _table("sum", d):
        p = getattr(d, "p", None)
        if isinstance(d, Geometric):
            return p * total_rate * math.exp(-p * tau)
        if isinstance(d, NegBinomial2):
            return total_rate * p * p * (1.0 + (1.0 - p) * tau) * math.exp(-p * tau)
        if isinstance(d, ShiftedPoisson) and 2 * math.sqrt(d.eta * tau) < _EXP_LIMIT:
            return total_rate * math.exp(-d.eta - tau) * bessel_i(0, 2 * math.sqrt(d.eta * tau))
        if isinstance(d, Harmonic) and tau >= 0.05:
            # 1 - e^{-tau}(1 + tau) cancels badly for small tau
            return total_rate / tau**2 * (-math.expm1(-tau) - tau * math.exp(-tau))
    def evaluate(kmax):
        pois = _poisson_pmf(tau, kmax)
        return float(np.dot(d.pmf_table(kmax)[1:], pois[:-1]))

    return total_rate * _truncated(d, tol, _cap(tau) + 1, evaluate)


def sum_subdensity(r: Rates, d: ThresholdDistribution, i: int, t: float,
                   tol: float = DEFAULT_TOL) -> float:
    """lambda_i e^{-tau} sum_k p_k tau^(k-1)/(k-1)!, tau = (lambda1 + lambda2) t."""
    _check(i, t)
    return r.rate(i) / r.total * _first_passage_density(r.total, d, t, tol)


def _sum_survival_total(total_rate: float, d: ThresholdDistribution, t: float,
                        tol: float = DEFAULT_TOL) -> float:
    tau = total_rate * t
    if tau == 0:
        return 1.0
    if _table("sum", d):
        if isinstance(d, Geometric):
            return math.exp(-d.p * tau)
        if isinstance(d, NegBinomial2):
            return math.exp(-d.p * tau) * (1.0 + d.p * (1.0 - d.p) * tau)
        if isinstance(d, Harmonic):
            return -math.expm1(-tau) / tau
        if isinstance(d, ShiftedPoisson) and 2 * math.sqrt(d.eta * tau) < _EXP_LIMIT:
            z = 2 * math.sqrt(d.eta * tau)
            log_ratio = 0.5 * math.log(d.eta / tau)

            def term(n):
                b = bessel_i(n, z)
                return math.exp(n * log_ratio + math.log(b)) if b > 0 else 0.0

            return math.exp(-d.eta - tau) * _sum_bessel_terms(term, tol, "sum survival (ii)")
    def evaluate(kmax):
        return float(np.dot(d.survival_table(kmax), _poisson_pmf(tau, kmax)))

    return min(1.0, _truncated(d, tol, _cap(tau), evaluate))


def sum_survival(r: Rates, d: ThresholdDistribution, t: float,
                 tol: float = DEFAULT_TOL) -> float:
    """e^{-tau} sum_k P(M > k) tau^k / k!."""
    _check(t=t)
    return _sum_survival_total(r.total, d, t, tol)


def sum_conditional_moment(r: Rates, d: ThresholdDistribution, s: int) -> float:
    """E(T^s | delta = i), the same for both causes."""
    fm = d.factorial_moment(s)
    if fm == DIVERGENT:
        return DIVERGENT
    return fm / r.total**s


# ----------------------------------------------------------------- min scheme


def _min_table_subdensity(r: Rates, d, i: int, t: float, tol: float):
    lam, other = r.rate(i), r.other(i)
    tau = r.total * t
    if tau > _EXP_LIMIT:
        return None
    if isinstance(d, Geometric):
        q = 1.0 - d.p
        if q == 0.0:
            return None
        alpha_t = 2.0 * math.sqrt(q * r.lambda1 * r.lambda2) * t
        log_ratio = math.log(other / (q * lam))

        def term(n):
            b = bessel_i(n + 1, alpha_t)
            return math.exp(0.5 * (n + 1) * log_ratio + math.log(b)) if b > 0 else 0.0

        return d.p * lam * math.exp(-tau) * _sum_bessel_terms(term, tol, "min f (i)")
    if isinstance(d, ShiftedPoisson):
        beta = (d.eta * r.lambda1 * r.lambda2 * t * t) ** (1.0 / 3.0)
        log_ratio = math.log(other * t / beta)

        def term(n):
            m = two_index_bessel_m(0, n + 1, beta)
            return math.exp((n + 1) * log_ratio + math.log(m)) if m > 0 else 0.0

        return lam * math.exp(-d.eta - tau) * _sum_bessel_terms(term, tol, "min f (ii)")
    if isinstance(d, Harmonic):
        if t < 0.05:
            return None
        z = 2.0 * t * math.sqrt(r.lambda1 * r.lambda2)
        a, b = lam * t, other * t
        log_ratio = 0.5 * math.log(other / lam)

        def bracket(n):
            # (b/a)^{n/2} I_n(z) minus its first two power-series terms
            v = math.exp(n * log_ratio) * bessel_i(n, z)
            head = math.exp(n * math.log(b) - math.lgamma(n + 1)) * (1.0 + a * b / (n + 1))
            return v - head

        total = _sum_bessel_terms(bracket, tol, "min f (iii)")
        inner = math.sqrt(lam / other) * bessel_i(1, z) - a + total
        return math.exp(-tau) / (lam * t * t) * inner
    return None


def min_subdensity(r: Rates, d: ThresholdDistribution, i: int, t: float,
                   tol: float = DEFAULT_TOL, use_table: bool = True) -> float:
    """lambda_i e^{-tau} sum_k p_k (lambda_i t)^(k-1)/(k-1)! Ebar_k(lambda_j t)."""
    _check(i, t)
    if t == 0:
        return 0.0
    if use_table and _table("min_subdensity", d):
        v = _min_table_subdensity(r, d, i, t, tol)
        if v is not None:
            return v
    lam, other = r.rate(i), r.other(i)
    def evaluate(kmax):
        pois = _poisson_pmf(lam * t, kmax)
        total = 0.0
        for k in range(1, kmax + 1):
            pk = d.pmf(k)
            if pk:
                total += pk * pois[k - 1] * poisson_tail(k, other * t)
        return total

    return lam * _truncated(d, tol, min(_cap(lam * t) + 1, _cap(other * t)), evaluate)


def _min_table_survival(r: Rates, d, t: float, tol: float):
    tau = r.total * t
    if tau > _EXP_LIMIT:
        return None
    l1, l2 = r.lambda1, r.lambda2
    if isinstance(d, Geometric):
        q = 1.0 - d.p
        if q == 0.0:
            return None
        alpha_t = 2.0 * math.sqrt(q * l1 * l2) * t
        lr1 = 0.5 * math.log(l1 / (q * l2))
        lr2 = 0.5 * math.log(l2 / (q * l1))

        def term(n):
            b0, b1 = bessel_i(n, alpha_t), bessel_i(n + 1, alpha_t)
            v = math.exp(n * lr1 + math.log(b0)) if b0 > 0 else 0.0
            w = math.exp((n + 1) * lr2 + math.log(b1)) if b1 > 0 else 0.0
            return v + w

        return math.exp(-tau) * _sum_bessel_terms(term, tol, "min survival (i)")
    if isinstance(d, Harmonic):
        if t < 0.05:
            return None
        z = 2.0 * t * math.sqrt(l1 * l2)
        g = math.sqrt(l1 * l2)

        def term(j):
            b = bessel_i(j, z)
            if b == 0:
                return 0.0
            return b * ((l1 / g) ** j * l1 + (l2 / g) ** j * l2) / (l1 * l2)

        series = _sum_bessel_terms(term, tol, "min survival (iii)")
        inner = series + bessel_i(1, z) / g - math.exp(l1 * t) / l2 - math.exp(l2 * t) / l1
        return math.exp(-tau) / t * inner
    return None


def min_survival(r: Rates, d: ThresholdDistribution, t: float,
                 tol: float = DEFAULT_TOL, use_table: bool = True) -> float:
    """e^{-tau} sum_k P(M>k) {(l2 t)^k/k! Ebar_k(l1 t) + (l1 t)^k/k! Ebar_{k+1}(l2 t)}."""
    _check(t=t)
    if t == 0:
        return 1.0
    if use_table and _table("min_survival", d):
        v = _min_table_survival(r, d, t, tol)
        if v is not None:
            return v
    a, b = r.lambda1 * t, r.lambda2 * t
    def evaluate(kmax):
        pa, pb = _poisson_pmf(a, kmax), _poisson_pmf(b, kmax)
        total = 0.0
        for k in range(0, kmax + 1):
            pbar = d.survival(k)
            if pbar == 0.0:
                break
            total += pbar * (pb[k] * poisson_tail(k, a) + pa[k] * poisson_tail(k + 1, b))
        return total

    return min(1.0, _truncated(d, tol, min(_cap(a), _cap(b)), evaluate))


# ----------------------------------------------------------------- max scheme


def max_subdensity(r: Rates, d: ThresholdDistribution, i: int, t: float,
                   tol: float = DEFAULT_TOL) -> float:
    """lambda_i e^{-tau} sum_k p_k (lambda_i t)^(k-1)/(k-1)! E_k(lambda_j t)."""
    _check(i, t)
    lam, other = r.rate(i), r.other(i)
    if t == 0:
        return lam * d.pmf(1)
    def evaluate(kmax):
        pois = _poisson_pmf(lam * t, kmax)
        total = 0.0
        for k in range(1, kmax + 1):
            pk = d.pmf(k)
            if pk:
                total += pk * pois[k - 1] * poisson_head(k, other * t)
        return total

    return lam * _truncated(d, tol, _cap(lam * t) + 1, evaluate)


def max_survival(r: Rates, d: ThresholdDistribution, t: float,
                 tol: float = DEFAULT_TOL) -> float:
    """e^{-tau} sum_k P(M>k) {(l2 t)^k/k! E_k(l1 t) + (l1 t)^k/k! E_{k+1}(l2 t)}."""
    _check(t=t)
    if t == 0:
        return 1.0
    a, b = r.lambda1 * t, r.lambda2 * t
    def evaluate(kmax):
        pa, pb = _poisson_pmf(a, kmax), _poisson_pmf(b, kmax)
        total = 0.0
        for k in range(0, kmax + 1):
            pbar = d.survival(k)
            if pbar == 0.0:
                break
            total += pbar * (pb[k] * poisson_head(k, a) + pa[k] * poisson_head(k + 1, b))
        return total

    return min(1.0, _truncated(d, tol, max(_cap(a), _cap(b)), evaluate))


def single_stream_subdensity(lam: float, d: ThresholdDistribution, t: float,
                             tol: float = DEFAULT_TOL) -> float:
    """lambda e^{-lambda t} sum_k p_k (lambda t)^(k-1)/(k-1)!.

    Equals min_subdensity + max_subdensity for the cause with rate lambda.
    """
    return _first_passage_density(lam, d, t, tol)


def single_stream_survival(lam: float, d: ThresholdDistribution, t: float,
                           tol: float = DEFAULT_TOL) -> float:
    """e^{-lambda t} sum_k P(M > k) (lambda t)^k / k!."""
    return _sum_survival_total(lam, d, t, tol)


# ------------------------------------------------------- scheme dispatchers


def subdensity(scheme, r: Rates, d: ThresholdDistribution, i: int, t: float,
               tol: float = DEFAULT_TOL) -> float:
    name = getattr(scheme, "value", scheme)
    if name == "sum":
        return sum_subdensity(r, d, i, t, tol)
    if name == "min":
        return min_subdensity(r, d, i, t, tol)
    if name == "max":
        return max_subdensity(r, d, i, t, tol)
    raise ValueError(f"unknown scheme {scheme!r}")


def survival(scheme, r: Rates, d: ThresholdDistribution, t: float,
             tol: float = DEFAULT_TOL) -> float:
    name = getattr(scheme, "value", scheme)
    if name == "sum":
        return sum_survival(r, d, t, tol)
    if name == "min":
        return min_survival(r, d, t, tol)
    if name == "max":
        return max_survival(r, d, t, tol)
    raise ValueError(f"unknown scheme {scheme!r}")


# ------------------------------------------------------- h shock types, CLT


def _normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def clt_survival(h: int, lam: float, d: ThresholdDistribution, t0: float,
                 tol: float = DEFAULT_TOL) -> float:
    """Normal approximation sum_k p_k Phi((k - h mu0) / (sqrt(h) sigma0)).

    The h shock streams are iid Poisson(lam), so mu0 = sigma0^2 = lam t0.
    """
    if h < 2:
        raise ValueError(f"h must be >= 2, got {h}")
    if not lam > 0 or not t0 > 0:
        raise ValueError("lam and t0 must be positive")
    mu0 = lam * t0
    centre, scale = h * mu0, math.sqrt(h * mu0)
    # past z = 9 every remaining Phi is 1 to double precision
    k_flat = math.ceil(centre + 9.0 * scale) + 1
    kmax = d.bounded_truncation_index(tol, k_flat)
    total = 0.0
    for k in range(1, kmax + 1):
        pk = d.pmf(k)
        if pk:
            total += pk * _normal_cdf((k - centre) / scale)
    return total + d.survival(kmax)


def superposed_survival(h: int, lam: float, d: ThresholdDistribution, t0: float,
                        tol: float = DEFAULT_TOL) -> float:
    """Exact sum-scheme survival for h iid Poisson(lam) streams (rate h lam)."""
    return _sum_survival_total(h * lam, d, t0, tol)
