"""Generic lattice-series evaluation of the failure-time law.

Every quantity is a sum over the threshold index k of the threshold
weights times a sum over the lattice points of a failure or risky set.
The engine enumerates those points explicitly (through the scheme's
window enumeration) so it works for any scheme, and it serves as the
reference against which the closed forms are checked.

Truncation policy:

* outer index k stops once P(M > k) < series_tol times the running sum
  (each inner sum is at most 1, so this bounds the relative remainder),
  or when the window holds no further points;
* time-dependent lattice sums are cut at mu + 12 sqrt(mu) + 30 per
  coordinate, mu = lambda_i t;
* the t-free sums over risky sets (cause probabilities and conditional
  moments) grow their window until doubling it changes the sum by less
  than series_tol relative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .schemes import LatticePoint, Scheme
from .special import NonConvergenceError
from .thresholds import DIVERGENT, ThresholdDistribution

DIVERGENCE_BLOCK = 50
# Power-law exponent of the block sums at or below which the outer series
# is declared divergent (terms ~ k^-a with a <= 1 do not sum).
_DIVERGENCE_EXPONENT = 1.1


@dataclass(frozen=True)
class Rates:
    lambda1: float
    lambda2: float

    def __post_init__(self):
        for name, v in (("lambda1", self.lambda1), ("lambda2", self.lambda2)):
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @property
    def total(self) -> float:
        return self.lambda1 + self.lambda2

    @property
    def pi1(self) -> float:
        return self.lambda1 / self.total

    @property
    def pi2(self) -> float:
        return self.lambda2 / self.total

    def rate(self, i: int) -> float:
        """Hazard rate of a type-i shock, constant for Poisson streams."""
        if i == 1:
            return self.lambda1
        if i == 2:
            return self.lambda2
        raise ValueError(f"cause index must be 1 or 2, got {i}")

    def other(self, i: int) -> float:
        return self.rate(3 - i)


@dataclass(frozen=True)
class EvalConfig:
    series_tol: float = 1e-12
    k_cap: int = 10**6
    xy_cap: int = 10**5

    def __post_init__(self):
        if not 0 < self.series_tol < 1:
            raise ValueError(f"series_tol must lie in (0, 1), got {self.series_tol}")
        if self.k_cap < 1 or self.xy_cap < 1:
            raise ValueError("k_cap and xy_cap must be >= 1")


@dataclass(frozen=True)
class Model:
    rates: Rates
    scheme: Scheme
    threshold: ThresholdDistribution
    config: EvalConfig = field(default_factory=EvalConfig)


def _check_cause(i):
    if i not in (1, 2):
        raise ValueError(f"cause index must be 1 or 2, got {i}")


def poisson_joint_pmf(r: Rates, pt: LatticePoint, t: float) -> float:
    """P(N1(t) = x1, N2(t) = x2) for independent Poisson streams."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    x1, x2 = pt
    if t == 0:
        return 1.0 if x1 == 0 and x2 == 0 else 0.0
    mu1, mu2 = r.lambda1 * t, r.lambda2 * t
    log_p = (
        x1 * math.log(mu1) - mu1 - math.lgamma(x1 + 1)
        + x2 * math.log(mu2) - mu2 - math.lgamma(x2 + 1)
    )
    return math.exp(log_p)


def poisson_cap(mu: float, cfg: EvalConfig) -> int:
    """Coordinate beyond which the Poisson(mu) mass is negligible."""
    cap = math.ceil(mu + 12.0 * math.sqrt(mu) + 30.0)
    if cap > cfg.xy_cap:
        raise NonConvergenceError(
            f"lattice window {cap} for mean {mu:g} exceeds xy_cap={cfg.xy_cap}"
        )
    return cap


def _poisson_pmf_vector(mu: float, cap: int) -> np.ndarray:
    x = np.arange(cap + 1)
    return np.exp(x * math.log(mu) - mu - gammaln(x + 1))


def _outer_range(m: Model, start: int, lattice_end: int) -> range:
    """Indices k of the outer series that can meet the lattice window."""
    end = min(lattice_end, m.threshold.support_max)
    if end > m.config.k_cap:
        raise NonConvergenceError(
            f"outer series may need k up to {end}, beyond k_cap={m.config.k_cap}"
        )
    return range(start, int(end) + 1)


def _tail_negligible(m: Model, pbar: float, total: float) -> bool:
    # every inner lattice sum is a probability, so the remainder is <= P(M > k)
    return pbar == 0.0 or (total > 0.0 and pbar < m.config.series_tol * total)


def _windows(m: Model, t: float):
    mu1, mu2 = m.rates.lambda1 * t, m.rates.lambda2 * t
    cap1, cap2 = poisson_cap(mu1, m.config), poisson_cap(mu2, m.config)
    return _poisson_pmf_vector(mu1, cap1), _poisson_pmf_vector(mu2, cap2), cap1, cap2


def subdensity(m: Model, i: int, t: float) -> float:
    """f_i(t): density of failing at t through a type-i shock."""
    _check_cause(i)
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    lam = m.rates.rate(i)
    if t == 0:
        # only the origin carries mass
        step = (1, 0) if i == 1 else (0, 1)
        k = int(m.scheme.level(*step))
        if k >= 1 and int(m.scheme.level(0, 0)) != k:
            return lam * m.threshold.pmf(k)
        return 0.0
    a1, a2, cap1, cap2 = _windows(m, t)
    total = 0.0
    for k in _outer_range(m, 1, m.scheme.max_level(cap1, cap2)):
        pk = m.threshold.pmf(k)
        if pk > 0.0:
            x1, x2 = m.scheme.risky_window(k, i, cap1, cap2)
            if x1.size:
                total += pk * float(np.dot(a1[x1], a2[x2]))
        if _tail_negligible(m, m.threshold.survival(k), total):
            break
    return lam * total


def survival(m: Model, t: float) -> float:
    """P(T > t)."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0:
        return 1.0
    a1, a2, cap1, cap2 = _windows(m, t)
    total = 0.0
    for k in _outer_range(m, 0, m.scheme.max_level(cap1, cap2)):
        pbar = m.threshold.survival(k)
        if pbar == 0.0:
            break
        x1, x2 = m.scheme.failure_window(k, cap1, cap2)
        if x1.size:
            total += pbar * float(np.dot(a1[x1], a2[x2]))
        if _tail_negligible(m, m.threshold.survival(k + 1), total):
            break
    return min(1.0, total)


def total_density(m: Model, t: float) -> float:
    return subdensity(m, 1, t) + subdensity(m, 2, t)


def _risky_weight(m: Model, k: int, i: int, s: int, start_cap: int) -> tuple[float, int]:
    """Sum over the cause-i risky set of (x1+x2+s)!/(x1! x2!) pi1^x1 pi2^x2.

    Returns the sum and the window size at which it settled.
    """
    cfg = m.config
    lp1, lp2 = math.log(m.rates.pi1), math.log(m.rates.pi2)

    def window_sum(cap):
        x1, x2 = m.scheme.risky_window(k, i, cap, cap)
        if not x1.size:
            return 0.0
        logw = gammaln(x1 + x2 + s + 1) - gammaln(x1 + 1) - gammaln(x2 + 1) + x1 * lp1 + x2 * lp2
        return float(np.exp(logw).sum())

    cap = max(start_cap, 2 * k + 2 * s + 64)
    current = window_sum(cap)
    while True:
        wider = min(2 * cap, cfg.xy_cap)
        if wider == cap:
            raise NonConvergenceError(
                f"risky-set sum for k={k} needs a window beyond xy_cap={cfg.xy_cap}",
                partial=current,
            )
        nxt = window_sum(wider)
        if abs(nxt - current) <= cfg.series_tol * abs(nxt):
            return nxt, cap
        cap, current = wider, nxt


def _cause_weights(m: Model, i: int, s: int):
    """Yield (k, p_k, P(M > k), weight_k) along the outer series."""
    cap = 0
    for k in range(1, m.config.k_cap + 1):
        pk = m.threshold.pmf(k)
        pbar = m.threshold.survival(k)
        if pk > 0:
            w, cap = _risky_weight(m, k, i, s, cap)
        else:
            w = 0.0
        yield k, pk, pbar, w
    raise NonConvergenceError(f"outer series reached k_cap={m.config.k_cap}")


def delta_probability(m: Model, i: int) -> float:
    """P(delta = i), the probability that a type-i shock causes the failure.

    When the threshold tail is heavy the outer series is completed by
    P(M > K) times the last per-threshold cause probability, once that
    probability has settled over the last block of indices.
    """
    _check_cause(i)
    tol = m.config.series_tol
    pi = m.rates.pi1 if i == 1 else m.rates.pi2
    total = 0.0
    history: list[float] = []
    for k, pk, pbar, w in _cause_weights(m, i, 0):
        q = pi * w
        total += pk * q
        history.append(q)
        if pbar < tol:
            return min(1.0, total)
        if len(history) > DIVERGENCE_BLOCK:
            drift = abs(q - history[-1 - DIVERGENCE_BLOCK])
            if drift * pbar <= tol:
                return min(1.0, total + q * pbar)
            history.pop(0)
    raise AssertionError("unreachable")


def _outer_moment_series(m: Model, i: int, s: int) -> float:
    """sum_k p_k * weight_k(s), or DIVERGENT.

    Terms are grouped into blocks of DIVERGENCE_BLOCK indices. Once the
    block sums decrease, a geometric tail estimate decides convergence and
    the fitted power-law exponent of the block sums decides divergence.
    """
    tol = m.config.series_tol
    total = 0.0
    block = 0.0
    blocks: list[tuple[float, float]] = []  # (block sum, block midpoint)
    support_max = m.threshold.support_max
    for k, pk, pbar, w in _cause_weights(m, i, s):
        term = pk * w
        total += term
        block += term
        if k >= support_max or pbar == 0.0:
            return total
        if k % DIVERGENCE_BLOCK:
            continue
        blocks.append((block, k - DIVERGENCE_BLOCK / 2))
        block = 0.0
        if len(blocks) < 2:
            continue
        (prev, mid_prev), (cur, mid_cur) = blocks[-2], blocks[-1]
        if cur == 0.0:
            return total
        if cur >= prev:
            continue
        rho = cur / prev
        if cur * rho / (1.0 - rho) <= tol * total:
            return total
        exponent = math.log(prev / cur) / math.log(mid_cur / mid_prev)
        if pbar < 0.01 and exponent <= _DIVERGENCE_EXPONENT and len(blocks) >= 4:
            return DIVERGENT
    raise AssertionError("unreachable")


def conditional_moment(m: Model, i: int, s: int) -> float:
    """E(T^s | delta = i), or DIVERGENT when the numerator series diverges."""
    _check_cause(i)
    if s < 1:
        raise ValueError(f"moment order must be >= 1, got {s}")
    numerator = _outer_moment_series(m, i, s)
    if numerator == DIVERGENT:
        return DIVERGENT
    pi = m.rates.pi1 if i == 1 else m.rates.pi2
    denominator = delta_probability(m, i) / pi
    if denominator == 0.0:
        raise ZeroDivisionError(f"P(delta={i}) is zero; conditional moment undefined")
    return numerator / denominator / m.rates.total**s
