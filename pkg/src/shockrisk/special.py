"""Series evaluation of the special functions used by the shock models.

Every series here has positive terms with factorially decaying ratios, so
they are summed forward in ascending order and stopped once the next term
drops below ``rel_tol`` times the running sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

# e^x - E_k(x) is used only when it keeps at least ~13 significant digits.
class NonConvergenceError(ArithmeticError):
    """A truncated series ran out of budget before meeting its tolerance."""

    def __init__(self, message: str, partial: float = math.nan):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class SeriesBudget:
    rel_tol: float = 1e-14
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.max_terms < 1:
            raise ValueError(f"max_terms must be >= 1, got {self.max_terms}")


DEFAULT_BUDGET = SeriesBudget()


def _log_power_over_factorial(x: float, n: int) -> float:
    """log(x^n / n!) for x > 0."""
    return n * math.log(x) - math.lgamma(n + 1)


def _sum_ratio_series(first: float, ratio, budget: SeriesBudget, what: str) -> float:
    # ratio(r) gives term[r + 1] / term[r]
    total = term = first
    for r in range(budget.max_terms):
        term *= ratio(r)
        total += term
        if term <= budget.rel_tol * total:
            return total
    raise NonConvergenceError(
        f"{what}: no convergence within {budget.max_terms} terms", partial=total
    )


def bessel_i(n: int, x: float, budget: SeriesBudget = DEFAULT_BUDGET) -> float:
    """Modified Bessel function of the first kind I_n(x) for integer n >= 0."""
    if n < 0 or x < 0:
        raise ValueError(f"bessel_i needs n >= 0 and x >= 0, got n={n}, x={x}")
    if x == 0:
        return 1.0 if n == 0 else 0.0
    half = 0.5 * x
    first = math.exp(_log_power_over_factorial(half, n))
    if first == 0.0:
        return 0.0
    q = half * half
    return _sum_ratio_series(
        first, lambda r: q / ((r + 1) * (r + 1 + n)), budget, f"I_{n}({x})"
    )


def two_index_bessel_m(n: int, k: int, x: float, budget: SeriesBudget = DEFAULT_BUDGET) -> float:
    """M_{n,k}(x) = sum_r x^(3r+n+k) / (r! (r+n)! (r+k)!).

    Negative indices are accepted: terms whose factorials would have a
    negative argument vanish, so the sum starts at r = max(0, -n, -k).
    This is the extension under which the two-variable generating
    function exp{x(a + b + 1/(ab))} holds.
    """
    if x < 0:
        raise ValueError(f"two_index_bessel_m needs x >= 0, got {x}")
    r0 = max(0, -n, -k)
    power = 3 * r0 + n + k
    if x == 0:
        return 1.0 if power == 0 else 0.0
    log_first = (
        power * math.log(x)
        - math.lgamma(r0 + 1)
        - math.lgamma(r0 + n + 1)
        - math.lgamma(r0 + k + 1)
    )
    first = math.exp(log_first)
    if first == 0.0:
        return 0.0
    x3 = x**3
    return _sum_ratio_series(
        first,
        lambda j: x3 / ((r0 + j + 1) * (r0 + j + 1 + n) * (r0 + j + 1 + k)),
        budget,
        f"M_{n},{k}({x})",
    )


def partial_exp_sum(k: int, x: float) -> float:
    """E_k(x) = sum_{j<k} x^j / j!, with E_0(x) = 0."""
    if k < 0:
        raise ValueError(f"partial_exp_sum needs k >= 0, got {k}")
    total = 0.0
    term = 1.0
    for j in range(k):
        total += term
        term *= x / (j + 1)
    return total


def _direct_tail(k: int, x: float, budget: SeriesBudget, shift: float = 0.0) -> float:
    # sum_{j>=k} exp(-shift) x^j / j!
    first = math.exp(_log_power_over_factorial(x, k) - shift)
    if first == 0.0:
        return 0.0
    total = term = first
    j = k
    for _ in range(budget.max_terms):
        ratio = x / (j + 1)
        term *= ratio
        total += term
        j += 1
        if ratio < 1 and term <= budget.rel_tol * total:
            return total
    raise NonConvergenceError(f"tail sum from {k} at x={x} did not converge", partial=total)


def tail_exp_sum(k: int, x: float, budget: SeriesBudget = DEFAULT_BUDGET) -> float:
    """Ebar_k(x) = sum_{j>=k} x^j / j! for x >= 0."""
    if k < 0 or x < 0:
        raise ValueError(f"tail_exp_sum needs k >= 0 and x >= 0, got k={k}, x={x}")
    ex = math.exp(x)
    if k == 0:
        return ex
    if x == 0:
        return 0.0
    # past the mode the terms shrink from the start; below it the tail is
    # at least about half of e^x and the subtraction is harmless
    if k > x:
        return _direct_tail(k, x, budget)
    return ex - partial_exp_sum(k, x)


def poisson_head(k: int, x: float) -> float:
    """e^{-x} E_k(x), i.e. P(Poisson(x) <= k - 1), without overflow."""
    if k <= 0:
        return 0.0
    if x == 0:
        return 1.0
    j = np.arange(k)
    return min(1.0, float(np.exp(j * math.log(x) - x - gammaln(j + 1)).sum()))


def poisson_tail(k: int, x: float, budget: SeriesBudget = DEFAULT_BUDGET) -> float:
    """e^{-x} Ebar_k(x), i.e. P(Poisson(x) >= k), without overflow."""
    if k <= 0:
        return 1.0
    if x == 0:
        return 0.0
    if k > x:
        return _direct_tail(k, x, budget, shift=x)
    return 1.0 - poisson_head(k, x)


def descending_factorial(m: int, s: int) -> int:
    """(m)_s = m (m-1) ... (m-s+1); zero once the product crosses zero."""
    if m < 0 or s < 0:
        raise ValueError(f"descending_factorial needs m, s >= 0, got m={m}, s={s}")
    return math.perm(m, s)
