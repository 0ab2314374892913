import math

import mpmath
import pytest
from hypothesis import example, given, settings, strategies as st

from shockrisk.special import (
    NonConvergenceError,
    SeriesBudget,
    bessel_i,
    descending_factorial,
    partial_exp_sum,
    poisson_head,
    poisson_tail,
    tail_exp_sum,
    two_index_bessel_m,
)

mpmath.mp.dps = 40


def m_oracle(n, k, x, terms=80):
    # plain mpmath summation, negative indices drop terms with 1/(-j)! = 0
    total = mpmath.mpf(0)
    for r in range(terms):
        if r + n < 0 or r + k < 0:
            continue
        total += mpmath.mpf(x) ** (3 * r + n + k) / (
            mpmath.factorial(r) * mpmath.factorial(r + n) * mpmath.factorial(r + k))
    return float(total)


@pytest.mark.parametrize("n, x, want", [(0, 0.0, 1.0), (1, 0.0, 0.0), (3, 0.0, 0.0)])
def test_bessel_at_zero(n, x, want):
    assert bessel_i(n, x) == want


@pytest.mark.parametrize("n", [0, 1, 2, 5, 17, 60])
@pytest.mark.parametrize("x", [0.01, 0.5, 2.0, 10.0, 45.0])
def test_bessel_matches_mpmath(n, x):
    assert bessel_i(n, x) == pytest.approx(float(mpmath.besseli(n, x)), rel=1e-12)


def test_bessel_reference_value():
    assert bessel_i(1, 2.0) == pytest.approx(1.5906368546, abs=1e-10)


def test_bessel_budget_exhaustion():
    with pytest.raises(NonConvergenceError) as info:
        bessel_i(0, 50.0, SeriesBudget(rel_tol=1e-14, max_terms=3))
    assert info.value.partial > 0


def test_budget_validation():
    with pytest.raises(ValueError):
        SeriesBudget(rel_tol=0.0)
    with pytest.raises(ValueError):
        SeriesBudget(max_terms=0)


@pytest.mark.parametrize("n, k, x, want", [(0, 0, 0.0, 1.0), (1, 0, 0.0, 0.0), (0, 1, 1.0, 1.5428386)])
def test_two_index_examples(n, k, x, want):
    assert two_index_bessel_m(n, k, x) == pytest.approx(want, abs=1e-7)


@pytest.mark.parametrize("n, k", [(0, 0), (0, 3), (4, 1), (-2, 3), (-1, -1), (7, -5)])
@pytest.mark.parametrize("x", [0.3, 1.0, 2.0, 6.0])
def test_two_index_matches_oracle(n, k, x):
    assert two_index_bessel_m(n, k, x) == pytest.approx(m_oracle(n, k, x), rel=1e-12)


def test_two_index_is_symmetric():
    for n in range(-3, 6):
        for k in range(-3, 6):
            assert two_index_bessel_m(n, k, 1.7) == two_index_bessel_m(k, n, 1.7)


@pytest.mark.parametrize("n", [0, 1, 4])
@pytest.mark.parametrize("y", [0.2, 1.0, 3.0])
def test_bessel_shares_series_with_two_index_structure(n, y):
    # I_n(2y) = sum_r y^(2r+n) / (r! (r+n)!), the M_{0,n} terms without the extra r!
    direct = math.fsum(y ** (2 * r + n) / (math.factorial(r) * math.factorial(r + n)) for r in range(80))
    assert bessel_i(n, 2 * y) == pytest.approx(direct, rel=1e-12)


@pytest.mark.parametrize("k, x, want", [(0, 5.0, 0.0), (1, 7.3, 1.0), (3, 1.0, 2.5)])
def test_partial_exp_sum(k, x, want):
    assert partial_exp_sum(k, x) == want


@pytest.mark.parametrize("k, x, want", [(0, 1.0, math.e), (2, 0.0, 0.0), (1, 1.0, math.e - 1)])
def test_tail_exp_sum(k, x, want):
    assert tail_exp_sum(k, x) == pytest.approx(want, rel=1e-14, abs=0)


def test_tail_exp_sum_deep_tail_keeps_digits():
    # k >> x: the subtraction e^x - E_k(x) would lose every digit
    want = float(mpmath.nsum(lambda j: mpmath.mpf(2) ** j / mpmath.factorial(j), [40, mpmath.inf]))
    assert tail_exp_sum(40, 2.0) == pytest.approx(want, rel=1e-13)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 50), st.floats(0.0, 20.0))
def test_exp_sums_add_to_exponential(k, x):
    assert partial_exp_sum(k, x) + tail_exp_sum(k, x) == pytest.approx(math.exp(x), rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 80), st.floats(0.0, 60.0))
@example(k=74, x=50.7890625)
def test_poisson_head_and_tail(k, x):
    head, tail = poisson_head(k, x), poisson_tail(k, x)
    assert 0.0 <= head <= 1.0 and 0.0 <= tail <= 1.0
    assert head + tail == pytest.approx(1.0, abs=1e-13)
    # P(Poisson(x) >= k) is the lower regularized gamma
    want = float(mpmath.gammainc(k, 0, x, regularized=True)) if k > 0 else 1.0
    assert tail == pytest.approx(want, rel=1e-11, abs=1e-300)


@pytest.mark.parametrize("x", [3.0, 20.0, 50.0, 200.0])
def test_poisson_tail_just_past_the_mode(x):
    # small tails must not come from 1 - head
    for k in range(int(x) + 1, int(x + 8 * math.sqrt(x)) + 2):
        want = float(mpmath.gammainc(k, 0, x, regularized=True))
        assert poisson_tail(k, x) == pytest.approx(want, rel=1e-11)
        assert tail_exp_sum(k, x) == pytest.approx(want * math.exp(x), rel=1e-11)


@pytest.mark.parametrize("n", [0, 2, 9])
def test_bessel_monotone_in_x(n):
    values = [bessel_i(n, 0.25 * j) for j in range(80)]
    assert all(b >= a for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("k", [0, 1, 5, 30])
def test_tail_exp_sum_monotone_in_x(k):
    values = [tail_exp_sum(k, 0.25 * j) for j in range(80)]
    assert all(b >= a for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("m, s, want", [(5, 0, 1), (5, 2, 20), (3, 4, 0), (0, 0, 1), (10, 10, math.factorial(10))])
def test_descending_factorial(m, s, want):
    assert descending_factorial(m, s) == want
