import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from shockrisk import analytic, closed_forms as cf
from shockrisk.analytic import Model, Rates
from shockrisk.schemes import Scheme
from shockrisk.special import bessel_i
from shockrisk.thresholds import (
    DIVERGENT,
    Custom,
    Deterministic,
    Geometric,
    Harmonic,
    NegBinomial2,
    ShiftedPoisson,
)

R11 = Rates(1.0, 1.0)
R12 = Rates(1.0, 2.0)
THRESHOLDS = [Geometric(0.3), ShiftedPoisson(2.0), Harmonic(), NegBinomial2(0.4), Deterministic(3)]
TIMES = [0.1, 0.5, 1.0, 2.0, 5.0]


def erlang_mixture(lam, d, t, kmax=4000):
    ks = np.arange(1, kmax + 1)
    pk = np.array([d.pmf(int(k)) for k in ks])
    return float(pk @ stats.gamma.pdf(t, a=ks, scale=1 / lam)), float(pk @ stats.gamma.sf(t, a=ks, scale=1 / lam)) + d.survival(kmax)


@pytest.mark.parametrize("d, t, want", [
    (Geometric(0.5), 1.0, 0.5 * math.exp(-1.0)),
    (Harmonic(), 1.0, 0.25 * (1 - 3 * math.exp(-2.0))),
    # lambda_i e^{-eta} I_0(0) with eta = 1
    (ShiftedPoisson(1.0), 0.0, math.exp(-1.0)),
])
def test_sum_subdensity_examples(d, t, want):
    assert cf.sum_subdensity(R11, d, 1, t) == pytest.approx(want, rel=1e-13)


@pytest.mark.parametrize("d, want", [
    (Geometric(0.5), math.exp(-1.0)),
    (Harmonic(), (1 - math.exp(-2.0)) / 2),
    (NegBinomial2(0.5), math.exp(-1.0) * 1.5),
])
def test_sum_survival_examples(d, want):
    assert cf.sum_survival(R11, d, 1.0) == pytest.approx(want, rel=1e-13)


@pytest.mark.parametrize("d", [Geometric(0.3), ShiftedPoisson(2.0), ShiftedPoisson(9.0), NegBinomial2(0.4), Harmonic()], ids=repr)
@pytest.mark.parametrize("t", [0.01, 0.04, 0.3, 1.0, 4.0, 20.0])
def test_sum_tables_match_erlang_mixture(d, t):
    if isinstance(d, Harmonic) and t < 0.5:
        pytest.skip("mixture truncated at 4000 terms is too coarse for the harmonic tail")
    dens, surv = erlang_mixture(R12.total, d, t)
    got = cf.sum_subdensity(R12, d, 1, t) + cf.sum_subdensity(R12, d, 2, t)
    assert got == pytest.approx(dens, rel=1e-10)
    assert cf.sum_survival(R12, d, t) == pytest.approx(surv, rel=1e-10)


def test_harmonic_sum_survival_exact():
    for t in (0.01, 0.2, 3.0):
        tau = R12.total * t
        assert cf.sum_survival(R12, Harmonic(), t) == pytest.approx(-math.expm1(-tau) / tau, rel=1e-12)


@pytest.mark.parametrize("s, want", [(1, 1.0), (2, 2.0)])
def test_sum_moments(s, want):
    assert cf.sum_conditional_moment(R11, Geometric(0.5), s) == want
    assert cf.sum_conditional_moment(R11, Harmonic(), s) == DIVERGENT


def test_min_examples():
    e = math.exp
    assert cf.min_subdensity(R11, Deterministic(1), 1, 1.0) == pytest.approx(e(-2.0) * (math.e - 1), rel=1e-13)
    assert cf.min_survival(R11, Deterministic(1), 1.0) == pytest.approx(2 * e(-1.0) - e(-2.0), rel=1e-13)
    for d in THRESHOLDS:
        assert cf.min_subdensity(R11, d, 1, 0.0) == 0.0
        assert cf.min_survival(R12, d, 0.0) == 1.0


def test_max_examples():
    e = math.exp
    assert cf.max_subdensity(R11, Deterministic(1), 1, 1.0) == pytest.approx(e(-2.0), rel=1e-13)
    assert cf.max_subdensity(R11, Deterministic(1), 1, 0.0) == 1.0
    assert cf.max_survival(R11, Deterministic(1), 1.0) == pytest.approx(e(-2.0), rel=1e-13)
    # P(max < 2) = P(N1 <= 1) P(N2 <= 1)
    want = e(-0.5) * 1.5 * e(-1.0) * 2.0
    assert cf.max_survival(R12, Deterministic(2), 0.5) == pytest.approx(want, rel=1e-13)
    assert cf.max_survival(R12, Harmonic(), 0.0) == 1.0


def test_geometric_min_row_one_bessel_form():
    # Table form written out here independently: with q = 1 - p,
    # f_1 = p l1 e^{-(l1+l2)t} sum_n (l2/(q l1))^{(n+1)/2} I_{n+1}(2 t sqrt(q l1 l2))
    p, q, t = 0.3, 0.7, 0.5
    l1, l2 = R12.lambda1, R12.lambda2
    x = 2 * t * math.sqrt(q * l1 * l2)
    series = math.fsum(
        math.exp(0.5 * (n + 1) * math.log(l2 / (q * l1))) * bessel_i(n + 1, x) for n in range(200))
    want = p * l1 * math.exp(-(l1 + l2) * t) * series
    assert cf.min_subdensity(R12, Geometric(p), 1, t) == pytest.approx(want, rel=1e-9)
    assert cf.min_subdensity(R12, Geometric(p), 1, t, use_table=False) == pytest.approx(want, rel=1e-9)


@pytest.mark.parametrize("d", [Geometric(0.3), ShiftedPoisson(2.0), Harmonic()], ids=repr)
@pytest.mark.parametrize("t", [0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 12.0])
@pytest.mark.parametrize("i", [1, 2])
def test_min_subdensity_tables_match_series(d, t, i):
    table = cf.min_subdensity(R12, d, i, t)
    series = cf.min_subdensity(R12, d, i, t, use_table=False)
    assert table == pytest.approx(series, rel=1e-10)


@pytest.mark.parametrize("d", [Geometric(0.3), Harmonic()], ids=repr)
@pytest.mark.parametrize("t", [0.05, 0.5, 1.0, 5.0, 12.0])
def test_min_survival_tables_match_series(d, t):
    assert cf.min_survival(R12, d, t) == pytest.approx(cf.min_survival(R12, d, t, use_table=False), rel=1e-10)


def test_unvetted_table_rows_are_not_dispatched():
    assert ("min_survival", "poisson1") not in cf.TABLE_FAST_PATHS
    assert ("min_subdensity", "negbinom2") not in cf.TABLE_FAST_PATHS


@pytest.mark.parametrize("scheme", list(Scheme))
@pytest.mark.parametrize("d", THRESHOLDS + [Custom({2: 0.5, 6: 0.5})], ids=repr)
@pytest.mark.parametrize("t", TIMES)
def test_closed_matches_engine(scheme, d, t):
    m = Model(R12, scheme, d)
    for i in (1, 2):
        assert cf.subdensity(scheme, R12, d, i, t) == pytest.approx(analytic.subdensity(m, i, t), rel=1e-9)
    assert cf.survival(scheme, R12, d, t) == pytest.approx(analytic.survival(m, t), rel=1e-9)


@pytest.mark.parametrize("d", THRESHOLDS, ids=repr)
@pytest.mark.parametrize("t", TIMES + [0.0, 9.0])
def test_min_max_complementarity(d, t):
    for i in (1, 2):
        lhs = cf.min_subdensity(R12, d, i, t) + cf.max_subdensity(R12, d, i, t)
        assert lhs == pytest.approx(cf.single_stream_subdensity(R12.rate(i), d, t), abs=1e-10)
    lhs = cf.min_survival(R12, d, t) + cf.max_survival(R12, d, t)
    rhs = sum(cf.single_stream_survival(R12.rate(i), d, t) for i in (1, 2))
    assert lhs == pytest.approx(rhs, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0), st.floats(0.0, 6.0), st.sampled_from(list(Scheme)))
def test_survival_is_probability(l1, l2, t, scheme):
    v = cf.survival(scheme, Rates(l1, l2), NegBinomial2(0.4), t)
    assert 0.0 <= v <= 1.0


def test_dispatch_rejects_unknown_scheme():
    with pytest.raises(ValueError):
        cf.survival("median", R12, Geometric(0.3), 1.0)


def test_clt_small_time_limit():
    assert cf.clt_survival(2, 1.0, Deterministic(1), 1e-9) == pytest.approx(1.0, abs=1e-6)


def test_clt_formula_by_hand():
    # M = 1 w.p. 1: Phi((1 - h mu0) / sqrt(h mu0))
    h, lam, t0 = 4, 0.5, 1.0
    z = (1 - h * lam * t0) / math.sqrt(h * lam * t0)
    assert cf.clt_survival(h, lam, Deterministic(1), t0) == pytest.approx(stats.norm.cdf(z), rel=1e-14)


def test_superposition_is_sum_scheme():
    d = NegBinomial2(0.4)
    assert cf.superposed_survival(400, 0.005, d, 1.0) == pytest.approx(
        cf.sum_survival(Rates(1.0, 1.0), d, 1.0), rel=1e-13)
    assert cf.superposed_survival(100, 0.01, Geometric(0.5), 1.0) == pytest.approx(math.exp(-0.5), rel=1e-13)


def test_clt_rejects_bad_arguments():
    with pytest.raises(ValueError):
        cf.clt_survival(1, 1.0, Geometric(0.5), 1.0)
    with pytest.raises(ValueError):
        cf.clt_survival(3, 1.0, Geometric(0.5), 0.0)


@pytest.mark.xfail(strict=True, reason=(
    "h * lambda * t0 = 2 for every h, so the superposed count is exactly Poisson(2) and the "
    "normal approximation error is fixed at about 0.063"))
def test_clt_negbinom2_within_two_hundredths():
    d = NegBinomial2(0.4)
    err = abs(cf.clt_survival(400, 0.005, d, 1.0) - cf.superposed_survival(400, 0.005, d, 1.0))
    assert err <= 0.02
