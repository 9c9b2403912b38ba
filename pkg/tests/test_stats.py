import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import t as student_t

from freightknn import stats

# Reference values computed once with statsmodels / scipy and cross-checked at
# 40 digits with mpmath.
OLS_X = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]
OLS_Y = [2.31, 1.87, 3.95, 4.12, 3.66, 5.81, 6.02, 5.47, 7.90, 8.34]
OLS_REF = dict(slope=0.6783636363636366, se=0.07971187785439746, t=8.510195150624135,
               ci=(0.49454771640650674, 0.8621795563207665), p=2.7909015439999187e-05)
PAIRED_A = [12.1, 9.8, 15.3, 11.0, 13.7, 10.4]
PAIRED_B = [10.9, 9.9, 13.1, 10.2, 12.5, 10.0]
PAIRED_REF = dict(t=2.9481882240069672, p_two=0.03195230078262498, p_one=0.01597615039131249)
PEARSON_P = [3.1, 4.7, 2.2, 8.9, 5.5, 6.1, 7.3, 1.8]
PEARSON_Q = [2.0, 5.1, 1.9, 7.7, 6.0, 5.2, 8.8, 2.5]
PEARSON_REF = 0.9276397875536755

vectors = st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30)


@pytest.mark.parametrize("actual,est,expected", [
    ([100, 200], [110, 180], 10.0), ([5, 7], [5, 7], 0.0), ([100], [0], 100.0)])
def test_mape_examples(actual, est, expected):
    assert stats.mape(actual, est) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("actual,est", [([0, 1], [1, 1]), ([1, 2], [1]), ([], [])])
def test_mape_errors(actual, est):
    with pytest.raises(ValueError):
        stats.mape(actual, est)


@given(st.lists(st.tuples(st.floats(0.1, 1e4), st.floats(-1e4, 1e4)), min_size=1, max_size=20),
       st.floats(1e-3, 1e3))
def test_mape_scale_invariant(pairs, c):
    a, e = zip(*pairs)
    assert stats.mape([c * x for x in a], [c * x for x in e]) == pytest.approx(
        stats.mape(a, e), rel=1e-9, abs=1e-9)


def test_percentile_examples():
    assert stats.percentile([10, 20, 30, 40], 0.75) == 32.5
    assert stats.percentile([7.5], 0.3) == 7.5
    assert stats.percentile([2, 2, 2], 0.9) == 2
    with pytest.raises(ValueError):
        stats.percentile([], 0.5)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30), st.floats(0, 1), st.floats(0, 1))
def test_percentile_monotone_and_bounded(v, p, q):
    lo, hi = sorted((p, q))
    a, b = stats.percentile(v, lo), stats.percentile(v, hi)
    assert min(v) <= a <= b <= max(v)
    assert np.isclose(a, np.percentile(v, 100 * lo), rtol=1e-12, atol=1e-9)


def test_mean_ci_examples():
    assert stats.mean_ci([5, 5, 5, 5]) == (5.0, 0.0, (5.0, 5.0))
    m, se, (lo, hi) = stats.mean_ci([1, 2, 3, 4, 5])
    assert m == 3.0
    assert se == pytest.approx(0.7071067811865476, abs=1e-12)
    assert lo == pytest.approx(1.036756838522439, abs=1e-10)
    assert hi == pytest.approx(4.9632431614775605, abs=1e-10)
    with pytest.raises(ValueError):
        stats.mean_ci([1.0])


@given(vectors)
def test_ci_contains_mean(v):
    m, _, (lo, hi) = stats.mean_ci(v)
    assert lo <= m <= hi


def test_ols_slope_reference():
    r = stats.ols_slope_test(OLS_X, OLS_Y)
    assert r.slope == pytest.approx(OLS_REF["slope"], abs=1e-10)
    assert r.se == pytest.approx(OLS_REF["se"], abs=1e-10)
    assert r.t == pytest.approx(OLS_REF["t"], abs=1e-10)
    assert r.ci == pytest.approx(OLS_REF["ci"], abs=1e-10)
    assert r.p_value == pytest.approx(OLS_REF["p"], abs=1e-12)
    assert r.df == 8 and r.reject


def test_ols_degenerate_cases():
    flat = stats.ols_slope_test([1, 2, 3, 4], [3, 3, 3, 3])
    assert flat.slope == 0 and not flat.reject
    exact = stats.ols_slope_test([1, 2, 3, 4], [2, 4, 6, 8])
    assert exact.slope == pytest.approx(2) and exact.se == pytest.approx(0, abs=1e-12)
    assert exact.reject
    with pytest.raises(ValueError):
        stats.ols_slope_test([2, 2, 2], [1, 2, 3])


def test_paired_t_reference():
    t, p = stats.paired_t_test(PAIRED_A, PAIRED_B, stats.Sided.TWO)
    assert t == pytest.approx(PAIRED_REF["t"], abs=1e-10)
    assert p == pytest.approx(PAIRED_REF["p_two"], abs=1e-10)
    t1, p1 = stats.paired_t_test(PAIRED_A, PAIRED_B, stats.Sided.B_LESS_THAN_A)
    assert p1 == pytest.approx(PAIRED_REF["p_one"], abs=1e-10)
    assert p1 <= p


def test_paired_t_edge_cases():
    assert stats.paired_t_test([1, 2, 3], [1, 2, 3]) == (0.0, 1.0)
    t, p = stats.paired_t_test([11, 12, 13], [1, 2, 3], stats.Sided.B_LESS_THAN_A)
    assert t == math.inf and p == 0.0
    with pytest.raises(ValueError):
        stats.paired_t_test([1, 2], [1, 2, 3])


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=2, max_size=20))
def test_paired_t_two_sided_symmetric(pairs):
    a, b = zip(*pairs)
    assert stats.paired_t_test(a, b)[1] == pytest.approx(stats.paired_t_test(b, a)[1], abs=1e-12)


def test_pearson_reference_and_edges():
    assert stats.pearson(PEARSON_P, PEARSON_Q) == pytest.approx(PEARSON_REF, abs=1e-12)
    assert stats.pearson([1, 2, 4], [1, 2, 4]) == pytest.approx(1.0)
    assert stats.pearson([1, 2, 4], [-1, -2, -4]) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        stats.pearson([1, 1, 1], [1, 2, 3])


@given(st.floats(0.1, 10), st.floats(-10, 10), st.floats(0.1, 10), st.floats(-10, 10))
def test_pearson_affine_invariant(a, b, c, d):
    r = stats.pearson(PEARSON_P, PEARSON_Q)
    shifted = stats.pearson([a * x + b for x in PEARSON_P], [c * y + d for y in PEARSON_Q])
    assert shifted == pytest.approx(r, abs=1e-12)


def test_error_stats_consistency():
    actual = [100.0, 200.0, 50.0, 400.0, 80.0]
    est = [110.0, 150.0, 55.0, 500.0, 80.0]
    s = stats.error_stats(actual, est)
    apes = [10.0, 25.0, 10.0, 25.0, 0.0]
    assert s.n == 5
    assert s.mape == pytest.approx(np.mean(apes))
    assert s.q3ape == pytest.approx(stats.percentile(apes, 0.75))
    assert 0 <= s.q3ape <= max(apes)
    assert s.mape_ci[0] <= s.mape <= s.mape_ci[1]
    assert s.mean_error_eur == pytest.approx(np.mean(np.subtract(est, actual)))


@pytest.mark.parametrize("df", [1, 2, 4, 8, 30, 1000])
def test_t_quantile_against_cdf(df):
    q = stats.t_quantile(0.975, df)
    assert student_t.cdf(q, df) == pytest.approx(0.975, abs=1e-12)
