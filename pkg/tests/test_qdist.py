import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from predmeta import (AccuracyParams, ConvergenceError, eigen_spectrum, q_cdf,
                      wchisq_cdf)
from predmeta.qdist import centering_matrix


# -- spectrum ----------------------------------------------------------------

@pytest.mark.parametrize("s2, tau2, lam", [
    ([1, 1, 1], 0.0, [1.0, 1.0]),
    ([1, 1], 0.0, [1.0]),
    ([1, 1], 1.0, [2.0]),
])
def test_spectrum_hand_values(s2, tau2, lam):
    spec = eigen_spectrum(s2, tau2)
    np.testing.assert_allclose(spec.lambdas, lam, atol=1e-12)
    assert spec.rank == len(s2) - 1


def test_centering_matrix_2x2():
    np.testing.assert_allclose(centering_matrix([1.0, 1.0]),
                               [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)


@given(st.lists(st.floats(0.01, 5.0), min_size=2, max_size=15),
       st.floats(0.0, 5.0))
@settings(max_examples=80, deadline=None)
def test_trace_identity(s2, tau2):
    spec = eigen_spectrum(s2, tau2)
    A = centering_matrix(s2)
    expected = float(np.sum((np.array(s2) + tau2) * np.diag(A)))
    assert spec.trace == pytest.approx(expected, rel=1e-8)
    assert np.all(spec.lambdas > 0)
    assert spec.lambdas.sum() == pytest.approx(spec.trace, rel=1e-8)


def test_spectrum_equals_k_minus_one_for_q_mean():
    # E[Q] = sum(lambda) = K - 1 at tau2 = 0
    s2 = [0.1, 0.5, 2.0, 0.03]
    assert eigen_spectrum(s2, 0.0).lambdas.sum() == pytest.approx(3.0)


# -- weighted chi-square CDF -------------------------------------------------

def test_chi2_1_quantile():
    assert wchisq_cdf([1.0], 3.841).prob == pytest.approx(0.950, abs=0.001)


def test_exponential_closed_form():
    q = 1.38629
    assert wchisq_cdf([1.0, 1.0], q).prob == pytest.approx(
        1 - math.exp(-q / 2), abs=1e-9)
    assert wchisq_cdf([1.0, 1.0], q).prob == pytest.approx(0.5, abs=1e-5)


@pytest.mark.parametrize("r", [1, 2, 3, 7, 20, 51])
@pytest.mark.parametrize("q", [0.01, 0.5, 3.0, 25.0, 90.0])
def test_equal_weights_match_chi2(r, q):
    lam = np.full(r, 1.7)
    assert wchisq_cdf(lam, q).prob == pytest.approx(
        stats.chi2.cdf(q / 1.7, r), abs=1e-9)


def test_nonpositive_q_gives_zero():
    assert wchisq_cdf([2.0, 0.3], 0.0).prob == 0.0
    assert wchisq_cdf([2.0, 0.3], -1.0).prob == 0.0


def test_error_bound_reported():
    res = wchisq_cdf([5.0, 0.1, 0.2, 3.0], 4.0, AccuracyParams(eps=1e-10))
    assert 0 <= res.error <= 1e-10
    assert res.terms > 1


def test_convergence_error_carries_partial():
    with pytest.raises(ConvergenceError) as info:
        wchisq_cdf([100.0, 0.01, 0.01], 50.0, AccuracyParams(max_terms=3))
    assert 0 <= info.value.partial <= 1
    assert info.value.bound > 1e-8


@pytest.mark.parametrize("bad", [[], [0.0, 1.0], [-1.0], [np.nan]])
def test_rejects_bad_weights(bad):
    with pytest.raises(ValueError):
        wchisq_cdf(bad, 1.0)


@given(st.lists(st.floats(0.1, 5.0), min_size=1, max_size=9),
       st.floats(0.01, 40.0), st.floats(0.05, 20.0))
@settings(max_examples=80, deadline=None)
def test_scale_invariance(lam, q, c):
    acc = AccuracyParams(eps=1e-9)
    a = wchisq_cdf(lam, q, acc).prob
    b = wchisq_cdf(np.array(lam) * c, q * c, acc).prob
    assert abs(a - b) <= 2 * acc.eps + 1e-12


@given(st.lists(st.floats(0.1, 5.0), min_size=1, max_size=9))
@settings(max_examples=40, deadline=None)
def test_monotone_in_q(lam):
    qs = np.linspace(0, 6 * sum(lam), 40)
    p = [wchisq_cdf(lam, q, AccuracyParams(eps=1e-11)).prob for q in qs]
    assert np.all(np.diff(p) >= -1e-10)
    assert 0 <= min(p) and max(p) <= 1


def test_monte_carlo_oracle():
    rng = np.random.default_rng(7)
    lam = rng.uniform(0.1, 5, size=6)
    draws = rng.chisquare(1, size=(400_000, lam.size)) @ lam
    for q in np.quantile(draws, [0.05, 0.3, 0.5, 0.8, 0.97]):
        p_mc = np.mean(draws <= q)
        se = math.sqrt(p_mc * (1 - p_mc) / draws.size)
        assert abs(wchisq_cdf(lam, q).prob - p_mc) < 4 * se


# -- law of Q ----------------------------------------------------------------

def test_q_cdf_closed_forms():
    assert q_cdf(2.0, [1, 1], 0.0) == pytest.approx(math.erf(1.0), abs=1e-9)
    assert q_cdf(2.0, [1, 1], 0.0) == pytest.approx(0.84270, abs=1e-5)
    assert q_cdf(2.0, [1, 1], 1.0) == pytest.approx(
        math.erf(math.sqrt(0.5)), abs=1e-9)
    assert q_cdf(2.0, [1, 1], 1.0) == pytest.approx(0.68269, abs=1e-5)
    assert q_cdf(0.0, [0.3, 0.2, 1.0], 0.7) == 0.0


def test_q_cdf_matches_simulated_q():
    rng = np.random.default_rng(11)
    s2 = np.array([0.05, 0.3, 0.12, 0.5, 0.02])
    tau2 = 0.08
    y = rng.normal(0, np.sqrt(s2 + tau2), size=(200_000, s2.size))
    w = 1 / s2
    mu = y @ w / w.sum()
    Q = np.sum(w * (y - mu[:, None]) ** 2, axis=1)
    for q in (1.0, 4.0, 9.0):
        p_mc = np.mean(Q <= q)
        se = math.sqrt(p_mc * (1 - p_mc) / Q.size)
        assert abs(q_cdf(q, s2, tau2) - p_mc) < 4 * se


@given(st.lists(st.floats(0.01, 2.0), min_size=2, max_size=10),
       st.floats(0.1, 30.0))
@settings(max_examples=40, deadline=None)
def test_strictly_decreasing_in_tau2(s2, q):
    grid = [0.0, 0.01, 0.1, 0.5, 1.0, 3.0]
    p = [q_cdf(q, s2, t) for t in grid]
    # strict where the values are away from the ends of [0, 1]
    for a, b in zip(p, p[1:]):
        assert b <= a + 1e-12
        if 1e-6 < b and a < 1 - 1e-6:
            assert b < a
