import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from predmeta import (DataError, GenerativeSpec, MethodUnavailable, StudySet,
                      ci_mean_dl, pi_hts, pi_hts_reml, pi_proposed)
from predmeta.predint import (_streams, all_intervals, percentile_limits,
                              predictive_draws)
from predmeta.sim import generate, replication_streams

T1 = stats.t.ppf(0.975, 1)


def test_ci_mean_dl(three):
    ci = ci_mean_dl(three, 0.05)
    half = stats.norm.ppf(0.975) * math.sqrt(1 / 3)
    assert (ci.lower, ci.upper) == pytest.approx((1 - half, 1 + half),
                                                 abs=1e-12)
    assert (ci.lower, ci.upper) == pytest.approx((-0.1316, 2.1316), abs=1e-4)


def test_ci_constant_effects_centered():
    ci = ci_mean_dl(StudySet([2.5] * 4, [0.1, 0.2, 0.3, 0.4]), 0.05)
    assert ci.center == pytest.approx(2.5)
    assert (ci.lower + ci.upper) / 2 == pytest.approx(2.5)


def test_ci_width_vanishes_as_alpha_tends_to_one(three):
    assert ci_mean_dl(three, 1 - 1e-12).width < 1e-10


def test_hts_hand_value(three):
    r = pi_hts(three, 0.05)
    half = T1 * math.sqrt(0 + 1 / 3)
    assert T1 == pytest.approx(12.7062, abs=1e-4)
    assert (r.lower, r.upper) == pytest.approx((1 - half, 1 + half),
                                               abs=1e-12)


def test_hts_rejects_k2(two):
    for f in (lambda s: pi_hts(s), lambda s: pi_hts_reml(s, 0.05, "HK"),
              lambda s: pi_hts_reml(s, 0.05, "SJ")):
        with pytest.raises(MethodUnavailable):
            f(two)


def test_hts_zero_tau2_is_t_scaled_ci(three):
    r = pi_hts(three)
    assert r.tau2_used == 0
    assert r.width / 2 == pytest.approx(T1 * ci_mean_dl(three).se)


def test_hts_width_grows_with_heterogeneity():
    s_lo = StudySet([0.0, 0.5, 1.0, 0.2], [0.1] * 4)
    s_hi = StudySet([0.0, 1.5, 3.0, 0.6], [0.1] * 4)
    # same weights (equal variances), larger spread => larger tau2 and SE
    assert pi_hts(s_hi).tau2_used > pi_hts(s_lo).tau2_used
    assert pi_hts(s_hi).width > pi_hts(s_lo).width


def test_hk_hand_value(three):
    r = pi_hts_reml(three, 0.05, "HK")
    half = T1 * math.sqrt(1 / 3)
    assert (r.lower, r.upper) == pytest.approx((1 - half, 1 + half),
                                               abs=1e-9)


def test_hk_sj_share_center():
    s = StudySet([0.1, 0.9, -0.4, 1.7, 0.6], [0.05, 0.2, 0.1, 0.3, 0.15])
    hk = pi_hts_reml(s, 0.05, "HK")
    sj = pi_hts_reml(s, 0.05, "SJ")
    assert hk.center == sj.center
    assert hk.width != sj.width
    for r in (hk, sj, pi_hts(s)):
        assert abs((r.lower + r.upper) / 2 - r.center) < 1e-12


def test_proposed_deterministic(three):
    a = pi_proposed(three, 0.05, 2000, 42)
    b = pi_proposed(three, 0.05, 2000, 42)
    assert (a.lower, a.upper) == (b.lower, b.upper)
    c = pi_proposed(three, 0.05, 2000, np.random.default_rng(42))
    d = pi_proposed(three, 0.05, 2000, np.random.default_rng(42))
    assert (c.lower, c.upper) == (d.lower, d.upper)


def test_proposed_thread_invariance():
    s = StudySet([0.1, 0.9, -0.4, 1.7, 0.6], [0.05, 0.2, 0.1, 0.3, 0.15])
    a = pi_proposed(s, 0.05, 3000, 7, threads=1)
    b = pi_proposed(s, 0.05, 3000, 7, threads=4)
    assert (a.lower, a.upper) == (b.lower, b.upper)


def test_proposed_nested_levels():
    s = StudySet([0.1, 0.9, -0.4, 1.7, 0.6], [0.05, 0.2, 0.1, 0.3, 0.15])
    theta, _ = predictive_draws(s, 5000, 3)
    lo90, hi90 = percentile_limits(theta, 0.10)
    lo95, hi95 = percentile_limits(theta, 0.05)
    assert lo95 <= lo90 < hi90 <= hi95


def test_proposed_rejects_small_b(three):
    with pytest.raises(DataError):
        pi_proposed(three, 0.05, 99, 1)


def test_proposed_works_for_k2(two):
    r = pi_proposed(two, 0.05, 500, 1)
    assert r.lower < r.upper
    assert r.center == pytest.approx(1.0)


def test_proposed_reports_dl_center():
    s = StudySet([0.1, 0.9, -0.4, 1.7, 0.6], [0.05, 0.2, 0.1, 0.3, 0.15])
    r = pi_proposed(s, 0.05, 500, 1)
    assert r.center == pytest.approx(pi_hts(s).center, abs=1e-15)


def test_draws_match_direct_formula():
    s = StudySet([0.1, 0.9, -0.4, 1.7], [0.05, 0.2, 0.1, 0.3])
    theta, tau2 = predictive_draws(s, 200, 12)
    (g_tau, g_z, g_t), _ = _streams(12)
    g_tau.random(200)
    z = g_z.standard_normal(200)
    t = g_t.standard_t(3, 200)
    for b in (0, 57, 199):
        w = 1 / (s.sigma2 + tau2[b])
        mu = np.sum(w * s.y) / w.sum()
        se = math.sqrt(np.sum(w / w.sum() * (s.y - mu) ** 2) / 3)
        expect = mu + z[b] * math.sqrt(tau2[b]) - t[b] * se
        assert theta[b] == pytest.approx(expect, rel=1e-12, abs=1e-14)


def test_streams_independent():
    (a, b, c), _ = _streams(2024)
    B = 200_000
    x = np.column_stack([a.random(B), b.standard_normal(B),
                         c.standard_t(4, B)])
    r = np.corrcoef(x, rowvar=False)
    assert np.max(np.abs(r[np.triu_indices(3, 1)])) < 0.01


@given(st.floats(0.2, 5.0), st.floats(-3, 3))
@settings(max_examples=15, deadline=None)
def test_location_scale_equivariance(a, b):
    y = np.array([0.1, 0.9, -0.4, 1.7, 0.6])
    s2 = np.array([0.05, 0.2, 0.1, 0.3, 0.15])
    base = all_intervals(StudySet(y, s2), 0.05, 400, 5)
    moved = all_intervals(StudySet(a * y + b, a * a * s2), 0.05, 400, 5)
    for m, r in base.items():
        assert moved[m].lower == pytest.approx(a * r.lower + b, rel=1e-6,
                                               abs=1e-6)
        assert moved[m].upper == pytest.approx(a * r.upper + b, rel=1e-6,
                                               abs=1e-6)


def test_all_intervals_k2_marks_unavailable(two):
    out = all_intervals(two, 0.05, 200, 1)
    assert all(isinstance(out[m], MethodUnavailable)
               for m in ("HTS", "HTS-HK", "HTS-SJ"))
    assert out["Proposed"].width > 0


def test_proposed_wider_than_hts_when_heterogeneity_small():
    spec = GenerativeSpec("I", 5, 0.01)
    wp, wh = [], []
    for r in range(150):
        g_data, g_boot = replication_streams(3, r)
        s, _ = generate(spec, g_data)
        wp.append(pi_proposed(s, 0.05, 500, g_boot).width)
        wh.append(pi_hts(s).width)
    assert np.median(wp) > np.median(wh)
    assert np.mean(np.array(wp) > np.array(wh)) > 0.5


def test_result_helpers(three):
    r = pi_hts(three)
    assert r.contains(1.0) and not r.contains(100.0)
    d = r.to_dict()
    assert d["method"] == "HTS" and d["width"] == pytest.approx(r.width)
