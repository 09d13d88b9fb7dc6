"""Heterogeneity and pooled-mean estimators.

All functions treat the within-study variances as known constants.
"""

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats

from .errors import DataError, NumericalError


class RemlFit(NamedTuple):
    tau2: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class HeterogeneityFit:
    """Summary of the heterogeneity analysis of one StudySet.

    ``mu_hat`` and ``se_mu`` are evaluated at the truncated DerSimonian-Laird
    estimate; ``mu_reml`` is the REML-weighted mean that the HK and SJ
    standard errors refer to.
    """

    K: int
    q: float
    tau2_udl: float
    tau2_dl: float
    tau2_reml: float
    reml_iterations: int
    reml_converged: bool
    mu_hat: float
    se_mu: float
    se_hartung: float
    mu_reml: float
    se_hk: float
    se_sj: float
    i2: float
    p_het: float


def _check_k(s, minimum=2):
    if s.K < minimum:
        raise DataError(f"need at least {minimum} studies, got {s.K}")


def _weighted_mean(y, w):
    return float(np.sum(w * y) / np.sum(w))


def cochran_q(s):
    """Cochran's Q with inverse-variance weights."""
    v = 1.0 / s.sigma2
    ybar = _weighted_mean(s.y, v)
    return float(np.sum(v * (s.y - ybar) ** 2))


def tau2_udl(s):
    """Untruncated DerSimonian-Laird moment estimate (may be negative).

    Uses the usual denominator ``S1 - S2/S1`` with ``Sr = sum(v_k**r)``.
    """
    _check_k(s)
    v = 1.0 / s.sigma2
    s1 = v.sum()
    denom = s1 - np.sum(v ** 2) / s1
    if not denom > 0:
        raise NumericalError("DerSimonian-Laird denominator is not positive")
    return float((cochran_q(s) - (s.K - 1)) / denom)


def tau2_dl(s):
    """DerSimonian-Laird estimate, truncated at zero."""
    return max(0.0, tau2_udl(s))


def tau2_reml(s, tol=1e-10, max_iter=100, start=None):
    """REML estimate of tau^2 by fixed-point iteration.

    Each iterate is clamped at zero. The DerSimonian-Laird estimate is the
    default starting value.

    Returns
    -------
    RemlFit
        ``(tau2, iterations, converged)``. When ``max_iter`` is exhausted
        the last iterate is returned with ``converged=False`` and a
        ``RuntimeWarning`` is issued.
    """
    _check_k(s)
    y, s2 = s.y, s.sigma2
    tau2 = tau2_dl(s) if start is None else max(0.0, float(start))
    for it in range(1, max_iter + 1):
        new = max(0.0, _reml_update(y, s2, tau2))
        if abs(new - tau2) <= tol:
            return RemlFit(new, it, True)
        tau2 = new
    warnings.warn(
        f"REML iteration did not converge in {max_iter} steps "
        f"(last tau2={tau2:.6g})", RuntimeWarning, stacklevel=2)
    return RemlFit(tau2, max_iter, False)


def _reml_update(y, s2, tau2):
    w = 1.0 / (s2 + tau2)
    mu = _weighted_mean(y, w)
    w2 = w * w
    return float(np.sum(w2 * ((y - mu) ** 2 + 1.0 / w.sum() - s2)) / w2.sum())


def pooled_mean(s, tau2):
    """Inverse-variance weighted mean at a given tau^2 and its plain SE."""
    if tau2 < 0:
        raise ValueError("tau2 must be >= 0")
    w = 1.0 / (s.sigma2 + tau2)
    return _weighted_mean(s.y, w), float(np.sqrt(1.0 / w.sum()))


def se_hartung(s, tau2, mu_hat):
    """Hartung's standard error of a weighted mean.

    ``mu_hat`` must be the mean computed with the same weights
    ``1/(sigma2 + tau2)``.
    """
    _check_k(s)
    w = 1.0 / (s.sigma2 + tau2)
    var = np.sum(w / w.sum() * (s.y - mu_hat) ** 2) / (s.K - 1)
    return float(np.sqrt(var))


def se_hk(s, tau2_reml):
    """Hartung-Knapp standard error of the REML-weighted mean."""
    mu_r, _ = pooled_mean(s, tau2_reml)
    return se_hartung(s, tau2_reml, mu_r)


def sj_leverage(s, tau2_reml):
    """Leverage terms used by the Sidik-Jonkman correction."""
    w = 1.0 / (s.sigma2 + tau2_reml)
    w2 = w * w
    return 2 * w / w.sum() - np.sum(w2 / w) / ((s.sigma2 + tau2_reml) * w2.sum())


def se_sj(s, tau2_reml):
    """Sidik-Jonkman bias-corrected standard error of the REML mean."""
    _check_k(s)
    w = 1.0 / (s.sigma2 + tau2_reml)
    h = sj_leverage(s, tau2_reml)
    bad = np.flatnonzero(1 - h <= 0)
    if bad.size:
        k = bad[0]
        raise NumericalError(
            f"Sidik-Jonkman leverage of study {s.labels[k]} is {h[k]:.6g} "
            f"(needs < 1)")
    mu_r = _weighted_mean(s.y, w)
    var = np.sum(w ** 2 * (s.y - mu_r) ** 2 / (1 - h)) / w.sum() ** 2
    return float(np.sqrt(var))


def i_squared(q, K):
    """Higgins-Thompson I^2 in percent, zero when ``q <= K - 1``."""
    if q <= 0:
        return 0.0
    return 100.0 * max(0.0, (q - (K - 1)) / q)


def q_test_pvalue(q, K):
    """Upper-tail p-value of Cochran's test against chi^2 with K-1 df."""
    return float(stats.chi2.sf(q, K - 1))


def fit_heterogeneity(s, reml_tol=1e-10, reml_max_iter=100):
    """Compute every estimator needed by the interval methods."""
    _check_k(s)
    q = cochran_q(s)
    udl = tau2_udl(s)
    dl = max(0.0, udl)
    mu, se = pooled_mean(s, dl)
    reml = tau2_reml(s, reml_tol, reml_max_iter)
    mu_r, _ = pooled_mean(s, reml.tau2)
    try:
        sj = se_sj(s, reml.tau2)
    except NumericalError:
        sj = float("nan")
    return HeterogeneityFit(
        K=s.K, q=q, tau2_udl=udl, tau2_dl=dl,
        tau2_reml=reml.tau2, reml_iterations=reml.iterations,
        reml_converged=reml.converged,
        mu_hat=mu, se_mu=se, se_hartung=se_hartung(s, dl, mu),
        mu_reml=mu_r, se_hk=se_hartung(s, reml.tau2, mu_r), se_sj=sj,
        i2=i_squared(q, s.K), p_het=q_test_pvalue(q, s.K),
    )
