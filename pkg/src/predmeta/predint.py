"""Prediction intervals for the effect in a new study, and the DL Wald CI.

Four prediction intervals are available:

``HTS``
    DerSimonian-Laird plug-in with a t(K-2) quantile.
``HTS-HK`` / ``HTS-SJ``
    the same construction around the REML mean, using the Hartung-Knapp or
    Sidik-Jonkman standard error.
``Proposed``
    parametric bootstrap that draws tau^2 from its confidence distribution,
    together with N(0, 1) and t(K-1) variates, and takes percentile limits
    of the simulated new-study effects.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import stats

from . import estimators as est
from .confdist import ConfDist
from .errors import DataError, MethodUnavailable

METHODS = ("HTS", "HTS-HK", "HTS-SJ", "Proposed")
MIN_BOOTSTRAP = 100


class ConfidenceInterval(NamedTuple):
    lower: float
    upper: float
    center: float
    se: float

    @property
    def width(self):
        return self.upper - self.lower


@dataclass(frozen=True)
class PredictionResult:
    """One prediction interval.

    ``B`` and ``seed`` are filled in for the bootstrap method only;
    ``diagnostics`` holds method-specific extras (e.g. the fraction of tau^2
    draws truncated to zero).
    """

    method: str
    alpha: float
    lower: float
    upper: float
    center: float
    tau2_used: float
    B: Optional[int] = None
    seed: Optional[int] = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, value):
        return self.lower <= value <= self.upper

    def to_dict(self):
        return {
            "method": self.method, "alpha": self.alpha,
            "lower": self.lower, "upper": self.upper, "width": self.width,
            "center": self.center, "tau2_used": self.tau2_used,
            "B": self.B, "seed": self.seed,
            "diagnostics": dict(self.diagnostics),
        }


def _check_alpha(alpha):
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")


def _need_three(s, method):
    if s.K < 3:
        raise MethodUnavailable(
            f"{method} needs at least 3 studies (t with K-2 df), got {s.K}")


def ci_mean_dl(s, alpha=0.05):
    """Wald interval for the mean with the DerSimonian-Laird tau^2."""
    _check_alpha(alpha)
    mu, se = est.pooled_mean(s, est.tau2_dl(s))
    half = stats.norm.ppf(1 - alpha / 2) * se
    return ConfidenceInterval(mu - half, mu + half, mu, se)


def _symmetric(method, alpha, center, tau2, se, K):
    half = stats.t.ppf(1 - alpha / 2, K - 2) * np.sqrt(tau2 + se ** 2)
    return PredictionResult(method, alpha, center - half, center + half,
                            center, tau2)


def pi_hts(s, alpha=0.05):
    """Higgins-Thompson-Spiegelhalter prediction interval."""
    _check_alpha(alpha)
    _need_three(s, "HTS")
    tau2 = est.tau2_dl(s)
    mu, se = est.pooled_mean(s, tau2)
    return _symmetric("HTS", alpha, mu, tau2, se, s.K)


def pi_hts_reml(s, alpha=0.05, se_variant="HK", reml=None):
    """HTS-type interval around the REML mean.

    Parameters
    ----------
    se_variant : {"HK", "SJ"}
        Hartung-Knapp or Sidik-Jonkman standard error.
    reml : RemlFit, optional
        Precomputed REML fit, to share between the two variants.
    """
    _check_alpha(alpha)
    variant = se_variant.upper()
    if variant not in ("HK", "SJ"):
        raise ValueError(f"se_variant must be 'HK' or 'SJ', not {se_variant!r}")
    method = f"HTS-{variant}"
    _need_three(s, method)
    if reml is None:
        reml = est.tau2_reml(s)
    tau2 = reml.tau2
    mu, _ = est.pooled_mean(s, tau2)
    se = est.se_hk(s, tau2) if variant == "HK" else est.se_sj(s, tau2)
    res = _symmetric(method, alpha, mu, tau2, se, s.K)
    res.diagnostics.update(reml_iterations=reml.iterations,
                           reml_converged=reml.converged)
    return res


def _streams(rng):
    """Three independent child generators for tau^2, z and t draws."""
    if isinstance(rng, np.random.Generator):
        return rng.spawn(3), None
    if rng is None:
        raise ValueError("the bootstrap needs a seed or a Generator")
    seed = int(rng)
    children = np.random.SeedSequence(seed).spawn(3)
    return [np.random.default_rng(c) for c in children], seed


def _invert_parallel(cd, u, threads):
    if threads <= 1 or u.size < 2 * threads:
        return cd.invert(u)
    cd.grid()  # build the shared bracket before fanning out
    chunks = np.array_split(u, threads)
    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(cd.invert, chunks))
    return np.concatenate(parts)


def predictive_draws(s, B, rng, threads=1, cd=None):
    """Bootstrap sample of the new-study effect.

    Parameters
    ----------
    s : StudySet
    B : int
        Number of draws.
    rng : numpy.random.Generator or int
        Source of randomness; an int is treated as a seed.
    threads : int
        Worker threads for the tau^2 inversions. Results do not depend on
        this value.
    cd : ConfDist, optional
        Precomputed confidence distribution for ``s``.

    Returns
    -------
    theta : ndarray, shape (B,)
    tau2 : ndarray, shape (B,)
        The tau^2 draws used for each theta.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    (g_tau, g_z, g_t), _ = _streams(rng)
    if cd is None:
        cd = ConfDist.from_studies(s)
    K = s.K
    u = g_tau.random(B)
    z = g_z.standard_normal(B)
    t = g_t.standard_t(K - 1, B)
    tau2 = _invert_parallel(cd, u, threads)
    return _theta_new(s.y, s.sigma2, tau2, z, t), tau2


def _theta_new(y, sigma2, tau2, z, t, chunk=8192):
    K = y.size
    out = np.empty(tau2.size)
    for lo in range(0, tau2.size, chunk):
        sl = slice(lo, lo + chunk)
        w = 1.0 / (sigma2[None, :] + tau2[sl, None])
        wsum = w.sum(axis=1)
        mu = w @ y / wsum
        se_h = np.sqrt(np.sum(w * (y[None, :] - mu[:, None]) ** 2, axis=1)
                       / wsum / (K - 1))
        out[sl] = mu + z[sl] * np.sqrt(tau2[sl]) - t[sl] * se_h
    return out


def percentile_limits(theta, alpha):
    """Lower and upper alpha/2 percentile points (linear interpolation)."""
    lo, hi = np.quantile(theta, [alpha / 2, 1 - alpha / 2], method="linear")
    return float(lo), float(hi)


def pi_proposed(s, alpha=0.05, B=5000, rng=None, threads=1):
    """Bootstrap prediction interval using the confidence distribution of tau^2.

    Parameters
    ----------
    s : StudySet
    alpha : float
        One minus the nominal coverage.
    B : int
        Bootstrap size, at least 100.
    rng : numpy.random.Generator or int
        Generator or integer seed; the result is reproducible given either.
    threads : int
        Threads used for the tau^2 inversions (does not change the result).

    Returns
    -------
    PredictionResult
        Centered (for reporting) on the DerSimonian-Laird mean.
    """
    _check_alpha(alpha)
    if B < MIN_BOOTSTRAP:
        raise DataError(f"B must be at least {MIN_BOOTSTRAP}, got {B}")
    seed = None if isinstance(rng, np.random.Generator) else rng
    cd = ConfDist.from_studies(s)
    theta, tau2 = predictive_draws(s, B, rng, threads, cd)
    lower, upper = percentile_limits(theta, alpha)
    tau2_dl = est.tau2_dl(s)
    mu, _ = est.pooled_mean(s, tau2_dl)
    return PredictionResult(
        "Proposed", alpha, lower, upper, mu, tau2_dl, B=B,
        seed=None if seed is None else int(seed),
        diagnostics={"h0": cd.h0, "zero_fraction": float(np.mean(tau2 == 0)),
                     "tau2_draw_median": float(np.median(tau2))})


def all_intervals(s, alpha=0.05, B=5000, rng=None, threads=1):
    """All four prediction intervals, keyed by method tag.

    HTS-family entries are replaced by the ``MethodUnavailable`` exception
    instance when K < 3.
    """
    out = {}
    try:
        out["HTS"] = pi_hts(s, alpha)
    except MethodUnavailable as exc:
        out["HTS"] = exc
    reml = est.tau2_reml(s) if s.K >= 3 else None
    for variant in ("HK", "SJ"):
        try:
            out[f"HTS-{variant}"] = pi_hts_reml(s, alpha, variant, reml)
        except MethodUnavailable as exc:
            out[f"HTS-{variant}"] = exc
    out["Proposed"] = pi_proposed(s, alpha, B, rng, threads)
    return out
