"""Simulation designs and the coverage-probability harness.

Three data-generating designs are supported:

* ``I``: within-study variances from ``0.25 * chi2(1)`` restricted to
  [0.009, 0.6] (by redrawing), mean 0.
* ``IIa``/``IIb``/``IIc``: variances ``0.1 * chi2(29) / 29``, mean 1; in
  ``IIb`` one randomly chosen study has its variance divided by 10, in
  ``IIc`` multiplied by 10.
* ``III``: K two-arm binary-outcome studies analysed as log odds-ratios.

Every replication ``r`` draws from its own generator seeded by
``SeedSequence(seed, spawn_key=(r,))``, so a study is reproducible and does
not depend on how replications are split across workers.
"""

import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import estimators as est
from .errors import MethodUnavailable, NumericalError
from .model import StudySet, TwoByTwoSet, from_counts
from .predint import METHODS, pi_hts, pi_hts_reml, pi_proposed

SCENARIOS = ("I", "IIa", "IIb", "IIc", "III")
DEFAULT_MU = {"I": 0.0, "IIa": 1.0, "IIb": 1.0, "IIc": 1.0, "III": 0.0}

SIGMA2_RANGE_I = (0.009, 0.6)


@dataclass(frozen=True)
class GenerativeSpec:
    """Parameters of one simulation cell.

    ``n`` and ``sigma2_mean`` only matter for the II designs.
    """

    scenario: str
    K: int
    tau2: float
    mu: float = None
    n: int = 30
    sigma2_mean: float = 0.1

    def __post_init__(self):
        scen = normalize_scenario(self.scenario)
        object.__setattr__(self, "scenario", scen)
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if self.tau2 < 0:
            raise ValueError("tau2 must be >= 0")
        if self.mu is None:
            object.__setattr__(self, "mu", DEFAULT_MU[scen])
        if scen.startswith("II") and scen != "III" and self.n < 2:
            raise ValueError("n must be >= 2")


def normalize_scenario(name, variant=None):
    """Map loose spellings ('i', 'ii' + 'b', 'iib', 'III') to a tag."""
    key = str(name).strip()
    if variant:
        key += str(variant).strip()
    upper = key.upper()
    for tag in SCENARIOS:
        if upper == tag.upper():
            return tag
    if upper == "II":
        raise ValueError("scenario II needs a variant: a, b or c")
    raise ValueError(f"unknown scenario {name!r}")


@dataclass(frozen=True)
class CoverageReport:
    """Estimated coverage of one method in one simulation cell.

    ``coverage`` and ``mean_width`` are over the ``n_valid`` replications in
    which the method produced an interval; ``n_failed`` counts the rest.
    ``mean_i2`` is the average sample I^2 (percent) over all replications.
    """

    method: str
    spec: GenerativeSpec
    reps: int
    B: int
    alpha: float
    seed: int
    n_valid: int
    n_failed: int
    covered: int
    coverage: float
    mc_se: float
    mean_width: float
    mean_i2: float

    def to_row(self):
        row = {"scenario": self.spec.scenario, "K": self.spec.K,
               "tau2": self.spec.tau2, "mu": self.spec.mu,
               "method": self.method}
        for name in ("coverage", "mc_se", "mean_width", "mean_i2", "reps",
                     "n_valid", "n_failed", "B", "alpha", "seed"):
            row[name] = getattr(self, name)
        return row


ROW_FIELDS = ("scenario", "K", "tau2", "mu", "method", "coverage", "mc_se",
              "mean_width", "mean_i2", "reps", "n_valid", "n_failed", "B",
              "alpha", "seed")


# --------------------------------------------------------------------------
# generators

def draw_sigma2_i(K, rng, low=SIGMA2_RANGE_I[0], high=SIGMA2_RANGE_I[1]):
    """K variances from 0.25*chi2(1), redrawn until inside [low, high]."""
    out = np.empty(K)
    filled = 0
    while filled < K:
        x = 0.25 * rng.chisquare(1, size=2 * (K - filled))
        x = x[(x >= low) & (x <= high)][:K - filled]
        out[filled:filled + x.size] = x
        filled += x.size
    return out


def gen_scenario_i(spec, rng):
    """Dataset and new-study effect for design I."""
    sigma2 = draw_sigma2_i(spec.K, rng)
    y = rng.normal(spec.mu, np.sqrt(sigma2 + spec.tau2))
    theta_new = spec.mu + np.sqrt(spec.tau2) * rng.standard_normal()
    return StudySet(y, sigma2), float(theta_new)


def draw_sigma2_ii(spec, rng):
    """Variances for design II; also returns the index of the altered study."""
    df = spec.n - 1
    sigma2 = spec.sigma2_mean * rng.chisquare(df, size=spec.K) / df
    k = -1
    if spec.scenario in ("IIb", "IIc"):
        k = int(rng.integers(spec.K))
        sigma2[k] = sigma2[k] / 10 if spec.scenario == "IIb" else sigma2[k] * 10
    return sigma2, k


def gen_scenario_ii(spec, rng):
    """Dataset and new-study effect for designs IIa, IIb and IIc."""
    if spec.scenario not in ("IIa", "IIb", "IIc"):
        raise ValueError(f"not a design II spec: {spec.scenario}")
    sigma2, _ = draw_sigma2_ii(spec, rng)
    y = rng.normal(spec.mu, np.sqrt(sigma2 + spec.tau2))
    theta_new = spec.mu + np.sqrt(spec.tau2) * rng.standard_normal()
    return StudySet(y, sigma2), float(theta_new)


def treatment_probability(p0, theta):
    """Treatment-arm risk whose odds ratio to ``p0`` is ``exp(theta)``."""
    e = np.exp(theta)
    return p0 * e / (1 - p0 + p0 * e)


def draw_tables_iii(spec, rng):
    theta = rng.normal(spec.mu, np.sqrt(spec.tau2), size=spec.K)
    n = rng.integers(20, 200, size=spec.K, endpoint=True)
    p0 = rng.uniform(0.05, 0.65, size=spec.K)
    p1 = treatment_probability(p0, theta)
    x0 = rng.binomial(n, p0)
    x1 = rng.binomial(n, p1)
    return TwoByTwoSet(x1, n, x0, n)


def gen_scenario_iii(spec, rng):
    """Dataset (log odds-ratios from simulated 2x2 tables) and new effect."""
    tables = draw_tables_iii(spec, rng)
    theta_new = spec.mu + np.sqrt(spec.tau2) * rng.standard_normal()
    return from_counts(tables), float(theta_new)


def generate(spec, rng):
    if spec.scenario == "I":
        return gen_scenario_i(spec, rng)
    if spec.scenario == "III":
        return gen_scenario_iii(spec, rng)
    return gen_scenario_ii(spec, rng)


# --------------------------------------------------------------------------
# coverage harness

def replication_streams(seed, r):
    """(data, bootstrap) generators of replication ``r``."""
    ss = np.random.SeedSequence(seed, spawn_key=(r,))
    return [np.random.default_rng(c) for c in ss.spawn(2)]


def _interval(method, s, alpha, B, rng):
    if method == "HTS":
        return pi_hts(s, alpha)
    if method == "HTS-HK":
        return pi_hts_reml(s, alpha, "HK")
    if method == "HTS-SJ":
        return pi_hts_reml(s, alpha, "SJ")
    return pi_proposed(s, alpha, B, rng)


def run_replication(spec, methods, B, alpha, seed, r):
    """One replication: per-method (contained, width) or None, and I^2."""
    g_data, g_boot = replication_streams(seed, r)
    s, theta_new = generate(spec, g_data)
    i2 = est.i_squared(est.cochran_q(s), s.K)
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for method in methods:
            try:
                res = _interval(method, s, alpha, B, g_boot)
            except (MethodUnavailable, NumericalError):
                out.append(None)
                continue
            out.append((res.contains(theta_new), res.width))
    return out, i2


def _run_block(args):
    spec, methods, B, alpha, seed, rs = args
    return [run_replication(spec, methods, B, alpha, seed, r) for r in rs]


def default_threads():
    """Worker count from PREDMETA_THREADS (0 or unset means one per CPU)."""
    n = int(os.environ.get("PREDMETA_THREADS", "0") or 0)
    return n if n > 0 else (os.cpu_count() or 1)


def coverage_study(spec, methods=METHODS, reps=1000, B=5000, alpha=0.05,
                   seed=0, threads=1):
    """Estimate the coverage of each method for one design cell.

    Parameters
    ----------
    spec : GenerativeSpec
    methods : sequence of str
        Any of ``"HTS", "HTS-HK", "HTS-SJ", "Proposed"``.
    reps : int
        Number of simulated meta-analyses.
    B : int
        Bootstrap size for the proposed interval.
    alpha : float
        One minus the nominal coverage.
    seed : int
        Root seed; replication ``r`` uses the substream keyed by ``r``.
    threads : int
        Worker processes; 0 means :func:`default_threads`. Results are
        identical for every value.

    Returns
    -------
    list of CoverageReport
        One per method, in the order given.
    """
    methods = tuple(methods)
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ValueError(f"unknown methods: {bad}")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    threads = default_threads() if threads == 0 else threads
    if threads <= 1:
        results = _run_block((spec, methods, B, alpha, seed, range(reps)))
    else:
        blocks = [(spec, methods, B, alpha, seed, rs)
                  for rs in np.array_split(np.arange(reps), threads * 4)
                  if rs.size]
        with ProcessPoolExecutor(threads) as pool:
            results = [x for part in pool.map(_run_block, blocks) for x in part]
    return summarize(spec, methods, results, B, alpha, seed)


def summarize(spec, methods, results, B, alpha, seed):
    """Reduce per-replication outcomes (in replication order) to reports."""
    reps = len(results)
    i2 = np.array([r[1] for r in results])
    reports = []
    for j, method in enumerate(methods):
        hits = [r[0][j] for r in results if r[0][j] is not None]
        n_valid = len(hits)
        if n_valid:
            covered = int(sum(bool(h[0]) for h in hits))
            cov = covered / n_valid
            mc_se = float(np.sqrt(cov * (1 - cov) / n_valid))
            width = float(np.mean([h[1] for h in hits]))
        else:
            covered, cov, mc_se, width = 0, float("nan"), float("nan"), float("nan")
        reports.append(CoverageReport(
            method=method, spec=spec, reps=reps, B=B, alpha=alpha,
            seed=seed, n_valid=n_valid, n_failed=reps - n_valid,
            covered=covered, coverage=cov, mc_se=mc_se, mean_width=width,
            mean_i2=float(i2.mean())))
    return reports


def mean_i2(spec, reps, seed=0):
    """Average sample I^2 (percent) over ``reps`` simulated datasets."""
    vals = np.empty(reps)
    for r in range(reps):
        g_data, _ = replication_streams(seed, r)
        s, _ = generate(spec, g_data)
        vals[r] = est.i_squared(est.cochran_q(s), s.K)
    return float(vals.mean())
