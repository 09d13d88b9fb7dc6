"""Exact distribution of Cochran's Q under the random-effects model.

Q is a quadratic form in normal variables, so it is distributed as a
positive linear combination of independent chi^2(1) variables whose weights
are the eigenvalues of ``S = Sigma^(1/2) A Sigma^(1/2)``. The CDF of such a
combination is evaluated with Farebrother's (AS 204) form of Ruben's
chi-square mixture series.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

from .errors import ConvergenceError, NumericalError

#: relative threshold below which an eigenvalue of S counts as the
#: structural zero
DROP_THRESHOLD = 1e-10

# status codes returned by the compiled kernel
_OK, _NO_CONVERGENCE, _UNDERFLOW = 0, 1, 2


@dataclass(frozen=True)
class AccuracyParams:
    """Accuracy controls for the chi-square mixture series.

    eps : target absolute error of the CDF value.
    max_terms : number of series terms allowed before giving up.
    """

    eps: float = 1e-8
    max_terms: int = 100_000

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")


DEFAULT_ACCURACY = AccuracyParams()


class CdfValue(NamedTuple):
    """A CDF value with its truncation error bound and the terms used."""

    prob: float
    error: float
    terms: int


@dataclass(frozen=True, eq=False)
class EigenSpectrum:
    """Retained (positive) eigenvalues of S, sorted descending.

    ``trace`` is the sum over all K eigenvalues before the structural zero
    was dropped.
    """

    lambdas: np.ndarray
    trace: float

    @property
    def rank(self):
        return self.lambdas.size


# --------------------------------------------------------------------------
# compiled kernels

@numba.njit(cache=True, nogil=True)
def _chi2_cdf_start(n, y):
    """P(n/2, y) for integer n >= 1 (regularized lower incomplete gamma)."""
    if y <= 0.0:
        return 0.0
    if n % 2 == 1:
        p = math.erf(math.sqrt(y))
        s = 0.5
    else:
        p = -math.expm1(-y)
        s = 1.0
    # P(s + 1, y) = P(s, y) - y^s e^-y / Gamma(s + 1)
    while s < 0.5 * n:
        p -= math.exp(s * math.log(y) - y - math.lgamma(s + 1.0))
        s += 1.0
    return p


@numba.njit(cache=True, nogil=True)
def _ruben_series(lam, q, eps, max_terms):
    """CDF of sum(lam_j * chi2_j(1)) at q.

    Returns (prob, error_bound, terms, status).
    """
    r = lam.size
    if q <= 0.0:
        return 0.0, 0.0, 0, _OK
    beta = lam[0]
    for j in range(1, r):
        if lam[j] < beta:
            beta = lam[j]
    gam = np.empty(r)
    log_a0 = 0.0
    for j in range(r):
        gam[j] = 1.0 - beta / lam[j]
        log_a0 += 0.5 * math.log(beta / lam[j])
    if log_a0 < -700.0:
        return 0.0, 1.0, 0, _UNDERFLOW

    y = 0.5 * q / beta           # chi2_nu(x) cdf == P(nu/2, x/2)
    log_y = math.log(y)
    cap = 256
    a = np.empty(cap)
    g = np.empty(cap)
    powg = gam.copy()
    a[0] = math.exp(log_a0)
    shape = 0.5 * r
    cdf = _chi2_cdf_start(r, y)  # P(shape, y)
    total = a[0] * cdf
    mass = a[0]
    k = 0
    while True:
        # cdf of the next (higher) chi-square in the mixture
        cdf -= math.exp(shape * log_y - y - math.lgamma(shape + 1.0))
        shape += 1.0
        if cdf < 0.0:
            cdf = 0.0
        rest = 1.0 - mass
        if rest < 0.0:
            rest = 0.0
        bound = rest * cdf
        if bound <= eps:
            return total, bound, k + 1, _OK
        if k + 1 >= max_terms:
            return total, bound, k + 1, _NO_CONVERGENCE
        k += 1
        if k >= cap:
            cap *= 2
            a2 = np.empty(cap)
            g2 = np.empty(cap)
            a2[:k] = a[:k]
            g2[:k] = g[:k]
            a = a2
            g = g2
        gk = 0.0
        for j in range(r):
            gk += powg[j]
            powg[j] *= gam[j]
        g[k] = 0.5 * gk
        acc = 0.0
        for i in range(1, k + 1):
            acc += g[i] * a[k - i]
        a[k] = acc / k
        total += a[k] * cdf
        mass += a[k]


@numba.njit(cache=True, nogil=True)
def _centering_matrix(sigma2):
    k = sigma2.size
    v = 1.0 / sigma2
    vp = v.sum()
    A = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            A[i, j] = -v[i] * v[j] / vp
        A[i, i] += v[i]
    return A


@numba.njit(cache=True, nogil=True)
def _spectrum(A, sigma2, tau2):
    """Eigenvalues of S(tau2) with the smallest (structural zero) removed."""
    k = sigma2.size
    root = np.sqrt(sigma2 + tau2)
    S = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            S[i, j] = root[i] * A[i, j] * root[j]
    ev = np.linalg.eigvalsh(S)      # ascending
    return ev[1:]


@numba.njit(cache=True, nogil=True)
def _q_cdf_kernel(A, sigma2, tau2, q, eps, max_terms):
    lam = _spectrum(A, sigma2, tau2)
    top = lam[lam.size - 1]
    for j in range(lam.size):
        if lam[j] < DROP_THRESHOLD * top:
            lam[j] = DROP_THRESHOLD * top
    return _ruben_series(lam, q, eps, max_terms)


# --------------------------------------------------------------------------
# public API

def _raise_for_status(status, prob, bound, max_terms):
    if status == _NO_CONVERGENCE:
        raise ConvergenceError(
            f"chi-square mixture series did not reach the target accuracy "
            f"in {max_terms} terms (partial={prob:.10g}, bound={bound:.3g})",
            partial=prob, bound=bound)
    if status == _UNDERFLOW:
        raise NumericalError(
            "eigenvalue spread too large: leading mixture weight underflows")


def centering_matrix(sigma2):
    """The matrix A with ``Q = y' A y``: ``diag(v) - v v'/sum(v)``."""
    return _centering_matrix(np.asarray(sigma2, dtype=float))


def eigen_spectrum(sigma2, tau2):
    """Eigenvalues of ``Sigma^(1/2) A Sigma^(1/2)`` driving the law of Q.

    Exactly one eigenvalue is structurally zero and is dropped; the
    remaining K-1 are returned in descending order.
    """
    sigma2 = np.asarray(sigma2, dtype=float)
    if sigma2.size < 2:
        raise ValueError("need at least 2 studies")
    if np.any(sigma2 <= 0):
        raise ValueError("within-study variances must be positive")
    if tau2 < 0:
        raise ValueError("tau2 must be >= 0")
    A = _centering_matrix(sigma2)
    root = np.sqrt(sigma2 + tau2)
    S = root[:, None] * A * root[None, :]
    S = 0.5 * (S + S.T)
    ev = np.linalg.eigvalsh(S)[::-1]
    small = ev < DROP_THRESHOLD * ev[0]
    if small.sum() != 1:
        raise NumericalError(
            f"expected exactly one null eigenvalue of S, found "
            f"{int(small.sum())}; the input is numerically degenerate")
    lam = ev[~small].copy()
    lam.setflags(write=False)
    return EigenSpectrum(lam, float(ev.sum()))


def wchisq_cdf(lambdas, q, acc=DEFAULT_ACCURACY):
    """P(sum_k lambdas[k] * chi2_k(1) <= q) for positive weights.

    Returns
    -------
    CdfValue
        ``(prob, error, terms)`` where ``error`` bounds the truncation
        error of ``prob`` and is at most ``acc.eps``.

    Raises
    ------
    ConvergenceError
        If ``acc.max_terms`` terms do not reach ``acc.eps``.
    """
    lam = np.asarray(lambdas, dtype=float).ravel()
    if lam.size == 0 or np.any(~(lam > 0)) or np.any(~np.isfinite(lam)):
        raise ValueError("weights must be positive and finite")
    q = float(q)
    if not np.isfinite(q):
        if q > 0:
            return CdfValue(1.0, 0.0, 0)
        raise ValueError("q must not be nan or -inf")
    prob, bound, terms, status = _ruben_series(lam, q, acc.eps, acc.max_terms)
    _raise_for_status(status, prob, bound, acc.max_terms)
    return CdfValue(min(max(prob, 0.0), 1.0), bound, terms)


def q_cdf(q, sigma2, tau2, acc=DEFAULT_ACCURACY):
    """Exact CDF of Cochran's Q at ``q`` when the heterogeneity is ``tau2``."""
    if q <= 0:
        return 0.0
    spec = eigen_spectrum(sigma2, tau2)
    return wchisq_cdf(spec.lambdas, q, acc).prob
