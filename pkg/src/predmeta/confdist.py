"""Confidence distribution for tau^2 built from the exact law of Q.

``H(tau2) = 1 - F_Q(q_obs; tau2)`` is nondecreasing in ``tau2``. Draws from
it are obtained by inverting ``H`` at uniform variates; draws that fall
below ``H(0)`` are truncated to zero.

Each inverse is a deterministic function of its own uniform variate (the
bracketing grid depends only on the data), so batches may be split across
workers without changing any value.
"""

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import NumericalError
from .qdist import (AccuracyParams, _centering_matrix, _q_cdf_kernel,
                    _raise_for_status)

#: absolute tolerance of the inversion on the probability scale
INVERSION_TOL = 1e-8
#: accuracy of the CDF evaluations used inside the inversion; tighter than
#: INVERSION_TOL so the residual is meaningful
INVERSION_ACCURACY = AccuracyParams(eps=1e-11)
_UPPER_TARGET = 1.0 - 1e-10
_MAX_DOUBLINGS = 400
_BRACKET_FAILURE = 10


@numba.njit(cache=True, nogil=True)
def _h(A, sigma2, q, tau2, eps, max_terms):
    if q <= 0.0:
        return 1.0, 0
    prob, bound, terms, status = _q_cdf_kernel(A, sigma2, tau2, q, eps,
                                               max_terms)
    h = 1.0 - prob
    if h > 1.0:
        h = 1.0
    elif h < 0.0:
        h = 0.0
    return h, status


@numba.njit(cache=True, nogil=True)
def _grid(A, sigma2, q, start, eps, max_terms):
    """Geometric bracketing nodes 0 < start*2^-24 < ... < hi with H values.

    ``hi`` is the first doubling of ``start`` where H exceeds _UPPER_TARGET.
    """
    n_down = 24
    xs = np.empty(n_down + _MAX_DOUBLINGS + 2)
    hs = np.empty_like(xs)
    xs[0] = 0.0
    h, st = _h(A, sigma2, q, 0.0, eps, max_terms)
    if st != 0:
        return xs[:1], hs[:1], st
    hs[0] = h
    n = 1
    x = start * 2.0 ** (-n_down)
    for i in range(n_down + _MAX_DOUBLINGS + 1):
        h, st = _h(A, sigma2, q, x, eps, max_terms)
        if st != 0:
            return xs[:n], hs[:n], st
        xs[n] = x
        hs[n] = h
        n += 1
        if x >= start and h > _UPPER_TARGET:
            return xs[:n], hs[:n], 0
        x *= 2.0
    return xs[:n], hs[:n], 0


@numba.njit(cache=True, nogil=True)
def _brent(A, sigma2, q, u, a, fa, b, fb, eps, max_terms, ftol):
    """Zero of H(x) - u on [a, b] where fa < 0 < fb (Brent's zeroin)."""
    c = a
    fc = fa
    d = b - a
    e = d
    for _ in range(300):
        if (fb > 0.0) == (fc > 0.0):
            c = a
            fc = fa
            d = b - a
            e = d
        if abs(fc) < abs(fb):
            a = b
            b = c
            c = a
            fa = fb
            fb = fc
            fc = fa
        tol = 4.0 * 2.220446049250313e-16 * abs(b) + 1e-300
        m = 0.5 * (c - b)
        if abs(fb) <= ftol or abs(m) <= tol:
            return b, fb, 0
        if abs(e) >= tol and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * m * s
                qq = 1.0 - s
            else:
                qq = fa / fc
                r = fb / fc
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0))
                qq = (qq - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                qq = -qq
            else:
                p = -p
            if 2.0 * p < min(3.0 * m * qq - abs(tol * qq), abs(e * qq)):
                e = d
                d = p / qq
            else:
                d = m
                e = m
        else:
            d = m
            e = m
        a = b
        fa = fb
        if abs(d) > tol:
            b += d
        elif m > 0.0:
            b += tol
        else:
            b -= tol
        h, st = _h(A, sigma2, q, b, eps, max_terms)
        if st != 0:
            return b, fb, st
        fb = h - u
    return b, fb, 0


@numba.njit(cache=True, nogil=True)
def _invert(A, sigma2, q, us, xs, hs, eps, max_terms, ftol):
    """Inverse of H at each u; zero where u <= H(0).

    Returns (roots, residuals, status, index of the failing u).
    """
    n = us.size
    out = np.zeros(n)
    resid = np.zeros(n)
    h0 = hs[0]
    top = xs.size - 1
    for i in range(n):
        u = us[i]
        if u <= h0:
            continue
        # locate the grid cell by bisection on the monotone node values
        lo = 0
        hi = top
        if hs[top] < u:
            # beyond the grid: keep doubling for this u alone
            b = xs[top]
            hb = hs[top]
            a = b
            ha = hb
            k = 0
            while hb < u:
                a = b
                ha = hb
                b *= 2.0
                hb, st = _h(A, sigma2, q, b, eps, max_terms)
                if st != 0:
                    return out, resid, st, i
                k += 1
                if k > _MAX_DOUBLINGS:
                    return out, resid, _BRACKET_FAILURE, i
        else:
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if hs[mid] < u:
                    lo = mid
                else:
                    hi = mid
            a = xs[lo]
            ha = hs[lo]
            b = xs[hi]
            hb = hs[hi]
        if hb == u:
            out[i] = b
            continue
        x, fx, st = _brent(A, sigma2, q, u, a, ha - u, b, hb - u,
                           eps, max_terms, ftol)
        if st != 0:
            return out, resid, st, i
        out[i] = x
        resid[i] = fx
    return out, resid, 0, -1


@dataclass(frozen=True, eq=False)
class ConfDist:
    """Confidence distribution of tau^2 given the observed Q.

    Parameters
    ----------
    q_obs : float
        Observed Cochran's Q.
    sigma2 : array-like
        Within-study variances of the K studies.
    acc : AccuracyParams
        Accuracy of the CDF evaluations.
    tol : float
        Absolute tolerance of the inversion on the probability scale.
    """

    q_obs: float
    sigma2: np.ndarray
    acc: AccuracyParams = INVERSION_ACCURACY
    tol: float = INVERSION_TOL
    h0: float = field(init=False)
    _A: np.ndarray = field(init=False, repr=False)
    _cache: tuple = field(init=False, default=None, repr=False)

    def __post_init__(self):
        s2 = np.array(self.sigma2, dtype=float).ravel()
        if s2.size < 2 or np.any(~(s2 > 0)):
            raise ValueError("need >= 2 positive within-study variances")
        if not self.q_obs >= 0:
            raise ValueError("q_obs must be >= 0")
        s2.setflags(write=False)
        object.__setattr__(self, "sigma2", s2)
        object.__setattr__(self, "q_obs", float(self.q_obs))
        object.__setattr__(self, "_A", _centering_matrix(s2))
        object.__setattr__(self, "h0", self(0.0))

    @classmethod
    def from_studies(cls, s, **kwargs):
        from .estimators import cochran_q
        return cls(cochran_q(s), s.sigma2, **kwargs)

    def __call__(self, tau2):
        """H(tau2)."""
        if tau2 < 0:
            raise ValueError("tau2 must be >= 0")
        h, st = _h(self._A, self.sigma2, self.q_obs, float(tau2),
                   self.acc.eps, self.acc.max_terms)
        _raise_for_status(st, 1.0 - h, float("nan"), self.acc.max_terms)
        return h

    def _start(self):
        v = 1.0 / self.sigma2
        s1 = v.sum()
        udl = (self.q_obs - (v.size - 1)) / (s1 - np.sum(v * v) / s1)
        return max(1.0, 4.0 * udl)

    def grid(self):
        """Bracketing nodes and H values (computed once, then cached)."""
        if self._cache is None:
            xs, hs, st = _grid(self._A, self.sigma2, self.q_obs,
                               self._start(), self.acc.eps,
                               self.acc.max_terms)
            _raise_for_status(st, float("nan"), float("nan"),
                              self.acc.max_terms)
            object.__setattr__(self, "_cache", (xs, hs))
        return self._cache

    def invert(self, u):
        """tau2 draws for an array of uniforms ``u`` (same shape).

        Raises
        ------
        NumericalError
            If no finite upper bracket exists for some ``u``.
        """
        u = np.asarray(u, dtype=float)
        flat = np.ascontiguousarray(u.ravel())
        if np.any(~((flat >= 0) & (flat < 1))):
            raise ValueError("uniform variates must lie in [0, 1)")
        if self.q_obs <= 0:
            return np.zeros_like(u)
        xs, hs = self.grid()
        out, resid, st, bad = _invert(self._A, self.sigma2, self.q_obs, flat,
                                      xs, hs, self.acc.eps,
                                      self.acc.max_terms, 0.5 * self.tol)
        if st == _BRACKET_FAILURE:
            raise NumericalError(
                f"could not bracket u={flat[bad]!r}: H stays below it up to "
                f"tau2={xs[-1] * 2.0 ** _MAX_DOUBLINGS:.3g} "
                f"(q_obs={self.q_obs:.6g}, H(0)={self.h0:.6g})")
        _raise_for_status(st, float("nan"), float("nan"), self.acc.max_terms)
        return out.reshape(u.shape)


def h_eval(cd, tau2):
    """Evaluate the confidence distribution at ``tau2 >= 0``."""
    return cd(tau2)


def sample_tau2(cd, u):
    """Inverse of H at a single uniform ``u``; 0 when ``H(0) > u``."""
    if not 0 < u < 1:
        raise ValueError("u must lie in (0, 1)")
    return float(cd.invert(np.array([u]))[0])


def sample_tau2_batch(cd, rng, B):
    """``B`` draws of tau^2 using uniforms from the caller's generator."""
    if B < 1:
        raise ValueError("B must be >= 1")
    return cd.invert(rng.random(B))
