"""Study-level data containers for random-effects meta-analysis."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


def _frozen(values, dtype=float):
    arr = np.array(values, dtype=dtype, copy=True).ravel()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StudySet:
    """Effect estimates ``y`` with known within-study variances ``sigma2``.

    Parameters
    ----------
    y : array-like
        Per-study effect estimates, on whatever scale the analyst chose
        (log odds-ratio, SMD, ...).
    sigma2 : array-like
        Within-study variances, strictly positive.
    labels : sequence of str, optional
        Study identifiers; defaults to ``"1" .. "K"``.
    """

    y: np.ndarray
    sigma2: np.ndarray
    labels: tuple = field(default=None)

    def __post_init__(self):
        y = _frozen(self.y)
        s2 = _frozen(self.sigma2)
        if y.shape != s2.shape:
            raise DataError(
                f"y has {y.size} values but sigma2 has {s2.size}")
        if y.size < 2:
            raise DataError(f"need at least 2 studies, got {y.size}")
        if not np.all(np.isfinite(y)):
            raise DataError("effect estimates must be finite")
        if not np.all(np.isfinite(s2)) or np.any(s2 <= 0):
            bad = int(np.flatnonzero(~(np.isfinite(s2) & (s2 > 0)))[0])
            raise DataError(
                f"within-study variance of study {bad + 1} is not a "
                f"positive finite number: {s2[bad]!r}")
        labels = self.labels
        if labels is None:
            labels = tuple(str(i + 1) for i in range(y.size))
        else:
            labels = tuple(str(lab) for lab in labels)
            if len(labels) != y.size:
                raise DataError("labels must have one entry per study")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "sigma2", s2)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_se(cls, y, se, labels=None):
        """Build from standard errors instead of variances."""
        se = np.asarray(se, dtype=float)
        if np.any(~np.isfinite(se)) or np.any(se <= 0):
            raise DataError("standard errors must be positive and finite")
        return cls(y, se ** 2, labels)

    @property
    def K(self):
        return self.y.size

    @property
    def se(self):
        return np.sqrt(self.sigma2)

    def __len__(self):
        return self.y.size

    def __repr__(self):
        return f"StudySet(K={self.K})"


@dataclass(frozen=True, eq=False)
class TwoByTwoSet:
    """Event counts from K two-arm studies.

    ``x1`` events out of ``n1`` in the treatment arm and ``x0`` out of ``n0``
    in the control arm.
    """

    x1: np.ndarray
    n1: np.ndarray
    x0: np.ndarray
    n0: np.ndarray
    labels: tuple = field(default=None)

    def __post_init__(self):
        cols = {}
        for name in ("x1", "n1", "x0", "n0"):
            raw = np.asarray(getattr(self, name))
            arr = _frozen(raw, dtype=np.int64)
            if raw.dtype.kind == "f" and np.any(raw != arr):
                raise DataError(f"{name} must hold integer counts")
            cols[name] = arr
        k = cols["x1"].size
        if any(c.size != k for c in cols.values()):
            raise DataError("count columns must all have the same length")
        if k < 2:
            raise DataError(f"need at least 2 studies, got {k}")
        if np.any(cols["n1"] < 1) or np.any(cols["n0"] < 1):
            raise DataError("arm sizes must be at least 1")
        if np.any(cols["x1"] < 0) or np.any(cols["x0"] < 0):
            raise DataError("event counts must be nonnegative")
        if np.any(cols["x1"] > cols["n1"]) or np.any(cols["x0"] > cols["n0"]):
            raise DataError("event count exceeds arm size")
        for name, arr in cols.items():
            object.__setattr__(self, name, arr)
        labels = self.labels
        if labels is None:
            labels = tuple(str(i + 1) for i in range(k))
        object.__setattr__(self, "labels", tuple(str(lab) for lab in labels))

    @property
    def K(self):
        return self.x1.size

    def cells(self):
        """Return the (K, 4) array of cells: x1, n1-x1, x0, n0-x0."""
        return np.column_stack([self.x1, self.n1 - self.x1,
                                self.x0, self.n0 - self.x0])

    @property
    def needs_correction(self):
        """True if any cell of any table is empty."""
        return bool(np.any(self.cells() == 0))


def from_counts(tables):
    """Log odds-ratios and their variances from 2x2 tables.

    If any cell in any table is zero, 0.5 is added to every cell of *all*
    tables before computing both the estimates and the variances.

    Parameters
    ----------
    tables : TwoByTwoSet

    Returns
    -------
    StudySet
    """
    cells = tables.cells().astype(float)
    if tables.needs_correction:
        cells = cells + 0.5
    assert np.all(cells > 0)
    a, b, c, d = cells.T
    y = np.log(a * d / (b * c))
    sigma2 = 1 / a + 1 / b + 1 / c + 1 / d
    return StudySet(y, sigma2, tables.labels)
