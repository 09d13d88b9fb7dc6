"""Full analysis of one meta-analysis and its text/JSON/forest renderings."""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import estimators as est
from .errors import MethodUnavailable
from .predint import METHODS, ci_mean_dl, all_intervals

SCHEMA = "predmeta.analysis/1"


@dataclass
class AnalysisReport:
    """Point estimates, heterogeneity, the DL confidence interval and all
    four prediction intervals for one dataset."""

    studies: object
    fit: est.HeterogeneityFit
    ci: object
    intervals: dict
    alpha: float
    B: int
    seed: int
    input_format: str = "effects"
    notes: list = field(default_factory=list)

    @property
    def K(self):
        return self.fit.K

    def lengths(self):
        return {m: (r.width if not isinstance(r, Exception) else None)
                for m, r in self.intervals.items()}

    def to_dict(self):
        f = self.fit
        intervals = []
        for method in METHODS:
            res = self.intervals[method]
            if isinstance(res, Exception):
                intervals.append({"method": method, "available": False,
                                  "reason": str(res)})
            else:
                d = {"available": True}
                d.update(res.to_dict())
                intervals.append(d)
        return _clean({
            "schema": SCHEMA,
            "input_summary": {"K": self.K, "format": self.input_format,
                              "labels": list(self.studies.labels),
                              "notes": list(self.notes)},
            "estimates": {
                "mu_dl": f.mu_hat, "se_mu_dl": f.se_mu,
                "ci_dl": [self.ci.lower, self.ci.upper],
                "tau2_dl": f.tau2_dl, "tau2_udl": f.tau2_udl,
                "tau2_reml": f.tau2_reml,
                "reml_iterations": f.reml_iterations,
                "reml_converged": f.reml_converged,
                "mu_reml": f.mu_reml, "q": f.q, "i2": f.i2,
                "p_het": f.p_het,
            },
            "intervals": intervals,
            "settings": {"alpha": self.alpha, "B": self.B, "seed": self.seed},
        })

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_table(self):
        """Plain-text summary, one line per quantity."""
        f = self.fit
        level = f"{100 * (1 - self.alpha):g}%"
        lines = [
            f"K                             {self.K}",
            f"mu (DL)                       {f.mu_hat:.4f}",
            f"{level} CI (DL)                 "
            f"[{self.ci.lower:.4f}, {self.ci.upper:.4f}]",
            f"tau2 (DL)                     {f.tau2_dl:.4f}",
            f"tau2 (REML)                   {f.tau2_reml:.4f}",
            f"I2 (DL)                       {f.i2:.1f}%",
            f"P-value for heterogeneity     {_pval(f.p_het)}",
            "",
            f"{level} prediction intervals",
        ]
        for method in METHODS:
            res = self.intervals[method]
            if isinstance(res, Exception):
                lines.append(f"  {method:<9} unavailable ({res})")
            else:
                lines.append(f"  {method:<9} [{res.lower:.4f}, "
                             f"{res.upper:.4f}]  length {res.width:.4f}")
        lines.append(f"  (bootstrap B={self.B}, seed={self.seed})")
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines) + "\n"

    def forest_rows(self):
        """Plot-ready rows: one per study, then the CI and each PI."""
        z = stats.norm.ppf(0.975)
        rows = []
        for lab, y, se in zip(self.studies.labels, self.studies.y,
                              self.studies.se):
            rows.append(("study", lab, y, y - z * se, y + z * se, ""))
        rows.append(("summary", "CI", self.ci.center, self.ci.lower,
                     self.ci.upper, "DL"))
        for method in METHODS:
            res = self.intervals[method]
            if isinstance(res, Exception):
                continue
            rows.append(("summary", "PI", res.center, res.lower, res.upper,
                         method))
        return rows


FOREST_FIELDS = ("kind", "label", "estimate", "lower", "upper", "method")


def _pval(p):
    return "<0.001" if p < 0.001 else f"{p:.3f}"


def _clean(obj):
    """Make floats JSON-safe (NaN/inf -> null, numpy scalars -> Python)."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def analyze(studies, alpha=0.05, B=50_000, seed=0, threads=1,
            input_format="effects", notes=()):
    """Run the complete analysis of one dataset.

    HTS-family intervals are marked unavailable when K < 3; the bootstrap
    interval is always computed.
    """
    fit = est.fit_heterogeneity(studies)
    intervals = all_intervals(studies, alpha, B, seed, threads)
    notes = list(notes)
    for m in METHODS:
        if isinstance(intervals[m], MethodUnavailable):
            notes.append(f"{m} unavailable: K={studies.K} < 3")
    return AnalysisReport(studies, fit, ci_mean_dl(studies, alpha), intervals,
                          alpha, B, seed, input_format, notes)
