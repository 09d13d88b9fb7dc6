"""Prediction intervals for random-effects meta-analysis.

The bootstrap interval draws the heterogeneity variance from a confidence
distribution built on the exact law of Cochran's Q; the classic HTS,
HTS-HK and HTS-SJ intervals are provided for comparison, together with a
simulation harness for coverage studies.
"""

__version__ = "0.1.0"

from .confdist import ConfDist, h_eval, sample_tau2, sample_tau2_batch
from .errors import (ConvergenceError, DataError, MethodUnavailable,
                     NumericalError, PredMetaError)
from .estimators import (HeterogeneityFit, cochran_q, fit_heterogeneity,
                         i_squared, pooled_mean, q_test_pvalue, se_hartung,
                         se_hk, se_sj, tau2_dl, tau2_reml, tau2_udl)
from .model import StudySet, TwoByTwoSet, from_counts
from .predint import (METHODS, PredictionResult, ci_mean_dl, pi_hts,
                      pi_hts_reml, pi_proposed)
from .qdist import (AccuracyParams, EigenSpectrum, eigen_spectrum, q_cdf,
                    wchisq_cdf)
from .report import AnalysisReport, analyze
from .sim import (CoverageReport, GenerativeSpec, coverage_study,
                  gen_scenario_i, gen_scenario_ii, gen_scenario_iii)
