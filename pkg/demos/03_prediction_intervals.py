"""
Four prediction intervals for one meta-analysis
===============================================

The HTS interval plugs the DerSimonian-Laird estimate into a t(K-2)
interval. HTS-HK and HTS-SJ use REML with the Hartung-Knapp and
Sidik-Jonkman standard errors. The bootstrap interval propagates the
uncertainty in tau2 through its confidence distribution.
"""

# %%
from predmeta import StudySet, analyze

s = StudySet([0.12, 0.55, -0.20, 0.81, 0.33, 0.05, 0.60],
             [0.04, 0.09, 0.06, 0.12, 0.03, 0.05, 0.08],
             labels=["Ames", "Bode", "Cruz", "Dahl", "Egan", "Fink", "Gale"])
report = analyze(s, alpha=0.05, B=20_000, seed=11)
print(report.to_table())

# %%
# The same numbers as plot-ready rows for a forest plot.
for row in report.forest_rows():
    kind, label, est, lo, hi, method = row
    print(f"{kind:<8}{label:<6}{est:8.3f} [{lo:7.3f}, {hi:7.3f}] {method}")

# %%
# With only two studies the t(K-2) intervals do not exist; the bootstrap
# interval is still available.
two = StudySet([0.1, 0.6], [0.05, 0.08])
print(analyze(two, B=5000, seed=1).to_table())
