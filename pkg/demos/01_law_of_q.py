"""
The exact law of Cochran's Q
============================

Under the random-effects model Q is a quadratic form in normal variables.
Its distribution is a positive mixture of chi-square(1) variables with
weights given by the nonzero eigenvalues of S(tau2). This script compares
the series CDF with a brute-force simulation.
"""

# %%
# Five studies with unequal within-study variances.
import numpy as np

from predmeta import eigen_spectrum, q_cdf

sigma2 = np.array([0.05, 0.30, 0.12, 0.50, 0.02])
tau2 = 0.08

spec = eigen_spectrum(sigma2, tau2)
print("eigenvalues:", np.round(spec.lambdas, 4))
print("trace     :", round(spec.trace, 4))

# %%
# Simulate Q directly from the model and compare.
rng = np.random.default_rng(1)
y = rng.normal(0.0, np.sqrt(sigma2 + tau2), size=(200_000, sigma2.size))
w = 1 / sigma2
mu = y @ w / w.sum()
Q = np.sum(w * (y - mu[:, None]) ** 2, axis=1)

print(f"{'q':>6} {'series':>10} {'simulated':>10}")
for q in (0.5, 2.0, 4.0, 8.0, 16.0):
    print(f"{q:6.1f} {q_cdf(q, sigma2, tau2):10.5f} {np.mean(Q <= q):10.5f}")

# %%
# For fixed q the CDF falls as tau2 grows, which is what makes the
# confidence distribution of tau2 well defined.
for t in (0.0, 0.05, 0.2, 1.0):
    print(f"tau2={t:<5} P(Q <= 4) = {q_cdf(4.0, sigma2, t):.5f}")
