#!/usr/bin/env python3
"""Tour of the numerical kernels every filter in the package shares.

Run:  python3 demos/01_numerics_toolbox.py
"""
import numpy as np

from dualtrack import (
    effective_sample_size,
    gaussian_logpdf,
    normalize_logweights,
    sample_gaussian,
    stream,
    systematic_resample,
    weighted_moments,
)

rng = stream(2024)

print("== Gaussian log-density ==")
cov = np.array([[4.0, 0.5], [0.5, 1.0]])
for r in ([0.0, 0.0], [2.0, 0.0], [4.0, 1.0]):
    print(f"  logpdf(residual={r}) = {gaussian_logpdf(np.array(r), cov):+.4f}")
print("  batches work too:",
      np.round(gaussian_logpdf(np.array([[0.0, 0.0], [2.0, 0.0]]), cov), 4))

print("\n== Cholesky sampling ==")
draws = sample_gaussian(np.array([10.0, -5.0]), cov, rng, size=50_000)
print("  sample mean:", np.round(draws.mean(axis=0), 3))
print("  sample cov :\n", np.round(np.cov(draws.T), 3))

print("\n== Log-domain weights ==")
# likelihoods spanning 60 orders of magnitude stay usable in log space
logw = np.array([-3.0, -80.0, -1.0, -140.0])
w = np.exp(normalize_logweights(logw))
print("  normalized:", np.round(w, 6))
print(f"  effective sample size: {effective_sample_size(w):.2f} of {len(w)}")

print("\n== Systematic resampling ==")
weights = np.array([0.05, 0.15, 0.5, 0.3])
for u0 in (0.0, 0.5, 0.93):
    idx = systematic_resample(weights, 8, u0)
    print(f"  u0={u0:.2f} -> ancestors {list(idx)}")
print("  copy counts stay within one of 8*w =", list(np.round(8 * weights, 2)))

print("\n== Weighted moments ==")
cloud = sample_gaussian(np.array([3.0, 1.0]), np.diag([2.0, 0.5]), rng, size=4000)
mean, scatter = weighted_moments(cloud, np.full(4000, 1 / 4000))
print("  mean   :", np.round(mean, 3))
print("  scatter:\n", np.round(scatter, 3))
