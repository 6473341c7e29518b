"""Numerical kernels shared by every filter in the package.

Gaussian log-density, Cholesky-based sampling, log-domain weight
normalization, systematic resampling and weighted moment estimation.
All routines accept plain ``numpy`` arrays and are pure given their
generator argument.  Weights are kept in the natural-log domain up to
the moment probabilities are actually needed, which keeps clouds of
several thousand particles away from exponent underflow.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AllWeightsDegenerate,
    DimensionMismatch,
    EmptyInput,
    InvalidWeights,
    NonPositiveDefinite,
)

Array = np.ndarray

# One-shot diagonal jitter applied when a covariance fails to factorize,
# relative to the mean diagonal magnitude.
CHOLESKY_JITTER = 1e-9


@dataclass
class CholStats:
    """Mutable counter for how often the jitter retry was needed."""

    jitter_count: int = 0


def cholesky_psd(cov: Array, stats: CholStats | None = None) -> Array:
    """Lower Cholesky factor of a symmetric PSD matrix.

    Parameters
    ----------
    cov : ndarray
        Symmetric positive semi-definite matrix (n, n).  The all-zero
        matrix is accepted and factors to zero.
    stats : CholStats, optional
        If given, ``jitter_count`` is incremented when the jitter retry
        was required.

    Returns
    -------
    ndarray
        Lower-triangular L with ``L @ L.T == cov`` (up to jitter).

    Raises
    ------
    NonPositiveDefinite
        If factorization fails even after one jitter retry.
    """
    cov = np.asarray(cov, dtype=float)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    n = cov.shape[0]
    tr = float(np.trace(cov))
    if tr <= 0.0:
        if not cov.any():
            return np.zeros_like(cov)
        raise NonPositiveDefinite("covariance has non-positive trace")
    jitter = CHOLESKY_JITTER * tr / n
    try:
        factor = np.linalg.cholesky(cov + jitter * np.eye(n))
    except np.linalg.LinAlgError:
        raise NonPositiveDefinite(
            f"Cholesky failed after jitter {jitter:.3e}"
        ) from None
    if stats is not None:
        stats.jitter_count += 1
    return factor


def gaussian_logpdf(residual: Array, cov: Array) -> float | Array:
    """Log-density of N(0, cov) evaluated at one or many residuals.

    Parameters
    ----------
    residual : ndarray
        Either a single residual of shape (n,) or a batch (N, n).
    cov : ndarray
        Covariance (n, n), positive definite after the jitter policy.

    Returns
    -------
    float or ndarray
        ``-(n/2) log(2 pi) - (1/2) log det(cov) - (1/2) r^T cov^{-1} r``,
        scalar for a single residual, shape (N,) for a batch.
    """
    residual = np.asarray(residual, dtype=float)
    single = residual.ndim == 1
    res2d = np.atleast_2d(residual)
    n = res2d.shape[1]
    factor = cholesky_psd(cov)
    diag = np.diag(factor)
    if np.any(diag <= 0.0):
        raise NonPositiveDefinite("covariance is singular, log-density undefined")
    # non-finite residuals legitimately map to zero-weight particles, so
    # the inf/nan arithmetic below must not warn
    with np.errstate(invalid="ignore", over="ignore"):
        if n == 2:
            # unrolled forward substitution; this is the per-particle hot path
            y0 = res2d[:, 0] / factor[0, 0]
            y1 = (res2d[:, 1] - factor[1, 0] * y0) / factor[1, 1]
            quad = y0 * y0 + y1 * y1
        else:
            # solve L y = r for each residual; the quadratic form is |y|^2
            y = np.linalg.solve(factor, res2d.T)
            quad = np.sum(y * y, axis=0)
    logdet = 2.0 * np.sum(np.log(diag))
    out = -0.5 * (n * np.log(2.0 * np.pi) + logdet + quad)
    return float(out[0]) if single else out


def sample_gaussian(
    mean: Array,
    cov: Array,
    rng: np.random.Generator,
    size: int | None = None,
) -> Array:
    """Draw from N(mean, cov) using the Cholesky factor.

    Parameters
    ----------
    mean : ndarray
        Mean vector (n,).
    cov : ndarray
        PSD covariance (n, n); the zero matrix returns ``mean`` exactly.
    rng : numpy.random.Generator
        Stream to consume.  Exactly one ``standard_normal`` call is made
        regardless of covariance, so draw order is stable.
    size : int, optional
        If given, draw that many iid samples, shape (size, n).

    Returns
    -------
    ndarray
        Sample of shape (n,) or (size, n).
    """
    mean = np.asarray(mean, dtype=float)
    factor = cholesky_psd(cov)
    shape = (mean.size,) if size is None else (size, mean.size)
    u = rng.standard_normal(shape)
    return mean + u @ factor.T


def logsumexp(logw: Array) -> float:
    """Stable log of the sum of exponentials of ``logw``."""
    logw = np.asarray(logw, dtype=float)
    m = np.max(logw)
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.sum(np.exp(logw - m))))


def normalize_logweights(logw: Array) -> Array:
    """Normalize log-weights so their exponentials sum to one.

    Shifts by the maximum before exponentiating, so the result is
    invariant to adding any constant to all inputs.  Entries that are
    NaN are treated as -inf (zero weight).

    Raises
    ------
    AllWeightsDegenerate
        If no entry is finite.
    """
    logw = np.asarray(logw, dtype=float)
    logw = np.where(np.isnan(logw), -np.inf, logw)
    if not np.any(np.isfinite(logw)):
        raise AllWeightsDegenerate("no finite log-weight to normalize")
    return logw - logsumexp(logw)


def systematic_resample(weights: Array, n_out: int, u0: float) -> Array:
    """Select ancestor indices by systematic (stratified-grid) resampling.

    Positions ``(j + u0) / n_out`` for j = 0..n_out-1 are matched against
    the cumulative weight sum, so particle i is copied either
    ``floor(n_out * w_i)`` or ``ceil(n_out * w_i)`` times.

    Parameters
    ----------
    weights : ndarray
        Probabilities summing to one within 1e-9.
    n_out : int
        Number of ancestors to draw (>= 1).
    u0 : float
        Stratification offset in [0, 1).

    Returns
    -------
    ndarray
        Integer ancestor indices, shape (n_out,), non-decreasing.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.size == 0:
        raise EmptyInput("no weights to resample from")
    if np.any(weights < 0.0):
        raise InvalidWeights("negative resampling weight")
    total = float(np.sum(weights))
    if abs(total - 1.0) > 1e-9:
        raise InvalidWeights(f"weights sum to {total!r}, expected 1")
    if n_out < 1:
        raise InvalidWeights("n_out must be >= 1")
    if not 0.0 <= u0 < 1.0:
        raise InvalidWeights("u0 must lie in [0, 1)")
    positions = (np.arange(n_out) + u0) / n_out
    csum = np.cumsum(weights)
    csum[-1] = 1.0  # guard against round-off at the top end
    return np.searchsorted(csum, positions, side="right")


def weighted_moments(particles: Array, weights: Array) -> tuple[Array, Array]:
    """Weighted mean and covariance of a particle cloud.

    Parameters
    ----------
    particles : ndarray
        Cloud of shape (N, n).
    weights : ndarray
        Probabilities of shape (N,), summing to one.

    Returns
    -------
    (mean, cov)
        ``mean = sum_i w_i x_i`` of shape (n,) and the weighted scatter
        ``cov = sum_i w_i (x_i - mean)(x_i - mean)^T`` of shape (n, n),
        symmetrized.  Noise covariances are the caller's business.
    """
    particles = np.asarray(particles, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if particles.ndim != 2:
        particles = np.atleast_2d(particles)
    if particles.shape[0] == 0:
        raise EmptyInput("no particles")
    if weights.shape[0] != particles.shape[0]:
        raise DimensionMismatch(
            f"{particles.shape[0]} particles vs {weights.shape[0]} weights"
        )
    mean = weights @ particles
    centered = particles - mean
    cov = centered.T @ (centered * weights[:, None])
    cov = 0.5 * (cov + cov.T)
    return mean, cov


def effective_sample_size(weights: Array) -> float:
    """Effective number of particles, ``1 / sum_i w_i^2``."""
    weights = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(weights * weights))
