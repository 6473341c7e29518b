"""Sequential importance resampling (SIR) particle filter.

The proposal is the state transition prior, weights are updated with the
measurement likelihood, and systematic resampling runs at every step, so
a set's weights are exactly uniform between steps.  The posterior
summary adds the process-noise covariance to the particle scatter, which
inflates the reported covariance slightly but keeps the summary
consistent with the transfer-packet construction built on top of it.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import numerics
from .errors import AllWeightsDegenerate, DegenerateWeightsWarning
from .models import MotionModel, SensorModel, measure, wrap_bearing_inplace

Array = np.ndarray


@dataclass
class StateGaussian:
    """Gaussian summary (mean, covariance) of a state posterior."""

    mean: Array
    cov: Array


@dataclass
class ParticleSet:
    """Weighted particle cloud at one time step.

    ``logw`` holds normalized natural-log weights.  ``degenerate_events``
    counts how many times the weights collapsed and were reset to uniform
    over the set's history; it is carried forward so a run can report it.
    """

    states: Array  # (N, dim)
    logw: Array    # (N,)
    step: int = 0
    degenerate_events: int = 0

    @property
    def n(self) -> int:
        return self.states.shape[0]

    def weights(self) -> Array:
        """Linear-domain weights (exponentiated log-weights)."""
        return np.exp(self.logw)


def init_particles(
    prior: StateGaussian, n_particles: int, rng: np.random.Generator
) -> ParticleSet:
    """Draw an initial cloud iid from the Gaussian prior, uniform weights."""
    if n_particles < 1:
        raise ValueError("need at least one particle")
    states = numerics.sample_gaussian(prior.mean, prior.cov, rng, size=n_particles)
    logw = np.full(n_particles, -np.log(n_particles))
    return ParticleSet(states=states, logw=logw, step=0)


def predict(
    ps: ParticleSet, model: MotionModel, q_cov: Array, rng: np.random.Generator
) -> ParticleSet:
    """Propagate every particle through the transition prior.

    Each particle becomes ``f(x) + v`` with ``v ~ N(0, q_cov)``; weights
    are untouched and the step counter advances by one.  One
    ``standard_normal`` block is consumed per call regardless of q_cov.
    """
    factor = numerics.cholesky_psd(q_cov)
    states = model.transition(ps.states)
    states += rng.standard_normal(states.shape) @ factor.T
    return replace(ps, states=states, step=ps.step + 1)


def measurement_loglik(states: Array, z: Array, sensor: SensorModel) -> Array:
    """Per-particle log-likelihood of measurement ``z``, bearing wrapped."""
    residual = wrap_bearing_inplace(z - measure(states))
    return numerics.gaussian_logpdf(residual, sensor.cov)


def reweight(ps: ParticleSet, loglik: Array) -> ParticleSet:
    """Fold a log-likelihood into the weights and renormalize.

    If every combined weight is degenerate (all -inf/NaN), the set falls
    back to uniform weights, a ``DegenerateWeightsWarning`` is issued and
    the event counter is bumped, so long Monte-Carlo batches survive
    extreme outliers.
    """
    raw = ps.logw + loglik
    try:
        logw = numerics.normalize_logweights(raw)
        events = ps.degenerate_events
    except AllWeightsDegenerate:
        warnings.warn(
            "particle weights degenerate, reset to uniform",
            DegenerateWeightsWarning,
            stacklevel=2,
        )
        logw = np.full(ps.n, -np.log(ps.n))
        events = ps.degenerate_events + 1
    return replace(ps, logw=logw, degenerate_events=events)


def update_measurement(ps: ParticleSet, z: Array, sensor: SensorModel) -> ParticleSet:
    """Weight update against one measurement, normalized afterwards."""
    return reweight(ps, measurement_loglik(ps.states, z, sensor))


def effective_particles(ps: ParticleSet) -> float:
    """Degeneracy diagnostic ``1 / sum w_i^2`` (not used to gate resampling)."""
    return numerics.effective_sample_size(ps.weights())


def resample(ps: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    """Systematic resampling back to uniform weights.

    The stratification offset is drawn once per call from ``rng``.
    """
    u0 = rng.random()
    idx = numerics.systematic_resample(ps.weights(), ps.n, u0)
    logw = np.full(ps.n, -np.log(ps.n))
    return replace(ps, states=ps.states[idx], logw=logw)


def summarize(ps: ParticleSet, q_add: Array) -> StateGaussian:
    """Gaussian summary: weighted moments plus the supplied noise term.

    ``q_add`` is the process-noise covariance for state posteriors (the
    measurement-noise covariance when summarizing predicted-observation
    clouds); it is added to the particle scatter.
    """
    if ps.logw.size and np.all(ps.logw == ps.logw[0]):
        # post-resample fast path: plain averages
        mean = ps.states.mean(axis=0)
        centered = ps.states - mean
        scatter = centered.T @ centered / ps.n
        scatter = 0.5 * (scatter + scatter.T)
    else:
        mean, scatter = numerics.weighted_moments(ps.states, ps.weights())
    return StateGaussian(mean=mean, cov=scatter + q_add)


def sir_step(
    ps: ParticleSet,
    z: Array,
    model: MotionModel,
    sensor: SensorModel,
    rng: np.random.Generator,
    q_cov: Array | None = None,
) -> tuple[ParticleSet, StateGaussian]:
    """One full SIR cycle: predict, weight, resample, summarize."""
    if q_cov is None:
        q_cov = model.process_noise()
    ps = predict(ps, model, q_cov, rng)
    ps = update_measurement(ps, z, sensor)
    ps = resample(ps, rng)
    return ps, summarize(ps, q_cov)
