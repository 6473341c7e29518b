"""Transfer-learning layer on top of the SIR filter.

A dual-tracker pair watches the same object through two sensors of
unequal noise intensity.  After each step the low-noise (source) filter
looks one step ahead: it propagates its resampled cloud through the
transition prior, draws predicted observations around each propagated
particle, and summarizes them as a small Gaussian packet (mean and 2x2
covariance in measurement space).  The high-noise (primary) filter
treats the packet received for the current step as an extra likelihood
factor on its particles, in addition to its own measurement.  Transfer
is strictly one-directional and delayed by one step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import LengthMismatch, StaleTransferPacket
from .models import MotionModel, SensorModel, measure, wrap_bearing_inplace
from .particle import (
    ParticleSet,
    StateGaussian,
    init_particles,
    measurement_loglik,
    predict,
    resample,
    reweight,
    sir_step,
    summarize,
)

Array = np.ndarray

# How the predicted-observation draw treats measurement noise:
#   verbatim - sample noise into each predicted observation AND add the
#              sensor covariance to the packet (the reference recipe);
#   analytic - noise-free h(x) draws, sensor covariance added once.
PACKET_NOISE_MODES = ("verbatim", "analytic")


@dataclass(frozen=True)
class TransferPacket:
    """Predicted-observation summary shipped source -> primary.

    ``for_step`` is the time index the packet is valid for: a packet
    built at source step k describes the observation at k+1.
    """

    eta_mean: Array  # (2,) predicted range, bearing
    eta_cov: Array   # (2, 2)
    for_step: int


@dataclass
class PredictedObservationCloud:
    """Uniformly weighted predicted-observation particles (N, 2)."""

    eta: Array
    for_step: int


def predicted_observation_packet(
    ps: ParticleSet,
    model: MotionModel,
    q_cov: Array,
    sensor: SensorModel,
    rng: np.random.Generator,
    noise_mode: str = "verbatim",
) -> tuple[TransferPacket, PredictedObservationCloud]:
    """Build the one-step-ahead observation packet from a resampled cloud.

    The lookahead draws fresh state particles from the transition prior
    and never mutates ``ps``.  The packet covariance is the eta-particle
    scatter plus the sensor covariance.
    """
    if noise_mode not in PACKET_NOISE_MODES:
        raise ValueError(f"unknown packet noise mode {noise_mode!r}")
    ahead = predict(ps, model, q_cov, rng)
    eta = measure(ahead.states)
    if noise_mode == "verbatim":
        factor = numerics.cholesky_psd(sensor.cov)
        eta += rng.standard_normal(eta.shape) @ factor.T
    mean = eta.mean(axis=0)
    centered = eta - mean
    scatter = centered.T @ centered / ps.n
    packet = TransferPacket(
        eta_mean=mean,
        eta_cov=0.5 * (scatter + scatter.T) + sensor.cov,
        for_step=ahead.step,
    )
    return packet, PredictedObservationCloud(eta=eta, for_step=ahead.step)


def _loglik_at_predictions(z_pred: Array, center: Array, cov: Array) -> Array:
    """Gaussian log-likelihood of predicted observations, bearing wrapped."""
    return numerics.gaussian_logpdf(wrap_bearing_inplace(center - z_pred), cov)


def transfer_loglik(states: Array, packet: TransferPacket) -> Array:
    """Per-particle log-likelihood of the transferred packet.

    Same Gaussian form as the measurement likelihood, with the packet
    mean as pseudo-measurement and the packet covariance as noise;
    bearing residuals are wrapped identically.
    """
    return _loglik_at_predictions(measure(states), packet.eta_mean, packet.eta_cov)


def source_step(
    ps: ParticleSet,
    z_star: Array,
    model: MotionModel,
    sensor_star: SensorModel,
    rng: np.random.Generator,
    q_cov: Array | None = None,
    noise_mode: str = "verbatim",
) -> tuple[ParticleSet, StateGaussian, TransferPacket]:
    """Source filter step: plain SIR cycle plus the lookahead packet."""
    if q_cov is None:
        q_cov = model.process_noise()
    ps, estimate = sir_step(ps, z_star, model, sensor_star, rng, q_cov=q_cov)
    packet, _ = predicted_observation_packet(
        ps, model, q_cov, sensor_star, rng, noise_mode=noise_mode
    )
    return ps, estimate, packet


def primary_step(
    ps: ParticleSet,
    z: Array,
    packet: TransferPacket | None,
    model: MotionModel,
    sensor: SensorModel,
    rng: np.random.Generator,
    q_cov: Array | None = None,
) -> tuple[ParticleSet, StateGaussian]:
    """Primary filter step with an optional transferred packet.

    With ``packet=None`` this is exactly the isolated SIR step, consuming
    the generator in the same order, so paired runs differ only through
    the transfer term.  With a packet, its log-likelihood is applied
    first and the measurement's second; both are folded into the weights
    before the single normalization.
    """
    if q_cov is None:
        q_cov = model.process_noise()
    ps = predict(ps, model, q_cov, rng)
    if packet is not None:
        if packet.for_step != ps.step:
            raise StaleTransferPacket(
                f"packet is for step {packet.for_step}, filter is at {ps.step}"
            )
        z_pred = measure(ps.states)
        loglik = _loglik_at_predictions(
            z_pred, packet.eta_mean, packet.eta_cov
        ) + _loglik_at_predictions(z_pred, z, sensor.cov)
    else:
        loglik = measurement_loglik(ps.states, z, sensor)
    ps = reweight(ps, loglik)
    ps = resample(ps, rng)
    return ps, summarize(ps, q_cov)


@dataclass
class DualRunResult:
    """Step-indexed outputs of one dual-tracker run (k = 1..K)."""

    source_estimates: list[StateGaussian]
    primary_estimates: list[StateGaussian]
    packets: list[TransferPacket]
    source_final: ParticleSet | None
    primary_final: ParticleSet


def run_dual(
    model: MotionModel,
    sensor_star: SensorModel,
    sensor: SensorModel,
    prior: StateGaussian,
    n_particles: int,
    z_star_series: Array,
    z_series: Array,
    rng_source: np.random.Generator,
    rng_primary: np.random.Generator,
    noise_mode: str = "verbatim",
    replay_packets: list[TransferPacket] | None = None,
) -> DualRunResult:
    """Run the source/primary pipeline over aligned measurement series.

    At step k the source consumes ``z_star_series[k-1]`` and emits the
    packet for k+1; the primary consumes ``z_series[k-1]`` together with
    the packet emitted at k-1.  The first primary step runs without
    transfer.  If ``replay_packets`` is given the source filter is not
    run at all and packets are taken from the list instead.
    """
    z_star_series = np.asarray(z_star_series, dtype=float)
    z_series = np.asarray(z_series, dtype=float)
    if len(z_star_series) != len(z_series):
        raise LengthMismatch(
            f"{len(z_star_series)} source vs {len(z_series)} primary measurements"
        )
    n_steps = len(z_series)
    q_cov = model.process_noise()

    source_estimates: list[StateGaussian] = []
    packets: list[TransferPacket] = []
    primary_estimates: list[StateGaussian] = []

    ps_primary = init_particles(prior, n_particles, rng_primary)
    ps_source = None
    if replay_packets is None:
        ps_source = init_particles(prior, n_particles, rng_source)
    elif len(replay_packets) < max(n_steps - 1, 0):
        raise LengthMismatch(
            f"replay needs {n_steps - 1} packets, got {len(replay_packets)}"
        )

    pending: TransferPacket | None = None
    for k in range(n_steps):
        if replay_packets is None:
            ps_source, est_star, packet = source_step(
                ps_source,
                z_star_series[k],
                model,
                sensor_star,
                rng_source,
                q_cov=q_cov,
                noise_mode=noise_mode,
            )
            source_estimates.append(est_star)
        else:
            packet = replay_packets[k] if k < len(replay_packets) else None
        ps_primary, est = primary_step(
            ps_primary, z_series[k], pending, model, sensor, rng_primary, q_cov=q_cov
        )
        primary_estimates.append(est)
        if packet is not None:
            packets.append(packet)
        pending = packet

    return DualRunResult(
        source_estimates=source_estimates,
        primary_estimates=primary_estimates,
        packets=packets,
        source_final=ps_source,
        primary_final=ps_primary,
    )


# --- packet replay files ---------------------------------------------------
#
# Line format: k, eta_r, eta_zeta, P11, P12, P22  (upper triangle of the
# symmetric 2x2 covariance).  Written with 17 significant digits so a
# replayed run reproduces the original to full double precision.

PACKET_HEADER = "# k,eta_r,eta_zeta,P11,P12,P22"


def write_packets(path, packets: list[TransferPacket]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(PACKET_HEADER + "\n")
        for p in packets:
            c = p.eta_cov
            fh.write(
                "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n"
                % (p.for_step, p.eta_mean[0], p.eta_mean[1], c[0, 0], c[0, 1], c[1, 1])
            )


def read_packets(path) -> list[TransferPacket]:
    packets = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            if len(fields) != 6:
                raise ValueError(f"malformed packet record: {line!r}")
            k = int(fields[0])
            eta_r, eta_z, p11, p12, p22 = (float(v) for v in fields[1:])
            packets.append(
                TransferPacket(
                    eta_mean=np.array([eta_r, eta_z]),
                    eta_cov=np.array([[p11, p12], [p12, p22]]),
                    for_step=k,
                )
            )
    return packets
