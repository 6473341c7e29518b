"""Sigma-point Gaussian filters used as baselines for the particle pair.

Two deterministic point rules are provided: the plain Julier unscented
transform (2n+1 points, spread parameter kappa) and the third-degree
spherical-radial cubature rule (2n equally weighted points).  On top of
them sit functional predict/update steps plus the same one-step-ahead
observation packet used by the particle filters, realized here as a
pseudo-measurement update.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import StaleTransferPacket
from .models import MotionModel, wrap_angle
from .numerics import CholStats, cholesky_psd
from .transfer import TransferPacket

Array = np.ndarray


@dataclass
class SigmaPoints:
    """Deterministic point set with its mean/covariance weights."""

    points: Array        # (M, n)
    weights_mean: Array  # (M,)
    weights_cov: Array   # (M,)


@dataclass(frozen=True)
class JulierSigmaRule:
    """Unscented transform, plain Julier form (alpha=1, beta=0)."""

    kappa: float = 2.0

    def n_points(self, dim: int) -> int:
        return 2 * dim + 1

    def points(self, mean: Array, cov: Array, stats: CholStats | None = None) -> SigmaPoints:
        n = mean.size
        scale = n + self.kappa
        factor = np.sqrt(scale) * cholesky_psd(cov, stats)
        pts = np.empty((2 * n + 1, n))
        pts[0] = mean
        pts[1 : n + 1] = mean + factor.T
        pts[n + 1 :] = mean - factor.T
        w = np.full(2 * n + 1, 1.0 / (2.0 * scale))
        w[0] = self.kappa / scale
        return SigmaPoints(points=pts, weights_mean=w, weights_cov=w.copy())


@dataclass(frozen=True)
class CubatureRule:
    """Third-degree spherical-radial cubature: 2n points, equal weights."""

    def n_points(self, dim: int) -> int:
        return 2 * dim

    def points(self, mean: Array, cov: Array, stats: CholStats | None = None) -> SigmaPoints:
        n = mean.size
        factor = np.sqrt(n) * cholesky_psd(cov, stats)
        pts = np.empty((2 * n, n))
        pts[:n] = mean + factor.T
        pts[n:] = mean - factor.T
        w = np.full(2 * n, 1.0 / (2.0 * n))
        return SigmaPoints(points=pts, weights_mean=w, weights_cov=w.copy())


SigmaRule = JulierSigmaRule | CubatureRule


@dataclass
class GaussianFilterState:
    """Gaussian filter state with a step counter for packet bookkeeping."""

    mean: Array
    cov: Array
    step: int = 0


def _moments(points: Array, w_mean: Array, w_cov: Array) -> tuple[Array, Array]:
    mean = w_mean @ points
    centered = points - mean
    cov = centered.T @ (centered * w_cov[:, None])
    return mean, 0.5 * (cov + cov.T)


def gf_predict(
    state: GaussianFilterState,
    rule: SigmaRule,
    model: MotionModel,
    q_cov: Array | None = None,
    stats: CholStats | None = None,
) -> GaussianFilterState:
    """Time update: propagate the point set, re-moment, add process noise."""
    if q_cov is None:
        q_cov = model.process_noise()
    sp = rule.points(state.mean, state.cov, stats)
    propagated = model.transition(sp.points)
    mean, cov = _moments(propagated, sp.weights_mean, sp.weights_cov)
    return GaussianFilterState(mean=mean, cov=cov + q_cov, step=state.step + 1)


def _measurement_moments(
    state: GaussianFilterState,
    rule: SigmaRule,
    h,
    angle_components: tuple[int, ...],
    stats: CholStats | None,
) -> tuple[Array, Array, Array]:
    """Predicted measurement mean, deviations and state deviations."""
    sp = rule.points(state.mean, state.cov, stats)
    z_pts = np.atleast_2d(h(sp.points))
    z_mean = sp.weights_mean @ z_pts
    dz = z_pts - z_mean
    for idx in angle_components:
        dz[:, idx] = wrap_angle(dz[:, idx])
    dx = sp.points - state.mean
    pzz = dz.T @ (dz * sp.weights_cov[:, None])
    pxz = dx.T @ (dz * sp.weights_cov[:, None])
    return z_mean, 0.5 * (pzz + pzz.T), pxz


def gf_update(
    state: GaussianFilterState,
    rule: SigmaRule,
    z: Array,
    h,
    noise_cov: Array,
    angle_components: tuple[int, ...] = (),
    stats: CholStats | None = None,
) -> GaussianFilterState:
    """Measurement update with wrapped innovation and PSD-safe covariance.

    The covariance is reduced by ``K S K^T`` with S the full innovation
    covariance (point scatter plus noise), then symmetrized; with a
    linear ``h`` this reproduces the Kalman update exactly.
    """
    z = np.asarray(z, dtype=float)
    z_mean, pzz_scatter, pxz = _measurement_moments(
        state, rule, h, angle_components, stats
    )
    s_cov = pzz_scatter + noise_cov
    gain = np.linalg.solve(s_cov.T, pxz.T).T
    innovation = z - z_mean
    for idx in angle_components:
        innovation[idx] = wrap_angle(innovation[idx])
    mean = state.mean + gain @ innovation
    cov = state.cov - gain @ s_cov @ gain.T
    cov = 0.5 * (cov + cov.T)
    return replace(state, mean=mean, cov=cov)


def gf_tl_update(
    state: GaussianFilterState,
    rule: SigmaRule,
    packet: TransferPacket,
    h,
    angle_components: tuple[int, ...] = (),
    stats: CholStats | None = None,
) -> GaussianFilterState:
    """Fold a transferred packet in as a pseudo-measurement update."""
    if packet.for_step != state.step:
        raise StaleTransferPacket(
            f"packet is for step {packet.for_step}, filter is at {state.step}"
        )
    return gf_update(
        state, rule, packet.eta_mean, h, packet.eta_cov, angle_components, stats
    )


def source_gf_packet(
    state: GaussianFilterState,
    rule: SigmaRule,
    model: MotionModel,
    h,
    meas_cov: Array,
    q_cov: Array | None = None,
    stats: CholStats | None = None,
) -> TransferPacket:
    """One-step-ahead observation packet from a Gaussian source filter.

    Predicts the state one step, maps the predicted point set through
    ``h`` and adds the sensor covariance.  The caller's state is left
    untouched.
    """
    ahead = gf_predict(state, rule, model, q_cov, stats)
    sp = rule.points(ahead.mean, ahead.cov, stats)
    z_pts = np.atleast_2d(h(sp.points))
    z_mean = sp.weights_mean @ z_pts
    dz = z_pts - z_mean
    pzz = dz.T @ (dz * sp.weights_cov[:, None])
    pzz = 0.5 * (pzz + pzz.T) + meas_cov
    return TransferPacket(eta_mean=z_mean, eta_cov=pzz, for_step=ahead.step)
