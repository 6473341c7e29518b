"""Motion models, the range-bearing sensor and noise construction.

Two planar kinematic models are provided: a constant-velocity model with
state ``[x, vx, y, vy]`` and a coordinated-turn model that appends the
turn rate, ``[x, vx, y, vy, omega]``.  Both expose a noise-free
``transition`` (vectorized over particle clouds) and their discrete
process-noise covariance.  Angles are radians everywhere; bearings live
in (-pi, pi].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, OriginSingularity

Array = np.ndarray

# Below this turn rate the sin(w T)/w terms switch to their analytic limits.
OMEGA_EPS = 1e-6


def wrap_angle(theta):
    """Wrap angles to (-pi, pi]. Works on scalars and arrays."""
    theta = np.asarray(theta, dtype=float)
    wrapped = np.mod(theta + np.pi, 2.0 * np.pi) - np.pi
    wrapped = np.where(wrapped == -np.pi, np.pi, wrapped)
    return float(wrapped) if wrapped.ndim == 0 else wrapped


def wrap_residual(residual: Array) -> Array:
    """Wrap the bearing component of range-bearing residuals in place-free form."""
    residual = np.array(residual, dtype=float, copy=True)
    residual[..., 1] = wrap_angle(residual[..., 1])
    return residual


def wrap_bearing_inplace(residual: Array) -> Array:
    """Wrap the bearing column of a residual array the caller owns."""
    residual[..., 1] = wrap_angle(residual[..., 1])
    return residual


@dataclass(frozen=True)
class LinearCV:
    """Constant-velocity motion on the plane.

    ``q`` is the white-noise acceleration spectral density (m^2/s^4 scale
    parameter of the discretized blocks).
    """

    ts: float = 1.0
    q: float = 0.1

    dim = 4

    def transition(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"expected state dim {self.dim}, got {x.shape[-1]}")
        out = np.array(x, copy=True)
        out[..., 0] = x[..., 0] + self.ts * x[..., 1]
        out[..., 2] = x[..., 2] + self.ts * x[..., 3]
        return out

    def process_noise(self) -> Array:
        t = self.ts
        block = np.array(
            [[t**4 / 4.0, t**3 / 2.0], [t**3 / 2.0, t**2]]
        )
        q_cov = np.zeros((4, 4))
        q_cov[:2, :2] = self.q * block
        q_cov[2:, 2:] = self.q * block
        return q_cov


@dataclass(frozen=True)
class CoordinatedTurn:
    """Constant-speed coordinated turn with the turn rate as a state.

    The transition matrix entries ``sin(w T)/w`` and ``(1 - cos(w T))/w``
    are evaluated at each particle's own turn rate; below ``OMEGA_EPS``
    they take their analytic limits T and 0 so the map is continuous
    through zero.  ``q1`` drives position/velocity noise, ``q2`` the
    turn-rate random walk.
    """

    ts: float = 1.0
    q1: float = 0.1
    q2: float = 1.75e-2

    dim = 5

    def transition(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"expected state dim {self.dim}, got {x.shape[-1]}")
        t = self.ts
        omega = x[..., 4]
        small = np.abs(omega) < OMEGA_EPS
        omega_safe = np.where(small, 1.0, omega)
        sin_wt = np.sin(omega * t)
        cos_wt = np.cos(omega * t)
        a = np.where(small, t, sin_wt / omega_safe)           # sin(wT)/w
        b = np.where(small, 0.0, (1.0 - cos_wt) / omega_safe)  # (1-cos(wT))/w
        sin_wt = np.where(small, 0.0, sin_wt)
        cos_wt = np.where(small, 1.0, cos_wt)
        vx, vy = x[..., 1], x[..., 3]
        out = np.empty_like(x)
        out[..., 0] = x[..., 0] + a * vx - b * vy
        out[..., 1] = cos_wt * vx - sin_wt * vy
        out[..., 2] = x[..., 2] + b * vx + a * vy
        out[..., 3] = sin_wt * vx + cos_wt * vy
        out[..., 4] = omega
        return out

    def process_noise(self) -> Array:
        t = self.ts
        block = np.array(
            [[t**4 / 4.0, t**3 / 2.0], [t**3 / 2.0, t**2]]
        )
        q_cov = np.zeros((5, 5))
        q_cov[:2, :2] = self.q1 * block
        q_cov[2:4, 2:4] = self.q1 * block
        q_cov[4, 4] = self.q2 * t
        return q_cov


MotionModel = LinearCV | CoordinatedTurn


def measure(x: Array) -> Array:
    """Noise-free range-bearing observation ``[r, zeta]`` of a state.

    Accepts a single state (dim,) or a cloud (N, dim); position is read
    from components 0 and 2.  Bearing is the four-quadrant angle in
    (-pi, pi].
    """
    x = np.asarray(x, dtype=float)
    px, py = x[..., 0], x[..., 2]
    r = np.hypot(px, py)
    if np.any(r == 0.0):
        raise OriginSingularity("bearing undefined at the sensor origin")
    zeta = wrap_angle(np.arctan2(py, px))
    return np.stack([r, zeta], axis=-1)


@dataclass(frozen=True)
class SensorModel:
    """Range-bearing sensor with an intensity-scaled base covariance.

    ``cov = intensity * base_cov`` where ``base_cov = diag(sigma_r^2,
    sigma_zeta^2)`` is shared between the two sensors of a pair and the
    scalar intensity is what differs.
    """

    sigma_r: float
    sigma_zeta: float
    intensity: float = 1.0

    @property
    def base_cov(self) -> Array:
        return np.diag([self.sigma_r**2, self.sigma_zeta**2])

    @property
    def cov(self) -> Array:
        return self.intensity * self.base_cov


def make_sensor_pair(
    intensity_source: float,
    intensity_primary: float,
    sigma_r: float,
    sigma_zeta: float,
) -> tuple[SensorModel, SensorModel]:
    """Build the (source, primary) sensor pair sharing one base covariance."""
    if intensity_source <= 0.0 or intensity_primary <= 0.0:
        raise ValueError("noise intensities must be positive")
    source = SensorModel(sigma_r, sigma_zeta, intensity_source)
    primary = SensorModel(sigma_r, sigma_zeta, intensity_primary)
    return source, primary
