#!/usr/bin/env python3
"""Motion models, the range-bearing sensor and the asymmetric noise pair.

Run:  python3 demos/02_models_and_sensors.py
"""
import numpy as np

from dualtrack import CoordinatedTurn, LinearCV, ScenarioConfig, make_sensor_pair, measure
from dualtrack.harness import generate_truth

print("== Constant-velocity model ==")
cv = LinearCV(ts=1.0, q=0.1)
x = np.array([100.0, 10.0, 100.0, 10.0])
for k in range(3):
    x = cv.transition(x)
    print(f"  k={k+1}: position ({x[0]:7.1f}, {x[2]:7.1f}) m")
print("  discrete process noise:\n", np.round(cv.process_noise(), 4))

print("\n== Coordinated-turn model ==")
ct = CoordinatedTurn(ts=1.0, q1=0.1, q2=1.75e-4)
x = np.array([1000.0, 300.0, 1000.0, 0.0, np.deg2rad(-3.0)])
print("  turning at -3 deg/s from (1000, 1000) at 300 m/s:")
for k in (1, 25, 50, 75, 100):
    xi = x
    for _ in range(k):
        xi = ct.transition(xi)
    print(f"  k={k:3d}: position ({xi[0]:8.1f}, {xi[2]:9.1f}) m, "
          f"range {np.hypot(xi[0], xi[2]):8.1f} m")

print("\n== Range-bearing sensor ==")
z = measure(x)
print(f"  at (1000, 1000): range {z[0]:.2f} m, bearing {np.rad2deg(z[1]):.2f} deg")

print("\n== Asymmetric sensor pair ==")
source, primary = make_sensor_pair(
    intensity_source=1.0, intensity_primary=4.0,
    sigma_r=10.0, sigma_zeta=np.sqrt(10) * 1e-3,
)
print("  shared base covariance diag:", np.diag(source.base_cov))
print("  source  covariance diag:", np.diag(source.cov), "(intensity 1)")
print("  primary covariance diag:", np.diag(primary.cov), "(intensity 4)")

print("\n== Scenario trajectories ==")
for scenario in ("S1", "S2"):
    cfg = ScenarioConfig(scenario=scenario, master_seed=0)
    truth = generate_truth(cfg)
    r = np.hypot(truth[:, 0], truth[:, 2])
    print(f"  {scenario}: {len(truth)-1} steps, range {r.min():7.1f} .. {r.max():8.1f} m")
