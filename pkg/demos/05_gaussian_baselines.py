#!/usr/bin/env python3
"""Unscented and cubature baselines on the turning scenario, with and
without the transferred pseudo-measurement.

Run:  python3 demos/05_gaussian_baselines.py
"""
import numpy as np

from dualtrack import (
    CubatureRule,
    GaussianFilterState,
    JulierSigmaRule,
    ScenarioConfig,
    gf_predict,
    gf_tl_update,
    gf_update,
    measure,
    source_gf_packet,
)
from dualtrack.harness import generate_measurements, generate_truth
from dualtrack.rng import MEAS_PRIMARY, MEAS_SOURCE, stream

cfg = ScenarioConfig(scenario="S2", master_seed=11)
model = cfg.motion_model()
q_cov = model.process_noise()
sensor_star, sensor = cfg.sensors(4.0)
truth = generate_truth(cfg)
z_star = generate_measurements(truth, sensor_star, stream(11, 0, MEAS_SOURCE))
z_pri = generate_measurements(truth, sensor, stream(11, 0, MEAS_PRIMARY))
true_pos = truth[1:, [0, 2]]

rules = {"ukf (11 points)": JulierSigmaRule(kappa=2.0), "ckf3 (10 points)": CubatureRule()}
angle = (1,)

for name, rule in rules.items():
    iso = GaussianFilterState(cfg.initial_state(), cfg.initial_cov())
    src = GaussianFilterState(cfg.initial_state(), cfg.initial_cov())
    tl = GaussianFilterState(cfg.initial_state(), cfg.initial_cov())
    pending = None
    iso_err, tl_err = [], []
    for k in range(cfg.steps):
        src = gf_update(gf_predict(src, rule, model, q_cov), rule,
                        z_star[k], measure, sensor_star.cov, angle)
        packet = source_gf_packet(src, rule, model, measure, sensor_star.cov, q_cov)

        iso = gf_update(gf_predict(iso, rule, model, q_cov), rule,
                        z_pri[k], measure, sensor.cov, angle)
        tl = gf_predict(tl, rule, model, q_cov)
        if pending is not None:
            tl = gf_tl_update(tl, rule, pending, measure, angle)
        tl = gf_update(tl, rule, z_pri[k], measure, sensor.cov, angle)
        pending = packet

        iso_err.append(np.hypot(*(iso.mean[[0, 2]] - true_pos[k])))
        tl_err.append(np.hypot(*(tl.mean[[0, 2]] - true_pos[k])))
    print(f"{name}: isolated {np.mean(iso_err):6.2f} m, "
          f"with transfer {np.mean(tl_err):6.2f} m  (single run)")

print("\nthe same deterministic point sets reconstruct any Gaussian exactly:")
rule = JulierSigmaRule(2.0)
sp = rule.points(cfg.initial_state(), cfg.initial_cov())
mean = sp.weights_mean @ sp.points
print("  reconstruction error of the prior mean:",
      float(np.abs(mean - cfg.initial_state()).max()))
