#!/usr/bin/env python3
"""Desk-scale Monte-Carlo benchmark across the filter roster.

Runs every filter on identical data per run (common random numbers),
aggregates per-step RMSE and per-step wall time, and prints the summary
table.  The CLI writes the same numbers as CSV:

    dualtrack run --config bench.cfg --seed 7 --out-dir out --timing

Run:  python3 demos/06_monte_carlo_benchmark.py        (about a minute)
"""
import numpy as np

from dualtrack import FilterSpec, ScenarioConfig, delta_rmse, run_experiment

cfg = ScenarioConfig(
    scenario="S2",
    mc_runs=60,
    master_seed=2718,
    workers=2,
    intensity_primary=(1.0, 4.0),
    filters=(
        FilterSpec("pf", False, 2000), FilterSpec("pf", True, 2000),
        FilterSpec("ukf", False), FilterSpec("ukf", True),
        FilterSpec("ckf3", False), FilterSpec("ckf3", True),
    ),
)
result = run_experiment(cfg)

print(f"{cfg.mc_runs} runs, {cfg.steps} steps, scenario {cfg.scenario}")
print(f"{'filter':12s} {'I_w':>4s} {'overall RMSE':>14s} {'ms/step':>9s}")
for cell in result.cells:
    m = cell.metrics
    print(f"{cell.spec.filter_id:12s} {cell.intensity_primary:4.0f} "
          f"{m.overall_rmse:11.2f} m  {m.time_per_step_ms:8.3f}")

print("\ntransfer gain (isolated minus transfer, positive = transfer helps):")
for iw in cfg.intensity_primary:
    for family in ("pf:2000", "ukf", "ckf3"):
        iso = result.cell(family, iw).metrics.overall_rmse
        tl = result.cell(f"tl-{family}", iw).metrics.overall_rmse
        print(f"  I_w={iw:.0f} {family:8s} delta RMSE = {delta_rmse(iso, tl):+6.2f} m")

curve = result.cell("tl-pf:2000", 4.0).metrics.rmse_per_step
print("\nper-step RMSE of tl-pf at I_w=4 (every 10th step):")
print("  " + " ".join(f"{v:6.2f}" for v in curve[9::10]))
