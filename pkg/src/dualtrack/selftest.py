"""Built-in oracle checks behind the ``selftest`` CLI subcommand.

Each check recomputes an expected value through an independent route
(closed forms, brute-force enumeration, replayed draws) and compares the
library against it.  The suite is deliberately fast; the full pytest
suite is the real gate, this is a field sanity check that needs nothing
beyond the runtime dependencies.
"""
from __future__ import annotations

import math

import numpy as np

from . import numerics
from .gaussian import CubatureRule, GaussianFilterState, JulierSigmaRule, gf_predict, gf_update
from .harness import delta_intensity, delta_rmse, overall_rmse, rmse_per_step
from .models import CoordinatedTurn, LinearCV, make_sensor_pair, measure
from .particle import StateGaussian, init_particles, sir_step
from .rng import stream
from .transfer import predicted_observation_packet, primary_step, transfer_loglik


def check_gaussian_logpdf_scalar():
    # N(0, 4) at x = 2, scalar closed form
    expected = -math.log(2.0) - 0.5 * math.log(2.0 * math.pi) - 0.5
    got = numerics.gaussian_logpdf(np.array([2.0]), np.array([[4.0]]))
    assert abs(got - expected) < 1e-12, f"{got} vs {expected}"


def check_normalize_arithmetic():
    got = np.exp(numerics.normalize_logweights(np.log([1.0, 3.0])))
    assert np.allclose(got, [0.25, 0.75], atol=1e-12), got


def check_systematic_resample_enumeration():
    idx = numerics.systematic_resample(np.array([0.5, 0.5]), 4, 0.1)
    assert list(idx) == [0, 0, 1, 1], idx
    # expected-count bound, brute force over the offset grid
    w = np.array([0.1, 0.9])
    for u0 in np.linspace(0.0, 0.999, 101):
        counts = np.bincount(numerics.systematic_resample(w, 10, u0), minlength=2)
        assert abs(counts[1] - 9.0) <= 1.0, (u0, counts)


def check_weighted_moments_two_pass():
    rng = stream(42)
    pts = rng.standard_normal((5, 3))
    w = np.full(5, 0.2)
    mean, cov = numerics.weighted_moments(pts, w)
    mean_ref = sum(w[i] * pts[i] for i in range(5))
    cov_ref = sum(w[i] * np.outer(pts[i] - mean_ref, pts[i] - mean_ref) for i in range(5))
    assert np.allclose(mean, mean_ref, atol=1e-12)
    assert np.allclose(cov, cov_ref, atol=1e-12)


def check_turn_transition_closed_form():
    model = CoordinatedTurn(ts=1.0)
    out = model.transition(np.array([0.0, 1.0, 0.0, 0.0, math.pi / 2]))
    expected = np.array([2 / math.pi, 0.0, 2 / math.pi, 1.0, math.pi / 2])
    assert np.allclose(out, expected, atol=1e-12), out


def check_process_noise_block():
    q = LinearCV(ts=1.0, q=0.1).process_noise()
    assert np.allclose(q[:2, :2], [[0.025, 0.05], [0.05, 0.1]], atol=1e-15)


def check_range_bearing():
    z = measure(np.array([1000.0, 0.0, 1000.0, 0.0]))
    assert abs(z[0] - 1414.2135623730951) < 1e-9
    assert abs(z[1] - math.pi / 4) < 1e-12


def check_sensor_pair_scaling():
    source, primary = make_sensor_pair(1.0, 4.0, 10.0, math.sqrt(10) * 1e-3)
    assert np.allclose(source.cov, np.diag([100.0, 1e-5]))
    assert np.allclose(primary.cov, np.diag([400.0, 4e-5]))


def check_effective_sample_size():
    w = np.array([0.5, 0.25, 0.25])
    assert abs(numerics.effective_sample_size(w) - 1.0 / 0.375) < 1e-12


def check_packet_moments_replay():
    model = LinearCV()
    prior = StateGaussian(np.array([100.0, 10.0, 100.0, 10.0]), np.eye(4))
    sensor, _ = make_sensor_pair(1.0, 1.0, 10.0, 3e-3)
    ps = init_particles(prior, 50, stream(7))
    packet, cloud = predicted_observation_packet(
        ps, model, model.process_noise(), sensor, stream(8)
    )
    mean_ref = cloud.eta.mean(axis=0)
    centered = cloud.eta - mean_ref
    cov_ref = centered.T @ centered / 50 + sensor.cov
    assert np.allclose(packet.eta_mean, mean_ref, atol=1e-12)
    assert np.allclose(packet.eta_cov, cov_ref, atol=1e-12)


def check_no_packet_reduction():
    model = LinearCV()
    prior = StateGaussian(np.array([100.0, 10.0, 100.0, 10.0]), np.diag([50, 1, 50, 1.0]))
    _, sensor = make_sensor_pair(1.0, 4.0, 10.0, 3e-3)
    z = measure(np.array([110.0, 0, 110.0, 0])) + np.array([3.0, 1e-3])
    ps_a = init_particles(prior, 200, stream(3))
    ps_b = init_particles(prior, 200, stream(3))
    rng_a, rng_b = stream(4), stream(4)
    sa, est_a = sir_step(ps_a, z, model, sensor, rng_a)
    sb, est_b = primary_step(ps_b, z, None, model, sensor, rng_b)
    assert np.array_equal(sa.states, sb.states), "isolated and no-packet paths differ"
    assert np.array_equal(est_a.mean, est_b.mean)


def check_weight_ratio_factorization():
    from .particle import measurement_loglik
    from .transfer import TransferPacket

    rng = stream(11)
    states = rng.normal([100.0, 5.0, 120.0, -4.0], 5.0, size=(6, 4))
    _, sensor = make_sensor_pair(1.0, 4.0, 10.0, 3e-3)
    z = measure(states[0]) + np.array([5.0, 2e-3])
    packet = TransferPacket(
        eta_mean=measure(states[1]) + np.array([-4.0, 1e-3]),
        eta_cov=np.diag([150.0, 2e-5]),
        for_step=1,
    )
    total = transfer_loglik(states, packet) + measurement_loglik(states, z, sensor)
    for i in range(1, 6):
        ratio = total[i] - total[0]
        direct = (
            transfer_loglik(states[i][None], packet)[0]
            + measurement_loglik(states[i][None], z, sensor)[0]
            - transfer_loglik(states[0][None], packet)[0]
            - measurement_loglik(states[0][None], z, sensor)[0]
        )
        assert abs(ratio - direct) < 1e-10, (i, ratio, direct)


def check_gaussian_filters_match_kalman():
    # scalar-per-axis linear problem: both rules must match the exact KF
    model = LinearCV(ts=1.0, q=0.1)
    h_mat = np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]])
    r_cov = np.diag([4.0, 4.0])
    f_mat = np.array([[1, 1, 0, 0], [0, 1, 0, 0], [0, 0, 1, 1], [0, 0, 0, 1.0]])
    q_cov = model.process_noise()
    mean = np.array([0.0, 1.0, 0.0, -1.0])
    cov = np.diag([4.0, 1.0, 4.0, 1.0])
    z = np.array([1.5, -2.0])

    km = f_mat @ mean
    kp = f_mat @ cov @ f_mat.T + q_cov
    s = h_mat @ kp @ h_mat.T + r_cov
    gain = kp @ h_mat.T @ np.linalg.inv(s)
    km2 = km + gain @ (z - h_mat @ km)
    kp2 = kp - gain @ s @ gain.T

    for rule in (JulierSigmaRule(2.0), CubatureRule()):
        st = GaussianFilterState(mean.copy(), cov.copy())
        st = gf_predict(st, rule, model, q_cov)
        st = gf_update(st, rule, z, lambda pts: pts @ h_mat.T, r_cov)
        assert np.allclose(st.mean, km2, atol=1e-9), rule
        assert np.allclose(st.cov, kp2, atol=1e-9), rule


def check_rmse_and_deltas():
    r = rmse_per_step(np.zeros((1, 3, 2)), np.tile([3.0, 4.0], (1, 3, 1)))
    assert np.allclose(r, 5.0)
    two = rmse_per_step(np.zeros((2, 1, 2)), np.array([[[0.0, 0]], [[0.0, 2]]]))
    assert abs(two[0] - math.sqrt(2.0)) < 1e-12
    assert overall_rmse([1.0, 3.0]) == 2.0
    assert abs(delta_rmse(16.74, 14.33) - 2.41) < 1e-12
    assert delta_intensity(8.0, 1.0) == 7.0


CHECKS = [
    check_gaussian_logpdf_scalar,
    check_normalize_arithmetic,
    check_systematic_resample_enumeration,
    check_weighted_moments_two_pass,
    check_turn_transition_closed_form,
    check_process_noise_block,
    check_range_bearing,
    check_sensor_pair_scaling,
    check_effective_sample_size,
    check_packet_moments_replay,
    check_no_packet_reduction,
    check_weight_ratio_factorization,
    check_gaussian_filters_match_kalman,
    check_rmse_and_deltas,
]


def run_selftest() -> bool:
    """Run every check; print one line each; True when all pass."""
    failures = 0
    for check in CHECKS:
        name = check.__name__.removeprefix("check_")
        try:
            check()
        except Exception as exc:  # report and keep going
            failures += 1
            print(f"FAIL {name}: {exc}")
        else:
            print(f"ok   {name}")
    if failures:
        print(f"{failures}/{len(CHECKS)} checks failed")
    else:
        print(f"all {len(CHECKS)} checks passed")
    return failures == 0
