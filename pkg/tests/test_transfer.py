"""Transfer layer: packets, dual likelihood updates, pipeline timing."""
import math

import numpy as np
import pytest
from scipy import stats

from dualtrack.errors import LengthMismatch, StaleTransferPacket
from dualtrack.models import CoordinatedTurn, LinearCV, SensorModel, make_sensor_pair, measure
from dualtrack.particle import (
    StateGaussian,
    init_particles,
    measurement_loglik,
    sir_step,
)
from dualtrack.rng import stream
from dualtrack.transfer import (
    TransferPacket,
    predicted_observation_packet,
    primary_step,
    read_packets,
    run_dual,
    source_step,
    transfer_loglik,
    write_packets,
)

PRIOR = StateGaussian(
    mean=np.array([100.0, 10.0, 100.0, 10.0]),
    cov=np.diag([50.0, 1.0, 50.0, 1.0]),
)


# --- packet construction -----------------------------------------------------


def test_packet_noiseless_static_object():
    # zero process and measurement noise: packet collapses onto h(f(x))
    model = LinearCV(ts=1.0, q=0.0)
    sensor = SensorModel(sigma_r=10.0, sigma_zeta=3e-3, intensity=0.0)
    x = np.array([300.0, 0.0, 400.0, 0.0])
    ps = init_particles(StateGaussian(x, np.zeros((4, 4))), 20, stream(1))
    packet, cloud = predicted_observation_packet(
        ps, model, np.zeros((4, 4)), sensor, stream(2)
    )
    assert np.allclose(packet.eta_mean, measure(x), atol=1e-12)
    assert np.allclose(packet.eta_cov, 0.0, atol=1e-12)
    assert np.allclose(cloud.eta, measure(x), atol=1e-12)
    assert packet.for_step == 1


def test_packet_covariance_dominated_by_sensor_noise():
    model = LinearCV(ts=1.0, q=0.0)
    big = SensorModel(sigma_r=1e3, sigma_zeta=1.0, intensity=1.0)
    x = np.array([5000.0, 0.0, 0.0, 0.0])
    ps = init_particles(StateGaussian(x, 1e-6 * np.eye(4)), 4000, stream(3))

    analytic, _ = predicted_observation_packet(
        ps, model, np.zeros((4, 4)), big, stream(4), noise_mode="analytic"
    )
    assert np.allclose(analytic.eta_cov, big.cov, rtol=1e-3)

    # the reference recipe also samples the noise, so it shows up twice
    verbatim, _ = predicted_observation_packet(
        ps, model, np.zeros((4, 4)), big, stream(5), noise_mode="verbatim"
    )
    assert np.allclose(np.diag(verbatim.eta_cov), 2.0 * np.diag(big.cov), rtol=0.1)
    # off-diagonal stays at sampling-noise level, sqrt(var_r var_z / N)
    assert abs(verbatim.eta_cov[0, 1]) < 5 * math.sqrt(1e6 / 4000)


def test_packet_moments_match_recorded_cloud():
    model = LinearCV()
    sensor, _ = make_sensor_pair(1.0, 4.0, 10.0, 3e-3)
    ps = init_particles(PRIOR, 50, stream(6))
    packet, cloud = predicted_observation_packet(
        ps, model, model.process_noise(), sensor, stream(7)
    )
    mean_ref = cloud.eta.mean(axis=0)
    centered = cloud.eta - mean_ref
    cov_ref = centered.T @ centered / len(cloud.eta) + sensor.cov
    assert np.allclose(packet.eta_mean, mean_ref, atol=1e-12)
    assert np.allclose(packet.eta_cov, cov_ref, atol=1e-12)


def test_packet_lookahead_does_not_mutate_particles():
    model = LinearCV()
    sensor, _ = make_sensor_pair(1.0, 4.0, 10.0, 3e-3)
    ps = init_particles(PRIOR, 64, stream(8))
    before = ps.states.copy()
    predicted_observation_packet(ps, model, model.process_noise(), sensor, stream(9))
    assert np.array_equal(ps.states, before)
    assert ps.step == 0


def test_packet_rejects_unknown_mode():
    model = LinearCV()
    sensor, _ = make_sensor_pair(1.0, 4.0, 10.0, 3e-3)
    ps = init_particles(PRIOR, 8, stream(10))
    with pytest.raises(ValueError):
        predicted_observation_packet(
            ps, model, model.process_noise(), sensor, stream(11), noise_mode="magic"
        )


# --- transfer likelihood --------------------------------------------------------


def test_transfer_loglik_matches_scipy_oracle():
    packet = TransferPacket(
        eta_mean=np.array([500.0, 0.5]),
        eta_cov=np.array([[120.0, 0.01], [0.01, 4e-5]]),
        for_step=3,
    )
    states = stream(12).normal([350.0, 0, 350.0, 0], 20.0, size=(5, 4))
    got = transfer_loglik(states, packet)
    for i in range(5):
        expected = stats.multivariate_normal.logpdf(
            measure(states[i]), mean=packet.eta_mean, cov=packet.eta_cov
        )
        assert got[i] == pytest.approx(expected, rel=1e-10)


def test_transfer_loglik_wraps_bearing():
    r = 800.0
    packet = TransferPacket(
        eta_mean=np.array([r, math.pi - 0.01]),
        eta_cov=np.diag([100.0, 1e-4]),
        for_step=1,
    )
    across = np.array([r * math.cos(-math.pi + 0.01), 0.0, r * math.sin(-math.pi + 0.01), 0.0])
    aligned = np.array([r * math.cos(math.pi - 0.01), 0.0, r * math.sin(math.pi - 0.01), 0.0])
    ll = transfer_loglik(np.array([across, aligned]), packet)
    # the wrapped residual is -0.02 rad, not -2 pi + 0.02
    from dualtrack.numerics import gaussian_logpdf

    assert ll[0] == pytest.approx(
        gaussian_logpdf(np.array([0.0, -0.02]), packet.eta_cov), abs=1e-9
    )
    assert ll[1] == pytest.approx(
        gaussian_logpdf(np.array([0.0, 0.0]), packet.eta_cov), abs=1e-9
    )
    assert ll[0] > transfer_loglik(np.array([[r, 0.0, 0.0, 0.0]]), packet)[0]


# --- primary step ---------------------------------------------------------------


def test_primary_without_packet_is_isolated_step_bit_exact():
    model = LinearCV()
    _, sensor = make_sensor_pair(1.0, 4.0, 10.0, 3e-3)
    z = np.array([160.0, 0.75])
    ps_a = init_particles(PRIOR, 300, stream(13))
    ps_b = init_particles(PRIOR, 300, stream(13))
    rng_a, rng_b = stream(14), stream(14)
    for k in range(4):
        ps_a, est_a = sir_step(ps_a, z, model, sensor, rng_a)
        ps_b, est_b = primary_step(ps_b, z, None, model, sensor, rng_b)
        assert np.array_equal(ps_a.states, ps_b.states)
        assert np.array_equal(est_a.mean, est_b.mean)
        assert np.array_equal(est_a.cov, est_b.cov)


def test_primary_uninformative_packet_matches_measurement_only():
    model = LinearCV()
    _, sensor = make_sensor_pair(1.0, 4.0, 10.0, 3e-3)
    states = stream(15).normal([120.0, 10, 120.0, 10], 15.0, size=(40, 4))
    z = np.array([170.0, 0.8])
    meas_only = measurement_loglik(states, z, sensor)
    huge = TransferPacket(
        eta_mean=np.array([150.0, 0.7]),
        eta_cov=1e9 * np.diag([100.0, 1e-5]),
        for_step=1,
    )
    combined = transfer_loglik(states, huge) + meas_only

    def normalized(ll):
        w = np.exp(ll - ll.max())
        return w / w.sum()

    assert np.allclose(normalized(combined), normalized(meas_only), atol=1e-6)


def test_primary_two_particle_product_of_gaussians_oracle():
    model = LinearCV(ts=1.0, q=0.0)
    _, sensor = make_sensor_pair(1.0, 4.0, 10.0, 3e-3)
    packet = TransferPacket(
        eta_mean=np.array([210.0, 0.76]),
        eta_cov=np.diag([150.0, 2e-5]),
        for_step=1,
    )
    states = np.array([[150.0, 0.0, 150.0, 0.0], [160.0, 0.0, 140.0, 0.0]])
    z = np.array([215.0, 0.74])

    ps = init_particles(StateGaussian(states[0], np.zeros((4, 4))), 2, stream(16))
    ps.states = states.copy()
    out, _ = primary_step(ps, z, packet, model, sensor, stream(17), q_cov=np.zeros((4, 4)))

    # brute-force product of the two gaussian densities per particle
    predicted = model.transition(states)
    raw = np.empty(2)
    for i in range(2):
        zi = measure(predicted[i])
        raw[i] = stats.multivariate_normal.pdf(
            zi, mean=packet.eta_mean, cov=packet.eta_cov
        ) * stats.multivariate_normal.pdf(zi, mean=z, cov=sensor.cov)
    expected = raw / raw.sum()

    counts = np.array(
        [np.isclose(out.states, predicted[i]).all(axis=1).sum() for i in range(2)]
    )
    # resampled copies reflect the normalized product weights within +-1 copy
    assert np.all(np.abs(counts - 2 * expected) <= 1.0)


def test_primary_weight_chain_factorizes_appendix_ratio():
    _, sensor = make_sensor_pair(1.0, 4.0, 10.0, 3e-3)
    packet = TransferPacket(
        eta_mean=np.array([520.0, 0.52]),
        eta_cov=np.array([[140.0, 0.05], [0.05, 3e-5]]),
        for_step=9,
    )
    states = stream(18).normal([360.0, 5, 360.0, -5], 25.0, size=(12, 4))
    z = np.array([505.0, 0.54])
    combined = transfer_loglik(states, packet) + measurement_loglik(states, z, sensor)
    for i in range(1, 12):
        lhs = combined[i] - combined[0]
        rhs = (
            stats.multivariate_normal.logpdf(measure(states[i]), packet.eta_mean, packet.eta_cov)
            + stats.multivariate_normal.logpdf(measure(states[i]), z, sensor.cov)
            - stats.multivariate_normal.logpdf(measure(states[0]), packet.eta_mean, packet.eta_cov)
            - stats.multivariate_normal.logpdf(measure(states[0]), z, sensor.cov)
        )
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_primary_rejects_stale_packet():
    model = LinearCV()
    _, sensor = make_sensor_pair(1.0, 4.0, 10.0, 3e-3)
    ps = init_particles(PRIOR, 10, stream(19))
    stale = TransferPacket(np.array([100.0, 0.5]), np.eye(2), for_step=5)
    with pytest.raises(StaleTransferPacket):
        primary_step(ps, np.array([150.0, 0.8]), stale, model, sensor, stream(20))


# --- source step -----------------------------------------------------------------


def test_source_step_produces_packet_for_next_step():
    model = LinearCV()
    sensor, _ = make_sensor_pair(1.0, 4.0, 10.0, 3e-3)
    ps = init_particles(PRIOR, 100, stream(21))
    ps, estimate, packet = source_step(ps, np.array([155.0, 0.8]), model, sensor, stream(22))
    assert ps.step == 1
    assert packet.for_step == 2
    assert estimate.mean.shape == (4,)
    eig = np.linalg.eigvalsh(packet.eta_cov)
    min_sensor = np.linalg.eigvalsh(sensor.cov).min()
    assert eig.min() >= min_sensor - 1e-12


def test_source_is_never_influenced_by_primary():
    # the source sequence is identical whether or not a primary consumes packets
    model = LinearCV()
    sensor_star, sensor = make_sensor_pair(1.0, 4.0, 10.0, 3e-3)
    z_star = np.array([[155.0, 0.8], [165.0, 0.81], [175.0, 0.82]])
    z_pri = z_star + np.array([5.0, -0.01])

    gen = stream(23)
    alone = init_particles(PRIOR, 80, gen)
    states_alone = []
    for k in range(3):
        alone, _, _ = source_step(alone, z_star[k], model, sensor_star, gen)
        states_alone.append(alone.states.copy())

    result = run_dual(
        model, sensor_star, sensor, PRIOR, 80, z_star, z_pri,
        stream(23), stream(25),
    )
    assert np.array_equal(result.source_final.states, states_alone[-1])


# --- run_dual ---------------------------------------------------------------------


def test_run_dual_single_step_never_transfers():
    model = LinearCV()
    sensor_star, sensor = make_sensor_pair(1.0, 4.0, 10.0, 3e-3)
    z = np.array([[160.0, 0.78]])
    result = run_dual(model, sensor_star, sensor, PRIOR, 50, z, z, stream(26), stream(27))

    # isolated reference consuming the identically keyed stream
    gen = stream(27)
    ps_ref = init_particles(PRIOR, 50, gen)
    ps_ref, est_ref = sir_step(ps_ref, z[0], model, sensor, gen)
    assert np.array_equal(result.primary_estimates[0].mean, est_ref.mean)
    assert np.array_equal(result.primary_final.states, ps_ref.states)
    assert len(result.primary_estimates) == 1
    assert len(result.packets) == 1  # produced for step 2, never consumed


def test_run_dual_transfer_changes_primary_only_via_packets():
    model = LinearCV()
    sensor_star, sensor = make_sensor_pair(1.0, 1.0, 10.0, 3e-3)  # identical sensors
    rng = stream(28)
    z_star = np.column_stack([rng.normal(200, 5, 6), rng.normal(0.8, 0.01, 6)])
    z_pri = np.column_stack([rng.normal(200, 5, 6), rng.normal(0.8, 0.01, 6)])

    paired = run_dual(model, sensor_star, sensor, PRIOR, 60, z_star, z_pri,
                      stream(29), stream(30))

    gen = stream(30)
    ps = init_particles(PRIOR, 60, gen)
    iso_means = []
    for k in range(6):
        ps, est = sir_step(ps, z_pri[k], model, sensor, gen)
        iso_means.append(est.mean)

    # step 1 has no packet: identical; later steps differ through transfer
    assert np.allclose(paired.primary_estimates[0].mean, iso_means[0])
    later_diffs = [
        np.linalg.norm(paired.primary_estimates[k].mean - iso_means[k])
        for k in range(1, 6)
    ]
    assert max(later_diffs) > 0.0


def test_run_dual_length_mismatch():
    model = LinearCV()
    sensor_star, sensor = make_sensor_pair(1.0, 4.0, 10.0, 3e-3)
    with pytest.raises(LengthMismatch):
        run_dual(model, sensor_star, sensor, PRIOR, 10,
                 np.zeros((3, 2)), np.zeros((4, 2)), stream(31), stream(32))


def test_run_dual_replay_reproduces_primary_bit_exact():
    model = CoordinatedTurn(ts=1.0, q1=0.1, q2=1.75e-4)
    sensor_star, sensor = make_sensor_pair(1.0, 4.0, 10.0, math.sqrt(10) * 1e-3)
    prior = StateGaussian(
        mean=np.array([1000.0, 300.0, 1000.0, 0.0, -3 * math.pi / 180]),
        cov=np.diag([100.0, 10.0, 100.0, 10.0, 0.1]),
    )
    rng = stream(33)
    truth = prior.mean.copy()
    z_star, z_pri = [], []
    for _ in range(12):
        truth = model.transition(truth)
        z = measure(truth)
        z_star.append(z + rng.normal(0, [10.0, 3e-3]))
        z_pri.append(z + rng.normal(0, [20.0, 6e-3]))
    z_star, z_pri = np.array(z_star), np.array(z_pri)

    live = run_dual(model, sensor_star, sensor, prior, 150, z_star, z_pri,
                    stream(34), stream(35))
    replayed = run_dual(model, sensor_star, sensor, prior, 150, z_star, z_pri,
                        stream(34), stream(35), replay_packets=live.packets)
    for a, b in zip(live.primary_estimates, replayed.primary_estimates):
        assert np.array_equal(a.mean, b.mean)


def test_transfer_beats_isolated_on_scenario_smoke():
    # paired-run majority check at desk scale
    from dualtrack.harness import ScenarioConfig, generate_measurements, generate_truth

    config = ScenarioConfig(scenario="S2", mc_runs=10, master_seed=404, steps=100)
    model = config.motion_model()
    q_cov = model.process_noise()
    truth = generate_truth(config)
    true_pos = truth[1:, [0, 2]]
    sensor_star, sensor = config.sensors(4.0)
    wins = 0
    for run in range(10):
        z_star = generate_measurements(truth, sensor_star, stream(404, run, 1))
        z_pri = generate_measurements(truth, sensor, stream(404, run, 2))
        paired = run_dual(model, sensor_star, sensor, config.prior(), 500,
                          z_star, z_pri, stream(404, run, 3), stream(404, run, 4))
        gen = stream(404, run, 4)
        ps = init_particles(config.prior(), 500, gen)
        err_tl = err_iso = 0.0
        for k in range(100):
            ps, est = sir_step(ps, z_pri[k], model, sensor, gen, q_cov=q_cov)
            err_iso += np.sum((est.mean[[0, 2]] - true_pos[k]) ** 2)
            err_tl += np.sum((paired.primary_estimates[k].mean[[0, 2]] - true_pos[k]) ** 2)
        if err_tl < err_iso:
            wins += 1
    assert wins >= 6


# --- packet files ------------------------------------------------------------------


def test_packet_file_round_trip_exact(tmp_path):
    packets = [
        TransferPacket(
            eta_mean=np.array([1414.2135623730951, 0.7853981633974483]),
            eta_cov=np.array([[123.45678901234567, 0.002], [0.002, 4.2e-5]]),
            for_step=k,
        )
        for k in range(2, 7)
    ]
    path = tmp_path / "packets.txt"
    write_packets(path, packets)
    loaded = read_packets(path)
    assert len(loaded) == len(packets)
    for a, b in zip(packets, loaded):
        assert a.for_step == b.for_step
        assert np.array_equal(a.eta_mean, b.eta_mean)
        assert np.array_equal(a.eta_cov, b.eta_cov)


def test_packet_file_rejects_malformed(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("# header\n1,2,3\n")
    with pytest.raises(ValueError):
        read_packets(path)
