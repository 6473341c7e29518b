"""Sigma-point baselines against an exact Kalman filter oracle."""
import numpy as np
import pytest

from dualtrack.errors import StaleTransferPacket
from dualtrack.gaussian import (
    CubatureRule,
    GaussianFilterState,
    JulierSigmaRule,
    gf_predict,
    gf_tl_update,
    gf_update,
    source_gf_packet,
)
from dualtrack.harness import ScenarioConfig, generate_measurements, generate_truth
from dualtrack.models import CoordinatedTurn, LinearCV, measure
from dualtrack.numerics import CholStats
from dualtrack.rng import stream
from dualtrack.transfer import TransferPacket

RULES = [JulierSigmaRule(2.0), CubatureRule()]

H_MAT = np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]])
F_MAT = np.array([[1, 1, 0, 0], [0, 1, 0, 0], [0, 0, 1, 1], [0, 0, 0, 1.0]])


def linear_h(points):
    return points @ H_MAT.T


def kalman_predict(mean, cov, q_cov):
    return F_MAT @ mean, F_MAT @ cov @ F_MAT.T + q_cov


def kalman_update(mean, cov, z, r_cov):
    s = H_MAT @ cov @ H_MAT.T + r_cov
    gain = cov @ H_MAT.T @ np.linalg.inv(s)
    mean2 = mean + gain @ (z - H_MAT @ mean)
    cov2 = cov - gain @ s @ gain.T
    return mean2, 0.5 * (cov2 + cov2.T)


# --- point sets ---------------------------------------------------------------


@pytest.mark.parametrize("rule", RULES, ids=["ukf", "ckf3"])
def test_point_set_reconstructs_moments(rule, rng):
    for _ in range(10):
        n = rng.integers(2, 6)
        a = rng.standard_normal((n, n))
        cov = a @ a.T + 0.1 * np.eye(n)
        mean = rng.standard_normal(n) * 10
        sp = rule.points(mean, cov)
        assert sp.weights_mean.sum() == pytest.approx(1.0, abs=1e-12)
        got_mean = sp.weights_mean @ sp.points
        centered = sp.points - got_mean
        got_cov = centered.T @ (centered * sp.weights_cov[:, None])
        assert np.allclose(got_mean, mean, atol=1e-10)
        assert np.allclose(got_cov, cov, atol=1e-10)


def test_point_counts_at_dimension_five():
    mean, cov = np.zeros(5), np.eye(5)
    assert JulierSigmaRule(2.0).points(mean, cov).points.shape == (11, 5)
    assert CubatureRule().points(mean, cov).points.shape == (10, 5)
    assert JulierSigmaRule(2.0).n_points(5) == 11
    assert CubatureRule().n_points(5) == 10


# --- predict -------------------------------------------------------------------


@pytest.mark.parametrize("rule", RULES, ids=["ukf", "ckf3"])
def test_predict_exact_on_linear_model(rule):
    model = LinearCV(ts=1.0, q=0.1)
    q_cov = model.process_noise()
    mean = np.array([10.0, 1.0, -5.0, 2.0])
    cov = np.diag([4.0, 1.0, 4.0, 1.0])
    st = gf_predict(GaussianFilterState(mean, cov), rule, model, q_cov)
    k_mean, k_cov = kalman_predict(mean, cov, q_cov)
    assert np.allclose(st.mean, k_mean, atol=1e-9)
    assert np.allclose(st.cov, k_cov, atol=1e-9)
    assert st.step == 1


@pytest.mark.parametrize("rule", RULES, ids=["ukf", "ckf3"])
def test_predict_zero_covariance_collapses_to_mean(rule):
    model = CoordinatedTurn(ts=1.0, q1=0.0, q2=0.0)
    mean = np.array([1000.0, 300.0, 1000.0, 0.0, -0.05])
    st = gf_predict(
        GaussianFilterState(mean, np.zeros((5, 5))), rule, model, np.zeros((5, 5))
    )
    assert np.allclose(st.mean, model.transition(mean), atol=1e-9)
    assert np.allclose(st.cov, 0.0, atol=1e-12)


# --- update --------------------------------------------------------------------


@pytest.mark.parametrize("rule", RULES, ids=["ukf", "ckf3"])
def test_update_matches_kalman_oracle(rule):
    r_cov = np.diag([4.0, 9.0])
    mean = np.array([0.0, 1.0, 0.0, -1.0])
    cov = np.array(
        [[4.0, 0.5, 0, 0], [0.5, 1.0, 0, 0], [0, 0, 4.0, -0.5], [0, 0, -0.5, 1.0]]
    )
    z = np.array([1.5, -2.0])
    st = gf_update(GaussianFilterState(mean, cov), rule, z, linear_h, r_cov)
    k_mean, k_cov = kalman_update(mean, cov, z, r_cov)
    assert np.allclose(st.mean, k_mean, atol=1e-9)
    assert np.allclose(st.cov, k_cov, atol=1e-9)


@pytest.mark.parametrize("rule", RULES, ids=["ukf", "ckf3"])
def test_update_huge_noise_is_noop(rule):
    mean = np.array([100.0, 1.0, 100.0, 1.0])
    cov = np.diag([25.0, 1.0, 25.0, 1.0])
    z = np.array([140.0, 90.0])
    st = gf_update(
        GaussianFilterState(mean, cov), rule, z, linear_h, 1e9 * np.diag([4.0, 4.0])
    )
    assert np.allclose(st.mean, mean, atol=1e-6)
    assert np.allclose(st.cov, cov, atol=1e-3)


@pytest.mark.parametrize("rule", RULES, ids=["ukf", "ckf3"])
def test_update_zero_innovation_keeps_mean(rule):
    mean = np.array([100.0, 1.0, 200.0, 1.0])
    cov = np.diag([25.0, 1.0, 25.0, 1.0])
    st = gf_update(
        GaussianFilterState(mean, cov), rule, H_MAT @ mean, linear_h, np.eye(2)
    )
    assert np.allclose(st.mean, mean, atol=1e-9)


def test_multi_step_linear_agreement_with_kalman():
    # both rules track an exact Kalman filter through a 50-step run
    model = LinearCV(ts=1.0, q=0.1)
    q_cov = model.process_noise()
    r_cov = np.diag([4.0, 4.0])
    rng = stream(314)
    truth = np.array([0.0, 2.0, 0.0, -1.0])
    k_mean = truth.copy()
    k_cov = np.diag([10.0, 1.0, 10.0, 1.0])
    states = {id(rule): GaussianFilterState(k_mean.copy(), k_cov.copy()) for rule in RULES}
    for _ in range(50):
        truth = model.transition(truth)
        z = H_MAT @ truth + rng.normal(0, 2.0, size=2)
        k_mean, k_cov = kalman_predict(k_mean, k_cov, q_cov)
        k_mean, k_cov = kalman_update(k_mean, k_cov, z, r_cov)
        for rule in RULES:
            st = states[id(rule)]
            st = gf_predict(st, rule, model, q_cov)
            st = gf_update(st, rule, z, linear_h, r_cov)
            states[id(rule)] = st
            assert np.allclose(st.mean, k_mean, atol=1e-8)
            assert np.allclose(st.cov, k_cov, atol=1e-8)


# --- transfer updates ------------------------------------------------------------


@pytest.mark.parametrize("rule", RULES, ids=["ukf", "ckf3"])
def test_tl_update_is_second_measurement_update(rule):
    mean = np.array([50.0, 1.0, 80.0, -1.0])
    cov = np.diag([16.0, 1.0, 16.0, 1.0])
    packet = TransferPacket(
        eta_mean=np.array([52.0, 81.0]), eta_cov=np.diag([9.0, 9.0]), for_step=0
    )
    a = gf_tl_update(GaussianFilterState(mean, cov), rule, packet, linear_h)
    b = gf_update(GaussianFilterState(mean, cov), rule, packet.eta_mean, linear_h,
                  packet.eta_cov)
    assert np.allclose(a.mean, b.mean, atol=1e-12)
    assert np.allclose(a.cov, b.cov, atol=1e-12)


def test_tl_update_rejects_stale_packet():
    packet = TransferPacket(np.zeros(2), np.eye(2), for_step=4)
    with pytest.raises(StaleTransferPacket):
        gf_tl_update(
            GaussianFilterState(np.zeros(4), np.eye(4), step=3),
            RULES[0], packet, linear_h,
        )


@pytest.mark.parametrize("rule", RULES, ids=["ukf", "ckf3"])
def test_tl_update_huge_packet_covariance_is_noop(rule):
    mean = np.array([50.0, 1.0, 80.0, -1.0])
    cov = np.diag([16.0, 1.0, 16.0, 1.0])
    packet = TransferPacket(
        eta_mean=np.array([500.0, -800.0]),
        eta_cov=1e9 * np.diag([9.0, 9.0]),
        for_step=0,
    )
    st = gf_tl_update(GaussianFilterState(mean, cov), rule, packet, linear_h)
    assert np.allclose(st.mean, mean, atol=1e-5)


@pytest.mark.parametrize("rule", RULES, ids=["ukf", "ckf3"])
def test_tl_and_measurement_updates_commute_on_linear_h(rule):
    mean = np.array([50.0, 1.0, 80.0, -1.0])
    cov = np.diag([16.0, 1.0, 16.0, 1.0])
    packet = TransferPacket(
        eta_mean=np.array([53.0, 78.0]), eta_cov=np.diag([25.0, 25.0]), for_step=0
    )
    z = np.array([49.0, 82.0])
    r_cov = np.diag([4.0, 4.0])
    st0 = GaussianFilterState(mean, cov)
    ab = gf_update(gf_tl_update(st0, rule, packet, linear_h), rule, z, linear_h, r_cov)
    st0 = GaussianFilterState(mean, cov)
    ba = gf_tl_update(gf_update(st0, rule, z, linear_h, r_cov), rule, packet, linear_h)
    assert np.allclose(ab.mean, ba.mean, atol=1e-6)
    assert np.allclose(ab.cov, ba.cov, atol=1e-6)


@pytest.mark.parametrize("rule", RULES, ids=["ukf", "ckf3"])
def test_tl_update_from_confident_source_shrinks_covariance(rule):
    mean = np.array([50.0, 1.0, 80.0, -1.0])
    cov = np.diag([16.0, 1.0, 16.0, 1.0])
    packet = TransferPacket(
        eta_mean=np.array([50.0, 80.0]), eta_cov=np.diag([1.0, 1.0]), for_step=0
    )
    st = gf_tl_update(GaussianFilterState(mean, cov), rule, packet, linear_h)
    assert np.trace(st.cov) < np.trace(cov)


# --- source packets ---------------------------------------------------------------


@pytest.mark.parametrize("rule", RULES, ids=["ukf", "ckf3"])
def test_source_packet_matches_kalman_predicted_measurement(rule):
    model = LinearCV(ts=1.0, q=0.1)
    q_cov = model.process_noise()
    meas_cov = np.diag([4.0, 9.0])
    mean = np.array([10.0, 1.0, -4.0, 0.5])
    cov = np.diag([9.0, 1.0, 9.0, 1.0])
    packet = source_gf_packet(
        GaussianFilterState(mean, cov), rule, model, linear_h, meas_cov, q_cov
    )
    k_mean, k_cov = kalman_predict(mean, cov, q_cov)
    assert np.allclose(packet.eta_mean, H_MAT @ k_mean, atol=1e-9)
    assert np.allclose(packet.eta_cov, H_MAT @ k_cov @ H_MAT.T + meas_cov, atol=1e-9)
    assert packet.for_step == 1


@pytest.mark.parametrize("rule", RULES, ids=["ukf", "ckf3"])
def test_source_packet_zero_state_covariance(rule):
    model = LinearCV(ts=1.0, q=0.0)
    meas_cov = np.diag([4.0, 9.0])
    mean = np.array([10.0, 1.0, -4.0, 0.5])
    packet = source_gf_packet(
        GaussianFilterState(mean, np.zeros((4, 4))), rule, model, linear_h, meas_cov,
        np.zeros((4, 4)),
    )
    assert np.allclose(packet.eta_cov, meas_cov, atol=1e-10)


def test_source_packet_scenario_smoke():
    cfg = ScenarioConfig(scenario="S2", master_seed=2)
    model = cfg.motion_model()
    sensor_star, _ = cfg.sensors(4.0)
    state = GaussianFilterState(cfg.initial_state(), cfg.initial_cov())
    packet = source_gf_packet(
        state, CubatureRule(), model, measure, sensor_star.cov, model.process_noise()
    )
    assert np.all(np.isfinite(packet.eta_mean))
    assert np.linalg.eigvalsh(packet.eta_cov).min() > 0


# --- long-run stability --------------------------------------------------------------


@pytest.mark.parametrize("rule", RULES, ids=["ukf", "ckf3"])
def test_hundred_step_scenario_stays_psd(rule):
    cfg = ScenarioConfig(scenario="S2", master_seed=3)
    model = cfg.motion_model()
    q_cov = model.process_noise()
    truth = generate_truth(cfg)
    _, sensor = cfg.sensors(4.0)
    z = generate_measurements(truth, sensor, stream(3, 0, 2))
    stats = CholStats()
    st = GaussianFilterState(cfg.initial_state(), cfg.initial_cov())
    for k in range(cfg.steps):
        st = gf_predict(st, rule, model, q_cov, stats)
        st = gf_update(st, rule, z[k], measure, sensor.cov, (1,), stats)
        assert np.allclose(st.cov, st.cov.T, atol=1e-10)
        assert np.linalg.eigvalsh(st.cov).min() > -1e-8
    # report the jitter counter contract: it exists and stays small here
    assert stats.jitter_count <= 5
