"""Scenario generation, Monte-Carlo execution and accuracy/timing metrics.

A scenario is fully described by a :class:`ScenarioConfig`; everything a
run produces is a pure function of it, including the master seed.  Runs
are farmed out to a process pool, but each run derives its own random
streams from ``(master_seed, run, purpose)``, and aggregation follows
run-index order, so the results are bit-identical no matter how many
workers execute them.

Per run, one truth trajectory and one measurement pair are generated and
every configured filter consumes the identical data; isolated and
transfer variants of the same filter also share their internal stream,
so the transferred packet is the only thing that differs inside a pair.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .errors import ConfigError, LengthMismatch
from .gaussian import (
    CubatureRule,
    GaussianFilterState,
    JulierSigmaRule,
    gf_predict,
    gf_tl_update,
    gf_update,
    source_gf_packet,
)
from .models import (
    CoordinatedTurn,
    LinearCV,
    MotionModel,
    SensorModel,
    make_sensor_pair,
    measure,
    wrap_angle,
)
from .numerics import sample_gaussian
from .particle import StateGaussian, init_particles, sir_step
from .transfer import PACKET_NOISE_MODES, primary_step, source_step

Array = np.ndarray

_DEG = math.pi / 180.0

_SCENARIO_X0 = {
    "S1": (100.0, 10.0, 100.0, 10.0),
    "S2": (1000.0, 300.0, 1000.0, 0.0, -3.0 * _DEG),
}
_SCENARIO_P0 = {
    "S1": (50.0, 1.0, 50.0, 1.0),
    "S2": (100.0, 10.0, 100.0, 10.0, 100e-3),
}

FILTER_KINDS = ("pf", "ukf", "ckf3")


@dataclass(frozen=True)
class FilterSpec:
    """One tracker in the roster: kind, transfer flag, particle count."""

    kind: str
    transfer: bool = False
    n_particles: int | None = None

    @property
    def filter_id(self) -> str:
        base = self.kind if self.kind != "pf" else (
            f"pf:{self.n_particles}" if self.n_particles else "pf"
        )
        return f"tl-{base}" if self.transfer else base

    @property
    def family(self) -> str:
        """Identifier without the transfer prefix (pairs share it)."""
        return self.filter_id.removeprefix("tl-")

    def resource(self, dim: int) -> int:
        """Particle count for pf, deterministic point count otherwise."""
        if self.kind == "pf":
            return int(self.n_particles or 0)
        return 2 * dim + 1 if self.kind == "ukf" else 2 * dim


def parse_filter_token(token: str) -> FilterSpec:
    """Parse one roster token such as ``pf:3000``, ``tl-ukf`` or ``ckf3``."""
    token = token.strip().lower()
    transfer = token.startswith("tl-")
    body = token.removeprefix("tl-")
    kind, _, count = body.partition(":")
    if kind not in FILTER_KINDS:
        raise ConfigError(f"unknown filter kind {token!r}")
    n_particles = None
    if kind == "pf":
        if not count:
            raise ConfigError(f"particle filter token needs a count, e.g. pf:3000 ({token!r})")
        try:
            n_particles = int(count)
        except ValueError:
            raise ConfigError(f"bad particle count in {token!r}") from None
        if n_particles < 1:
            raise ConfigError(f"particle count must be >= 1 in {token!r}")
    elif count:
        raise ConfigError(f"{kind} takes no count ({token!r})")
    return FilterSpec(kind=kind, transfer=transfer, n_particles=n_particles)


def parse_filter_list(text: str) -> tuple[FilterSpec, ...]:
    tokens = [t for t in text.split(",") if t.strip()]
    if not tokens:
        raise ConfigError("empty filter roster")
    return tuple(parse_filter_token(t) for t in tokens)


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one experiment.

    ``intensity_primary`` may hold several values (a sweep); every filter
    runs once per value.  ``master_seed`` must be set before running.
    """

    scenario: str = "S2"
    steps: int = 100
    ts: float = 1.0
    q1: float = 0.1
    q2: float = 1.75e-4
    sigma_r: float = 10.0
    sigma_zeta: float = math.sqrt(10.0) * 1e-3
    intensity_source: float = 1.0
    intensity_primary: tuple[float, ...] = (4.0,)
    x0: tuple[float, ...] | None = None
    p0_diag: tuple[float, ...] | None = None
    filters: tuple[FilterSpec, ...] = (
        FilterSpec("pf", False, 3000),
        FilterSpec("pf", True, 3000),
    )
    mc_runs: int = 500
    master_seed: int | None = None
    workers: int | None = None
    packet_noise_mode: str = "verbatim"
    kappa: float = 2.0
    # "nominal": one deterministic trajectory from the exact initial state
    # (the benchmark convention); "sampled": initial state drawn from the
    # prior and process noise injected, a fresh realization per run.
    truth_mode: str = "nominal"

    def validate(self, require_seed: bool = True) -> None:
        if self.scenario not in _SCENARIO_X0:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.mc_runs < 1:
            raise ConfigError("mc must be >= 1")
        if self.ts <= 0.0:
            raise ConfigError("T_s must be positive")
        if self.q1 < 0.0 or self.q2 < 0.0:
            raise ConfigError("process noise parameters must be >= 0")
        if self.sigma_r <= 0.0 or self.sigma_zeta <= 0.0:
            raise ConfigError("sensor sigmas must be positive")
        if self.intensity_source <= 0.0:
            raise ConfigError(f"out-of-range source intensity {self.intensity_source}")
        if not self.intensity_primary:
            raise ConfigError("at least one primary intensity required")
        for iw in self.intensity_primary:
            if iw <= 0.0:
                raise ConfigError(f"out-of-range intensity I_w={iw}")
        if not self.filters:
            raise ConfigError("empty filter roster")
        if self.packet_noise_mode not in PACKET_NOISE_MODES:
            raise ConfigError(f"unknown packet_noise_mode {self.packet_noise_mode!r}")
        if self.truth_mode not in ("nominal", "sampled"):
            raise ConfigError(f"unknown truth_mode {self.truth_mode!r}")
        if require_seed and self.master_seed is None:
            raise ConfigError("missing seed (set master_seed or pass --seed)")

    # -- derived pieces -----------------------------------------------------

    def motion_model(self) -> MotionModel:
        if self.scenario == "S1":
            return LinearCV(ts=self.ts, q=self.q1)
        return CoordinatedTurn(ts=self.ts, q1=self.q1, q2=self.q2)

    def initial_state(self) -> Array:
        return np.array(self.x0 if self.x0 is not None else _SCENARIO_X0[self.scenario])

    def initial_cov(self) -> Array:
        diag = self.p0_diag if self.p0_diag is not None else _SCENARIO_P0[self.scenario]
        return np.diag(diag)

    def prior(self) -> StateGaussian:
        return StateGaussian(mean=self.initial_state(), cov=self.initial_cov())

    def sensors(self, intensity_primary: float) -> tuple[SensorModel, SensorModel]:
        return make_sensor_pair(
            self.intensity_source, intensity_primary, self.sigma_r, self.sigma_zeta
        )


# --- data generation --------------------------------------------------------


def generate_truth(
    config: ScenarioConfig,
    rng: np.random.Generator | None = None,
    mode: str | None = None,
) -> Array:
    """Simulate one truth trajectory, shape (steps+1, dim).

    In ``sampled`` mode the initial state is drawn from the scenario
    prior and process noise is applied after every transition, giving a
    fresh realization per run.  In ``nominal`` mode (the benchmark
    default) the trajectory is the deterministic path from the exact
    initial state; the filters still assume the configured process
    noise.  Both sensors observe the single returned truth.
    """
    mode = mode if mode is not None else config.truth_mode
    model = config.motion_model()
    if mode == "nominal":
        x = config.initial_state()
        out = np.empty((config.steps + 1, x.size))
        out[0] = x
        for k in range(1, config.steps + 1):
            x = model.transition(x)
            out[k] = x
        return out
    if rng is None:
        raise ConfigError("sampled truth needs a random stream")
    q_cov = model.process_noise()
    x = sample_gaussian(config.initial_state(), config.initial_cov(), rng)
    out = np.empty((config.steps + 1, x.size))
    out[0] = x
    for k in range(1, config.steps + 1):
        x = model.transition(x) + sample_gaussian(np.zeros(x.size), q_cov, rng)
        out[k] = x
    return out


def generate_measurements(
    truth: Array, sensor: SensorModel, rng: np.random.Generator
) -> Array:
    """Range-bearing measurements of truth[1:], noise added, bearing wrapped."""
    clean = measure(truth[1:])
    noisy = clean + sample_gaussian(np.zeros(2), sensor.cov, rng, size=len(clean))
    noisy[:, 1] = wrap_angle(noisy[:, 1])
    return noisy


# --- metrics ----------------------------------------------------------------


def rmse_per_step(true_pos: Array, est_pos: Array) -> Array:
    """Per-step position RMSE over Monte-Carlo runs.

    Both arrays have shape (runs, steps, 2) (a single run may be passed
    as (steps, 2)).  Returns ``sqrt(mean_m |err_{m,k}|^2)`` per step,
    using the Euclidean position norm.
    """
    true_pos = np.asarray(true_pos, dtype=float)
    est_pos = np.asarray(est_pos, dtype=float)
    if true_pos.ndim == 2:
        true_pos = true_pos[None]
    if est_pos.ndim == 2:
        est_pos = est_pos[None]
    if true_pos.shape != est_pos.shape:
        raise LengthMismatch(f"{true_pos.shape} truth vs {est_pos.shape} estimates")
    sq = np.sum((true_pos - est_pos) ** 2, axis=-1)
    return np.sqrt(np.mean(sq, axis=0))


def overall_rmse(rmse_series: Array) -> float:
    """Average of the per-step RMSE values."""
    return float(np.mean(np.asarray(rmse_series, dtype=float)))


def delta_rmse(isolated: float, transferred: float) -> float:
    """Accuracy gain of the transfer variant (positive means it helped)."""
    return isolated - transferred


def delta_intensity(intensity_primary: float, intensity_source: float) -> float:
    """Absolute noise-intensity asymmetry of the sensor pair."""
    return abs(intensity_primary - intensity_source)


@dataclass
class RunMetrics:
    """Aggregated accuracy and timing for one (filter, intensity) cell."""

    rmse_per_step: Array
    overall_rmse: float
    time_per_step_ms: float
    time_per_step_ms_median: float
    degenerate_weight_events: int


@dataclass
class ExperimentCell:
    spec: FilterSpec
    intensity_primary: float
    resource: int
    metrics: RunMetrics


@dataclass
class ExperimentResult:
    config: ScenarioConfig
    cells: list[ExperimentCell] = field(default_factory=list)

    def cell(self, filter_id: str, intensity_primary: float) -> ExperimentCell:
        for c in self.cells:
            if (
                c.spec.filter_id == filter_id
                and c.intensity_primary == intensity_primary
            ):
                return c
        raise KeyError(f"no cell ({filter_id!r}, I_w={intensity_primary})")


# --- per-run execution -------------------------------------------------------


def _run_particle_isolated(model, q_cov, prior, n_particles, z_series, sensor, rng):
    ps = init_particles(prior, n_particles, rng)
    est = np.empty((len(z_series), 2))
    elapsed = 0.0
    for k, z in enumerate(z_series):
        t0 = time.perf_counter()
        ps, summary = sir_step(ps, z, model, sensor, rng, q_cov=q_cov)
        elapsed += time.perf_counter() - t0
        est[k] = summary.mean[[0, 2]]
    return est, elapsed, ps.degenerate_events


def _run_particle_transfer(
    model, q_cov, prior, n_particles, z_star, z_series, sensor_star, sensor,
    rng_source, rng_primary, noise_mode,
):
    ps_star = init_particles(prior, n_particles, rng_source)
    ps = init_particles(prior, n_particles, rng_primary)
    est = np.empty((len(z_series), 2))
    elapsed = 0.0
    pending = None
    for k in range(len(z_series)):
        ps_star, _, packet = source_step(
            ps_star, z_star[k], model, sensor_star, rng_source,
            q_cov=q_cov, noise_mode=noise_mode,
        )
        t0 = time.perf_counter()
        ps, summary = primary_step(
            ps, z_series[k], pending, model, sensor, rng_primary, q_cov=q_cov
        )
        elapsed += time.perf_counter() - t0
        est[k] = summary.mean[[0, 2]]
        pending = packet
    return est, elapsed, ps.degenerate_events + ps_star.degenerate_events


def _run_gaussian(model, q_cov, prior, rule, z_star, z_series, sensor_star, sensor,
                  transfer: bool):
    state = GaussianFilterState(mean=prior.mean.copy(), cov=prior.cov.copy())
    src = GaussianFilterState(mean=prior.mean.copy(), cov=prior.cov.copy())
    est = np.empty((len(z_series), 2))
    elapsed = 0.0
    pending = None
    angle = (1,)
    for k, z in enumerate(z_series):
        packet = None
        if transfer:
            src = gf_predict(src, rule, model, q_cov)
            src = gf_update(src, rule, z_star[k], measure, sensor_star.cov, angle)
            packet = source_gf_packet(src, rule, model, measure, sensor_star.cov, q_cov)
        t0 = time.perf_counter()
        state = gf_predict(state, rule, model, q_cov)
        if pending is not None:
            state = gf_tl_update(state, rule, pending, measure, angle)
        state = gf_update(state, rule, z, measure, sensor.cov, angle)
        elapsed += time.perf_counter() - t0
        est[k] = state.mean[[0, 2]]
        pending = packet
    return est, elapsed, 0


def _simulate_run(args: tuple[ScenarioConfig, float, int]):
    """Worker body: one MC run of every configured filter at one intensity."""
    config, intensity, run = args
    seed = config.master_seed
    model = config.motion_model()
    q_cov = model.process_noise()
    prior = config.prior()
    truth = generate_truth(config, rngmod.stream(seed, run, rngmod.TRUTH))
    sensor_star, sensor = config.sensors(intensity)
    z_star = generate_measurements(
        truth, sensor_star, rngmod.stream(seed, run, rngmod.MEAS_SOURCE)
    )
    z_pri = generate_measurements(
        truth, sensor, rngmod.stream(seed, run, rngmod.MEAS_PRIMARY)
    )
    true_pos = truth[1:, [0, 2]]

    out = []
    for spec in config.filters:
        if spec.kind == "pf":
            if spec.transfer:
                est, elapsed, events = _run_particle_transfer(
                    model, q_cov, prior, spec.n_particles, z_star, z_pri,
                    sensor_star, sensor,
                    rngmod.stream(seed, run, rngmod.FILTER_SOURCE),
                    rngmod.stream(seed, run, rngmod.FILTER_PRIMARY),
                    config.packet_noise_mode,
                )
            else:
                est, elapsed, events = _run_particle_isolated(
                    model, q_cov, prior, spec.n_particles, z_pri, sensor,
                    rngmod.stream(seed, run, rngmod.FILTER_PRIMARY),
                )
        else:
            rule = JulierSigmaRule(config.kappa) if spec.kind == "ukf" else CubatureRule()
            est, elapsed, events = _run_gaussian(
                model, q_cov, prior, rule, z_star, z_pri, sensor_star, sensor,
                spec.transfer,
            )
        sq_err = np.sum((true_pos - est) ** 2, axis=1)
        out.append((sq_err, elapsed, events))
    return out


def run_experiment(config: ScenarioConfig) -> ExperimentResult:
    """Run the configured Monte-Carlo experiment for every intensity cell.

    Results are deterministic given the config (timing excepted): runs
    consume streams derived only from the master seed and run index, and
    aggregation sums in run order regardless of worker count.
    """
    config.validate()
    dim = config.motion_model().dim
    result = ExperimentResult(config=config)
    if config.workers is not None:
        workers = config.workers
    else:
        workers = min(os.cpu_count() or 1, config.mc_runs)
    for intensity in config.intensity_primary:
        tasks = [(config, intensity, run) for run in range(config.mc_runs)]
        if workers > 1 and config.mc_runs > 1:
            chunk = max(1, config.mc_runs // (workers * 4))
            with ProcessPoolExecutor(max_workers=workers) as pool:
                per_run = list(pool.map(_simulate_run, tasks, chunksize=chunk))
        else:
            per_run = [_simulate_run(t) for t in tasks]

        for i, spec in enumerate(config.filters):
            total_sq = np.zeros(config.steps)
            times = np.empty(config.mc_runs)
            events = 0
            for run, run_result in enumerate(per_run):
                sq_err, elapsed, ev = run_result[i]
                total_sq += sq_err
                times[run] = elapsed
                events += ev
            rmse_k = np.sqrt(total_sq / config.mc_runs)
            per_step_ms = times / config.steps * 1e3
            metrics = RunMetrics(
                rmse_per_step=rmse_k,
                overall_rmse=overall_rmse(rmse_k),
                time_per_step_ms=float(np.mean(per_step_ms)),
                time_per_step_ms_median=float(np.median(per_step_ms)),
                degenerate_weight_events=events,
            )
            result.cells.append(
                ExperimentCell(
                    spec=spec,
                    intensity_primary=intensity,
                    resource=spec.resource(dim),
                    metrics=metrics,
                )
            )
    return result
