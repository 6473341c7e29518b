"""Command-line front end: config parsing, experiment runs, CSV output.

Subcommands: ``run`` executes a configured Monte-Carlo experiment and
writes the CSV bundle, ``dump-packets``/``replay-packets`` exercise the
transfer-packet file format on a single run, ``selftest`` runs the small
built-in oracle suite.  Exit codes: 0 success, 1 configuration error,
2 numerical failure.

Determinism contract: with the same arguments (and without ``--timing``)
two invocations of ``run`` produce byte-identical files.  Wall-clock
timing can never be reproducible, so the time column is only filled when
``--timing`` is requested.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__ as VERSION
from . import rng as rngmod
from .errors import ConfigError, DualTrackError
from .harness import (
    ExperimentResult,
    ScenarioConfig,
    delta_intensity,
    delta_rmse,
    generate_measurements,
    generate_truth,
    parse_filter_list,
    run_experiment,
)
from .transfer import read_packets, run_dual, write_packets

RMSE_CURVE_HEADER = "k,filter_id,I_w,rmse_m"
OVERALL_HEADER = "filter_id,I_w,N_s,overall_rmse_m,time_per_step_ms,isolated_or_tl"
DELTA_HEADER = "delta_Iw,filter_id,delta_rmse_m"


def _fmt(x: float) -> str:
    """Locale-independent six-significant-digit number formatting."""
    return "%.6g" % x


# --- config files -----------------------------------------------------------

_INT_KEYS = {"steps": "steps", "k": "steps", "mc": "mc_runs", "seed": "master_seed",
             "workers": "workers"}
_FLOAT_KEYS = {"ts": "ts", "t_s": "ts", "q": "q1", "q1": "q1", "q2": "q2",
               "sigma_r": "sigma_r", "sigma_zeta": "sigma_zeta",
               "i_source": "intensity_source", "i_star": "intensity_source",
               "kappa": "kappa"}
_STR_KEYS = {"packet_noise_mode": "packet_noise_mode", "truth_mode": "truth_mode"}


def _parse_intensity_field(text: str) -> tuple[float, ...]:
    text = text.strip()
    if ".." in text:
        lo_s, _, hi_s = text.partition("..")
        try:
            lo, hi = int(lo_s), int(hi_s)
        except ValueError:
            raise ConfigError(f"bad intensity sweep {text!r}") from None
        if hi < lo:
            raise ConfigError(f"empty intensity sweep {text!r}")
        return tuple(float(v) for v in range(lo, hi + 1))
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"bad intensity value {text!r}") from None


def parse_config(path) -> ScenarioConfig:
    """Read a ``key = value`` config file into a ScenarioConfig.

    Unknown keys and out-of-range values raise :class:`ConfigError`.
    Anything not mentioned keeps the scenario defaults; the seed may be
    supplied later via ``--seed``.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    overrides: dict = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key = key.strip().lower()
        value = value.strip()
        if key == "scenario":
            overrides["scenario"] = value.upper()
        elif key in _INT_KEYS:
            try:
                overrides[_INT_KEYS[key]] = int(value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: {key} wants an integer") from None
        elif key in _FLOAT_KEYS:
            try:
                overrides[_FLOAT_KEYS[key]] = float(value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: {key} wants a number") from None
        elif key in _STR_KEYS:
            overrides[_STR_KEYS[key]] = value
        elif key == "i_w":
            overrides["intensity_primary"] = _parse_intensity_field(value)
        elif key == "filters":
            overrides["filters"] = parse_filter_list(value)
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    config = ScenarioConfig(**overrides)
    config.validate(require_seed=False)
    return config


def _config_as_dict(config: ScenarioConfig) -> dict:
    data = dataclasses.asdict(config)
    data["filters"] = [spec.filter_id for spec in config.filters]
    data["intensity_primary"] = list(config.intensity_primary)
    for key in ("x0", "p0_diag"):
        if data[key] is not None:
            data[key] = list(data[key])
    return data


# --- output bundle ----------------------------------------------------------


def _write_lines(path: Path, lines: list[str]) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def write_bundle(
    result: ExperimentResult, out_dir: Path, timing: bool, argv: list[str]
) -> list[Path]:
    """Emit rmse_curve.csv, overall.csv, delta.csv and the run manifest."""
    out_dir.mkdir(parents=True, exist_ok=True)
    config = result.config

    curve = [RMSE_CURVE_HEADER]
    for cell in result.cells:
        fid = cell.spec.filter_id
        for k, value in enumerate(cell.metrics.rmse_per_step, start=1):
            curve.append(f"{k},{fid},{_fmt(cell.intensity_primary)},{_fmt(value)}")

    overall = [OVERALL_HEADER]
    for cell in result.cells:
        t = _fmt(cell.metrics.time_per_step_ms) if timing else ""
        kind = "tl" if cell.spec.transfer else "isolated"
        overall.append(
            f"{cell.spec.filter_id},{_fmt(cell.intensity_primary)},{cell.resource},"
            f"{_fmt(cell.metrics.overall_rmse)},{t},{kind}"
        )

    delta = [DELTA_HEADER]
    for cell in result.cells:
        if not cell.spec.transfer:
            continue
        try:
            iso = result.cell(cell.spec.family, cell.intensity_primary)
        except KeyError:
            continue
        gain = delta_rmse(iso.metrics.overall_rmse, cell.metrics.overall_rmse)
        d_iw = delta_intensity(cell.intensity_primary, config.intensity_source)
        delta.append(f"{_fmt(d_iw)},{cell.spec.family},{_fmt(gain)}")

    manifest = {
        "tool": "dualtrack",
        "version": VERSION,
        "argv": argv,
        "seed": config.master_seed,
        "timing": timing,
        "config": _config_as_dict(config),
        "outputs": ["rmse_curve.csv", "overall.csv", "delta.csv"],
        "degenerate_weight_events": {
            f"{c.spec.filter_id}@{_fmt(c.intensity_primary)}":
                c.metrics.degenerate_weight_events
            for c in result.cells
        },
        "time_per_step_ms_median": {
            f"{c.spec.filter_id}@{_fmt(c.intensity_primary)}":
                c.metrics.time_per_step_ms_median
            for c in result.cells
        } if timing else {},
    }

    paths = []
    for name, lines in (("rmse_curve.csv", curve), ("overall.csv", overall),
                        ("delta.csv", delta)):
        p = out_dir / name
        _write_lines(p, lines)
        paths.append(p)
    mpath = out_dir / "run_manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                     encoding="ascii")
    paths.append(mpath)
    return paths


# --- packet dump / replay -----------------------------------------------------


def _single_run_series(config: ScenarioConfig, run: int, intensity: float):
    truth = generate_truth(config, rngmod.stream(config.master_seed, run, rngmod.TRUTH))
    sensor_star, sensor = config.sensors(intensity)
    z_star = generate_measurements(
        truth, sensor_star, rngmod.stream(config.master_seed, run, rngmod.MEAS_SOURCE)
    )
    z_pri = generate_measurements(
        truth, sensor, rngmod.stream(config.master_seed, run, rngmod.MEAS_PRIMARY)
    )
    return truth, sensor_star, sensor, z_star, z_pri


def _pf_spec(config: ScenarioConfig):
    for spec in config.filters:
        if spec.kind == "pf":
            return spec
    raise ConfigError("packet dump/replay needs a pf filter in the roster")


def _write_estimates(path: Path, truth, estimates) -> float:
    lines = ["k,est_x_m,est_y_m,pos_error_m"]
    errors = []
    for k, est in enumerate(estimates, start=1):
        pos = est.mean[[0, 2]]
        err = float(np.hypot(*(pos - truth[k, [0, 2]])))
        errors.append(err)
        lines.append("%d,%.17g,%.17g,%.17g" % (k, pos[0], pos[1], err))
    _write_lines(path, lines)
    return float(np.mean(errors))


def estimates_path(packet_file: Path, phase: str) -> Path:
    return Path(f"{packet_file}.{phase}-est.csv")


def cmd_dump_packets(config: ScenarioConfig, packet_file: Path, run: int) -> None:
    intensity = config.intensity_primary[0]
    truth, sensor_star, sensor, z_star, z_pri = _single_run_series(config, run, intensity)
    spec = _pf_spec(config)
    result = run_dual(
        config.motion_model(), sensor_star, sensor, config.prior(),
        spec.n_particles, z_star, z_pri,
        rngmod.stream(config.master_seed, run, rngmod.FILTER_SOURCE),
        rngmod.stream(config.master_seed, run, rngmod.FILTER_PRIMARY),
        noise_mode=config.packet_noise_mode,
    )
    write_packets(packet_file, result.packets)
    mean_err = _write_estimates(estimates_path(packet_file, "dump"), truth,
                                result.primary_estimates)
    print(f"dumped {len(result.packets)} packets to {packet_file} "
          f"(mean position error {mean_err:.3f} m)")


def cmd_replay_packets(config: ScenarioConfig, packet_file: Path, run: int) -> None:
    if not packet_file.exists():
        raise ConfigError(f"packet file not found: {packet_file}")
    intensity = config.intensity_primary[0]
    truth, sensor_star, sensor, z_star, z_pri = _single_run_series(config, run, intensity)
    spec = _pf_spec(config)
    packets = read_packets(packet_file)
    result = run_dual(
        config.motion_model(), sensor_star, sensor, config.prior(),
        spec.n_particles, z_star, z_pri,
        rngmod.stream(config.master_seed, run, rngmod.FILTER_SOURCE),
        rngmod.stream(config.master_seed, run, rngmod.FILTER_PRIMARY),
        noise_mode=config.packet_noise_mode,
        replay_packets=packets,
    )
    out = estimates_path(packet_file, "replay")
    mean_err = _write_estimates(out, truth, result.primary_estimates)
    print(f"replayed {len(packets)} packets from {packet_file} -> {out} "
          f"(mean position error {mean_err:.3f} m)")


# --- argument parsing ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures to exit code 1
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="dualtrack", description=__doc__)
    parser.add_argument("--version", action="version", version=VERSION)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="key = value config file")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--mc", type=int, help="Monte-Carlo run count (overrides config)")
        p.add_argument("--filters", help="roster, e.g. pf:3000,tl-pf:3000,ukf,tl-ukf")
        p.add_argument("--iw-sweep", help="primary intensities, e.g. 4 or 1..8 or 1,4,8")
        p.add_argument("--workers", type=int, help="process pool size")

    run_p = sub.add_parser("run", help="run the experiment and write CSVs")
    common(run_p)
    run_p.add_argument("--out-dir", type=Path, default=Path("dualtrack-out"))
    run_p.add_argument("--timing", action="store_true",
                       help="fill the time column (not reproducible byte-for-byte)")

    dump_p = sub.add_parser("dump-packets", help="write transfer packets of one run")
    common(dump_p)
    dump_p.add_argument("--dump-packets", type=Path, required=True, metavar="FILE")
    dump_p.add_argument("--run", type=int, default=0, help="Monte-Carlo run index")

    replay_p = sub.add_parser("replay-packets",
                              help="re-run the primary filter from a packet file")
    common(replay_p)
    replay_p.add_argument("--replay-packets", type=Path, required=True, metavar="FILE")
    replay_p.add_argument("--run", type=int, default=0, help="Monte-Carlo run index")

    sub.add_parser("selftest", help="run the built-in oracle checks")
    return parser


def _resolve_config(args) -> ScenarioConfig:
    config = parse_config(args.config) if args.config else ScenarioConfig()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.mc is not None:
        overrides["mc_runs"] = args.mc
    if args.filters:
        overrides["filters"] = parse_filter_list(args.filters)
    if args.iw_sweep:
        overrides["intensity_primary"] = _parse_intensity_field(args.iw_sweep)
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        config = dataclasses.replace(config, **overrides)
    config.validate(require_seed=True)
    return config


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "selftest":
            from .selftest import run_selftest
            return 0 if run_selftest() else 2
        config = _resolve_config(args)
        if args.command == "run":
            result = run_experiment(config)
            paths = write_bundle(result, args.out_dir, args.timing, argv)
            for cell in result.cells:
                t = (f"  {cell.metrics.time_per_step_ms:8.3f} ms/step"
                     if args.timing else "")
                print(f"{cell.spec.filter_id:12s} I_w={_fmt(cell.intensity_primary):>4s} "
                      f"overall RMSE {cell.metrics.overall_rmse:8.3f} m{t}")
            print("wrote: " + ", ".join(str(p) for p in paths))
        elif args.command == "dump-packets":
            cmd_dump_packets(config, args.dump_packets, args.run)
        elif args.command == "replay-packets":
            cmd_replay_packets(config, args.replay_packets, args.run)
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DualTrackError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
