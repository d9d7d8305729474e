"""Experiment harness: seeded Monte Carlo sweeps with CSV reporting.

A run is a grid of (scheme, sweep value) cells, each evaluated over
independent seeded trials.  Every trial derives its generators from
``(base_seed, trial_index)`` so serial and pooled execution produce the
same numbers; results land in ``results.csv`` (one row per trial) and
``summary.csv`` (one row per cell).
"""

from __future__ import annotations

import csv
import enum
import math
import os
import time
from dataclasses import dataclass, field, replace
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from .ao import AoConfig
from .beampattern import (
    AngleGrid,
    joint_beampattern,
    rx_beampattern,
    tx_beampattern,
    write_beampattern_csv,
)
from .benchmarks import Scheme, SchemeConfig, run_scheme
from .channel import (
    ChannelSet,
    FadingModel,
    FadingSpec,
    Scenario,
    build_channel_set,
    sample_tag_positions,
)
from .impairments import ImpairmentSpec, optimize_with_impairments
from .metrics import EhParams, NoiseSpec, Thresholds, dbm_to_watt, noise_power

__all__ = [
    "Sweep",
    "ExperimentConfig",
    "ConfigError",
    "parse_config_file",
    "config_from_mapping",
    "run_experiment",
    "measure_runtime",
    "RESULTS_HEADER",
]

RESULTS_HEADER = [
    "trial", "seed", "scheme", "sweep_value", "power_w", "power_dbm",
    "iters", "converged", "user_rate", "sum_tag_rate", "sum_sensing_rate",
    "feasible", "stage1_ms", "stage2_ms", "stage3_ms",
]


class Sweep(enum.Enum):
    SINGLE = "single"
    ANTENNAS = "antennas"
    TAGS = "tags"
    USER_THRESHOLD = "user-threshold"
    CSI_ETA = "csi-eta"
    RESIDUAL_SI = "residual-si"
    RICIAN_KAPPA = "rician-kappa"
    CONVERGENCE = "convergence"
    BEAMPATTERN = "beampattern"
    RUNTIME = "runtime"


class ConfigError(ValueError):
    """Bad experiment configuration (unknown key, unparsable value)."""


@dataclass
class ExperimentConfig:
    """Physical parameters (defaults match the standard setup) plus sweep plan."""

    fc_hz: float = 3e9
    bandwidth_hz: float = 10e6
    noise_figure_db: float = 10.0
    m: int = 8
    n: int = 8
    k: int = 3
    gamma_u_bpshz: float = 1.0
    gamma_t_bpshz: float = 1.0
    upsilon_bpshz: float = 1.0
    pb_dbm: float = -20.0
    m_nl_w: float = 20e-3
    a_nl: float = 6400.0
    b_nl: float = 0.003
    trials: int = 100
    base_seed: int = 1234
    schemes: tuple[Scheme, ...] = (Scheme.ISABC_PASSIVE,)
    sweep: Sweep = Sweep.SINGLE
    sweep_values: tuple[float, ...] = (0.0,)
    out_dir: str = "results"
    randomization_trials: int = 1000
    epsilon: float = 1e-3
    max_iter: int = 20
    csi_eta: float = 0.0
    residual_si_lambda: float = 0.0
    rician_kappa: float | None = None
    bs_position: tuple[float, float] = (0.0, 0.0)
    user_position: tuple[float, float] = (12.0, 0.0)
    tag_circle_center: tuple[float, float] = (6.0, -4.0)
    tag_circle_radius: float = 3.0

    def full_scale(self) -> "ExperimentConfig":
        """Full-scale settings: 1000 trials, 1e5 randomization draws."""
        return replace(self, trials=1000, randomization_trials=100_000)


_CONFIG_KEYS = {
    "fc_hz": float, "bandwidth_hz": float, "noise_figure_db": float,
    "m": int, "n": int, "k": int,
    "gamma_u_bpshz": float, "gamma_t_bpshz": float, "upsilon_bpshz": float,
    "pb_dbm": float, "m_nl_w": float, "a_nl": float, "b_nl": float,
    "trials": int, "base_seed": int, "scheme": str, "sweep": str,
    "sweep_values": str, "out_dir": str, "randomization_trials": int,
    "epsilon": float, "max_iter": int, "csi_eta": float,
    "residual_si_lambda": float, "rician_kappa": float,
}


def parse_config_file(path: str) -> dict[str, str]:
    """Read a flat ``key = value`` config file; '#' starts a comment."""
    mapping: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            mapping[key] = value
    return mapping


def config_from_mapping(mapping: dict[str, str]) -> ExperimentConfig:
    """Build a config from string key/values (file contents, CLI overrides)."""
    cfg = ExperimentConfig()
    updates = {}
    for key, value in mapping.items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}")
        try:
            if key == "scheme":
                updates["schemes"] = tuple(
                    Scheme(tok.strip()) for tok in value.split(",") if tok.strip()
                )
            elif key == "sweep":
                updates["sweep"] = Sweep(value.strip())
            elif key == "sweep_values":
                updates["sweep_values"] = tuple(
                    float(tok) for tok in value.split(",") if tok.strip()
                )
            else:
                updates[key] = _CONFIG_KEYS[key](value)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from exc
    return replace(cfg, **updates)


def _linear_sinr(rate_bpshz: float) -> float:
    return 2.0 ** rate_bpshz - 1.0


def _cell_physics(config: ExperimentConfig, sweep: Sweep, value: float):
    """Resolve (m, n, k, gamma_u_linear, eta, lambda, kappa) for one cell."""
    m, n, k = config.m, config.n, config.k
    gamma_u = _linear_sinr(config.gamma_u_bpshz)
    eta = config.csi_eta
    lam = config.residual_si_lambda
    kappa = config.rician_kappa
    if sweep is Sweep.ANTENNAS:
        m = n = int(value)
    elif sweep in (Sweep.TAGS, Sweep.RUNTIME):
        k = int(value)
    elif sweep is Sweep.USER_THRESHOLD:
        gamma_u = float(value)
    elif sweep is Sweep.CSI_ETA:
        eta = float(value)
    elif sweep is Sweep.RESIDUAL_SI:
        lam = float(value)
    elif sweep is Sweep.RICIAN_KAPPA:
        kappa = float(value) if value > 0 else None
    return m, n, k, gamma_u, eta, lam, kappa


def _trial_channel(config: ExperimentConfig, m, n, k, kappa, trial: int) -> ChannelSet:
    rng = np.random.default_rng(np.random.SeedSequence((config.base_seed, trial)))
    tags = sample_tag_positions(
        config.tag_circle_center, config.tag_circle_radius, k, rng
    )
    scenario = Scenario(
        bs_position=config.bs_position,
        user_position=config.user_position,
        tag_positions=tags,
        carrier_freq_hz=config.fc_hz,
        num_tx=m,
        num_rx=n,
        num_tags=k,
    )
    if kappa is None:
        fading = FadingSpec(FadingModel.RAYLEIGH)
    else:
        fading = FadingSpec(FadingModel.RICIAN, rician_kappa=kappa)
    return build_channel_set(scenario, fading, rng)


def _run_trial(task) -> dict:
    """One (scheme, sweep value, trial) evaluation; top level for pickling."""
    config, scheme, sweep, value, trial = task
    m, n, k, gamma_u, eta, lam, kappa = _cell_physics(config, sweep, value)
    ch = _trial_channel(config, m, n, k, kappa, trial)

    sigma2 = noise_power(NoiseSpec(config.bandwidth_hz, config.noise_figure_db))
    thresholds = Thresholds(
        gamma_u=gamma_u,
        gamma_t=np.full(k, _linear_sinr(config.gamma_t_bpshz)),
        upsilon=np.full(k, _linear_sinr(config.upsilon_bpshz)),
        lambda_si=lam,
    )
    eh = EhParams(
        m_nl=config.m_nl_w, a_nl=config.a_nl, b_nl=config.b_nl,
        p_b=dbm_to_watt(config.pb_dbm),
    )
    scheme_config = SchemeConfig(scheme=scheme, thresholds=thresholds, eh=eh, sigma2=sigma2)
    ao_config = AoConfig(
        epsilon=config.epsilon,
        max_iter=config.max_iter,
        randomization_trials=config.randomization_trials,
    )
    opt_rng = np.random.default_rng(np.random.SeedSequence((config.base_seed, trial, 1)))

    t_start = time.perf_counter()
    if eta > 0.0 or lam > 0.0:
        result = optimize_with_impairments(
            ch, ImpairmentSpec(csi_eta=eta, residual_si_lambda=lam),
            scheme_config, ao_config, opt_rng,
        )
        report = result.report
        if result.outage:
            report.feasible = False
        trace_powers = []
    else:
        sol, trace, report = run_scheme(scheme_config, ch, ao_config, opt_rng)
        trace_powers = list(trace.objective_per_iter)
    wall = time.perf_counter() - t_start

    rates = report.rates
    stage = report.stage_seconds
    return {
        "trial": trial,
        "seed": config.base_seed,
        "scheme": scheme.value,
        "sweep_value": value,
        "power_w": report.power_w,
        "power_dbm": report.power_dbm,
        "iters": report.iterations,
        "converged": report.converged,
        "user_rate": rates.user_rate if rates else 0.0,
        "sum_tag_rate": float(rates.tag_rates.sum()) if rates else 0.0,
        "sum_sensing_rate": float(rates.sensing_rates.sum()) if rates else 0.0,
        "feasible": report.feasible,
        "stage1_ms": 1e3 * stage.get("receivers", 0.0),
        "stage2_ms": 1e3 * stage.get("transmit", 0.0),
        "stage3_ms": 1e3 * stage.get("reflection", 0.0),
        "_wall_s": wall,
        "_trace": trace_powers,
    }


def _workers() -> int:
    env = os.environ.get("ISABC_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _map_trials(tasks: list) -> list[dict]:
    workers = _workers()
    if workers <= 1 or len(tasks) <= 1:
        return [_run_trial(t) for t in tasks]
    with Pool(processes=min(workers, len(tasks))) as pool:
        return pool.map(_run_trial, tasks)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _write_results(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_HEADER)
        for row in rows:
            writer.writerow([_fmt(row[key]) for key in RESULTS_HEADER])


def _write_summary(path: Path, rows: list[dict]) -> list[dict]:
    cells: dict[tuple, list[dict]] = {}
    for row in rows:
        cells.setdefault((row["scheme"], row["sweep_value"]), []).append(row)
    header = [
        "scheme", "sweep_value", "n_trials", "n_feasible", "n_converged",
        "mean_power_w", "std_power_w", "mean_power_dbm", "mean_of_dbm",
        "mean_user_rate", "mean_sum_tag_rate", "mean_sum_sensing_rate",
        "mean_iters", "mean_wall_ms",
    ]
    summary = []
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for (scheme, value), cell in sorted(cells.items()):
            feas = [r for r in cell if r["feasible"]]
            powers = np.array([r["power_w"] for r in feas])
            mean_w = float(powers.mean()) if len(powers) else float("nan")
            rec = {
                "scheme": scheme,
                "sweep_value": value,
                "n_trials": len(cell),
                "n_feasible": len(feas),
                "n_converged": sum(1 for r in cell if r["converged"]),
                "mean_power_w": mean_w,
                "std_power_w": float(powers.std(ddof=1)) if len(powers) > 1 else 0.0,
                "mean_power_dbm": 10.0 * math.log10(mean_w) + 30.0 if mean_w > 0 else float("nan"),
                "mean_of_dbm": float(np.mean([r["power_dbm"] for r in feas])) if feas else float("nan"),
                "mean_user_rate": float(np.mean([r["user_rate"] for r in feas])) if feas else 0.0,
                "mean_sum_tag_rate": float(np.mean([r["sum_tag_rate"] for r in feas])) if feas else 0.0,
                "mean_sum_sensing_rate": float(np.mean([r["sum_sensing_rate"] for r in feas])) if feas else 0.0,
                "mean_iters": float(np.mean([r["iters"] for r in cell])),
                "mean_wall_ms": 1e3 * float(np.mean([r["_wall_s"] for r in cell])),
            }
            summary.append(rec)
            writer.writerow([_fmt(rec[key]) for key in header])
    return summary


def _write_convergence(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "trial", "iteration", "power_w", "power_dbm"])
        for row in rows:
            for it, power in enumerate(row["_trace"]):
                dbm = 10.0 * math.log10(power) + 30.0 if power > 0 else float("nan")
                writer.writerow(
                    [row["scheme"], row["trial"], it, _fmt(power), _fmt(dbm)]
                )


def _emit_beampatterns(config: ExperimentConfig, out: Path) -> None:
    """Converged default-setup solution, patterns on a half-degree grid."""
    m, n, k, gamma_u, eta, lam, kappa = _cell_physics(config, Sweep.SINGLE, 0.0)
    ch = _trial_channel(config, m, n, k, kappa, 0)
    sigma2 = noise_power(NoiseSpec(config.bandwidth_hz, config.noise_figure_db))
    thresholds = Thresholds(
        gamma_u=gamma_u,
        gamma_t=np.full(k, _linear_sinr(config.gamma_t_bpshz)),
        upsilon=np.full(k, _linear_sinr(config.upsilon_bpshz)),
        lambda_si=lam,
    )
    eh = EhParams(m_nl=config.m_nl_w, a_nl=config.a_nl, b_nl=config.b_nl,
                  p_b=dbm_to_watt(config.pb_dbm))
    scheme_config = SchemeConfig(
        scheme=config.schemes[0], thresholds=thresholds, eh=eh, sigma2=sigma2
    )
    rng = np.random.default_rng(np.random.SeedSequence((config.base_seed, 0, 1)))
    sol, _, _ = run_scheme(scheme_config, ch, AoConfig(
        epsilon=config.epsilon, max_iter=config.max_iter,
        randomization_trials=config.randomization_trials,
    ), rng)
    grid = AngleGrid(num_points=361)
    theta, p1 = tx_beampattern(sol, grid, m)
    write_beampattern_csv(str(out / "beampattern_tx.csv"), theta, p1)
    for j in range(k):
        _, p2 = rx_beampattern(sol, j, grid, n)
        write_beampattern_csv(str(out / f"beampattern_rx_tag{j}.csv"), theta, p2)
        _, p3 = joint_beampattern(sol, j, grid)
        write_beampattern_csv(str(out / f"beampattern_joint_tag{j}.csv"), theta, p3)


def run_experiment(config: ExperimentConfig) -> int:
    """Execute the configured sweep; returns the process exit code.

    0 on success, 2 when any cell ends with more than half of its trials
    infeasible.  Configuration errors raise :class:`ConfigError` (the
    CLI maps them to exit code 1).
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if config.sweep is Sweep.RUNTIME:
        measure_runtime(config)
        return 0
    if config.sweep is Sweep.BEAMPATTERN:
        _emit_beampatterns(config, out)
        return 0

    values = config.sweep_values if config.sweep is not Sweep.SINGLE else (0.0,)
    if config.sweep is Sweep.CONVERGENCE:
        values = (0.0,)
    tasks = [
        (config, scheme, config.sweep, value, trial)
        for scheme in config.schemes
        for value in values
        for trial in range(config.trials)
    ]
    rows = _map_trials(tasks)
    rows.sort(key=lambda r: (r["scheme"], r["sweep_value"], r["trial"]))

    _write_results(out / "results.csv", rows)
    summary = _write_summary(out / "summary.csv", rows)
    if config.sweep is Sweep.CONVERGENCE:
        _write_convergence(out / "convergence.csv", rows)

    for rec in summary:
        if rec["n_trials"] and rec["n_feasible"] < 0.5 * rec["n_trials"]:
            return 2
    return 0


def measure_runtime(config: ExperimentConfig) -> list[dict]:
    """Mean wall-clock time of one optimization per (scheme, K)."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    values = config.sweep_values if config.sweep is Sweep.RUNTIME else (config.k,)
    records = []
    for scheme in config.schemes:
        for value in values:
            tasks = [
                (config, scheme, Sweep.RUNTIME, value, trial)
                for trial in range(config.trials)
            ]
            rows = _map_trials(tasks)
            walls = np.array([r["_wall_s"] for r in rows])
            records.append({
                "scheme": scheme.value,
                "k": int(value),
                "mean_s": float(walls.mean()),
                "std_s": float(walls.std(ddof=1)) if len(walls) > 1 else 0.0,
            })
    with open(out / "runtime.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "k", "mean_s", "std_s"])
        for rec in records:
            writer.writerow([rec["scheme"], rec["k"], _fmt(rec["mean_s"]), _fmt(rec["std_s"])])
    return records
