"""Batch experiment runner: reproduces the study's data products from
declarative JSON configs.

    hcbh-lab run <config.json> [--seed N] [--workers N] [--out-dir DIR]
    hcbh-lab validate <config.json>

Exit codes: 0 success, 1 config error, 2 numerical failure.  All rates are in
units of J and times in 1/J; an optional ``j_mhz`` field only annotates
outputs.  Outputs are CSV for tables and JSON for matrices/records, plus a
manifest listing every artifact with the config hash.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, ConvergenceError, EvolutionError
from .evolution import DriveSpec, StateVector, evolve_trajectory, prepare_coherent_like_state
from .hamiltonian import sector_project, sector_spectrum, spectrum_skew
from .lattice import DeviceConfig, LatticeSpec, build_lattice, enumerate_subsystems, resolve_device
from .observables import (
    CorrelationFitOptions,
    correlation_length,
    excitation_distribution,
    mean_sq_correlator_by_distance,
    poisson_fit,
    site_populations,
    two_point_correlators,
)
from .quantum_info import reduced_density_matrix, renyi2_entropy, schmidt_spectrum, truncation_rank
from .scaling import entropy_table, fit_scaling, geometric_ratio, scalability_study
from .tomography import (
    density_matrix_to_pairs,
    mle_reconstruct,
    record_to_dict,
    sampling_study,
    simultaneous_tomography,
)

RUN_SCHEMA_VERSION = 1

EXPERIMENT_KINDS = (
    "spectrum",
    "drive-dynamics",
    "detuning-sweep",
    "tomography-study",
    "sampling-study",
    "scaling-study",
    "schmidt-study",
    "1d-comparison",
)


@dataclass
class RunConfig:
    kind: str
    device: str
    out_dir: Path
    omega: float = 0.5
    t: float = 10.0
    deltas: list[float] = field(default_factory=lambda: [0.0])
    ns_grid: list[int] = field(default_factory=lambda: [2000])
    r_values: list[float] = field(default_factory=lambda: [0.1, 0.4, 0.8])
    v_max_values: list[int] = field(default_factory=lambda: [4, 5, 6])
    seeds: list[int] = field(default_factory=lambda: [0])
    max_volume: int = 6
    times: list[float] = field(default_factory=list)
    subsystem: list[int] = field(default_factory=list)
    chain_sites: int = 14
    chain_nnn: float = 0.0
    j_mhz: float | None = None
    workers: int = 1
    raw: dict = field(default_factory=dict)


def load_run_config(path: Path) -> RunConfig:
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        version = raw["schema_version"]
        if version != RUN_SCHEMA_VERSION:
            raise ConfigError(f"{path}: unsupported schema_version {version!r}")
        kind = raw["kind"]
        if kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"{path}: unknown kind {kind!r}; expected one of {EXPERIMENT_KINDS}")
        config = RunConfig(
            kind=kind,
            device=str(raw.get("device", "device-16q")),
            out_dir=Path(raw.get("out_dir", "out")),
            raw=raw,
        )
        for key in (
            "omega",
            "t",
            "deltas",
            "ns_grid",
            "r_values",
            "v_max_values",
            "seeds",
            "max_volume",
            "times",
            "subsystem",
            "chain_sites",
            "chain_nnn",
            "j_mhz",
            "workers",
        ):
            if key in raw:
                setattr(config, key, raw[key])
        config.out_dir = Path(config.out_dir)
        for grid_name in ("deltas", "ns_grid", "r_values", "v_max_values", "seeds"):
            if not list(getattr(config, grid_name)):
                raise ConfigError(f"{path}: field {grid_name!r} must be a nonempty list")
        return config
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc!r}") from exc


class _Outputs:
    """Collects artifact paths and writes the manifest."""

    def __init__(self, out_dir: Path, config_text: str) -> None:
        self.out_dir = out_dir
        self.config_hash = hashlib.sha256(config_text.encode()).hexdigest()
        self.paths: list[str] = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, header: list[str], rows) -> Path:
        path = self.out_dir / name
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        self.paths.append(name)
        return path

    def json(self, name: str, payload) -> Path:
        path = self.out_dir / name
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
        self.paths.append(name)
        return path

    def manifest(self, config: RunConfig) -> Path:
        payload = {
            "schema_version": RUN_SCHEMA_VERSION,
            "config_sha256": self.config_hash,
            "kind": config.kind,
            "package_version": __version__,
            "j_mhz": config.j_mhz,
            "outputs": sorted(self.paths),
        }
        path = self.out_dir / "manifest.json"
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
        return path


def _fmt(value: float) -> str:
    return format(float(value), ".12g")


def _map_points(fn, points, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, points))
    return [fn(p) for p in points]


# ---------------------------------------------------------------------------
# Experiment runners
# ---------------------------------------------------------------------------


def _run_spectrum(config: RunConfig, device: DeviceConfig, out: _Outputs) -> None:
    spec = device.spec
    rows = []
    for n in range(spec.sites + 1):
        energies = sector_spectrum(sector_project(spec, n, delta=0.0))
        rows.extend((n, k, _fmt(e)) for k, e in enumerate(energies))
    out.csv("sector_spectra.csv", ["n", "index", "energy"], rows)
    skew_rows = [(n, _fmt(spectrum_skew(spec, n))) for n in range(1, spec.sites)]
    out.csv("sector_skew.csv", ["n", "skew"], skew_rows)


def _prepare_point(args):
    spec, omega, delta, t = args
    state = prepare_coherent_like_state(spec, omega, delta, t)
    return state.amplitudes


def _prepared_states(config: RunConfig, spec: LatticeSpec) -> dict[float, StateVector]:
    points = [(spec, config.omega, float(d), config.t) for d in config.deltas]
    results = _map_points(_prepare_point, points, config.workers)
    return {
        float(d): StateVector(amps, spec.sites)
        for d, amps in zip(config.deltas, results)
    }


def _dynamics_point(args):
    spec, omega, delta, times = args
    drive = DriveSpec(omega=omega, delta=delta)
    states = evolve_trajectory(spec, drive, StateVector.vacuum(spec.sites), times)
    return [site_populations(s) for s in states]


def _run_drive_dynamics(config: RunConfig, device: DeviceConfig, out: _Outputs) -> None:
    spec = device.spec
    times = list(config.times) or [round(0.25 * k, 4) for k in range(1, int(config.t / 0.25) + 1)]
    points = [(spec, config.omega, float(d), times) for d in config.deltas]
    results = _map_points(_dynamics_point, points, config.workers)
    rows = []
    for delta, populations in zip(config.deltas, results):
        for t, pops in zip(times, populations):
            rows.append(
                [_fmt(config.omega), _fmt(delta), _fmt(t)]
                + [_fmt(p) for p in pops]
                + [_fmt(pops.sum())]
            )
    header = ["omega", "delta", "t"] + [f"n_site_{i}" for i in range(spec.sites)] + ["total_n"]
    out.csv("populations.csv", header, rows)


def _run_detuning_sweep(config: RunConfig, device: DeviceConfig, out: _Outputs) -> None:
    spec = device.spec
    states = _prepared_states(config, spec)
    subsystems = enumerate_subsystems(spec, device.coloring, config.max_volume)

    corr_rows, fit_rows, entropy_rows, scaling_rows, dist_rows = [], [], [], [], []
    matrices = {}
    for delta, state in states.items():
        corr = two_point_correlators(state)
        matrices[_fmt(delta)] = [[float(v) for v in row] for row in corr.entries]
        for m, value in mean_sq_correlator_by_distance(corr, spec).items():
            corr_rows.append([_fmt(delta), m, _fmt(value)])
        fit = correlation_length(corr, spec, CorrelationFitOptions())
        fit_rows.append(
            [_fmt(delta), _fmt(fit.xi), _fmt(fit.stderr), int(fit.divergent)]
        )
        dist = excitation_distribution(state)
        lam, tv = poisson_fit(dist)
        dist_rows.append([_fmt(delta), _fmt(dist @ np.arange(len(dist))), _fmt(lam), _fmt(tv)])
        table = entropy_table(state, subsystems)
        for sid, volume, area, s2 in zip(
            table.subsystem_ids, table.volumes, table.areas, table.entropies
        ):
            entropy_rows.append([_fmt(delta), sid, volume, area, _fmt(s2)])
        fit_sa = fit_scaling(table)
        scaling_rows.append(
            [
                _fmt(delta),
                _fmt(fit_sa.s_v),
                _fmt(fit_sa.s_a),
                _fmt(fit_sa.stderr_v),
                _fmt(fit_sa.stderr_a),
                _fmt(geometric_ratio(fit_sa)),
                int(fit_sa.s_a_reliable),
            ]
        )
    out.csv("correlators_mean_sq.csv", ["delta", "M", "mean_abs_C_sq"], corr_rows)
    out.csv("correlation_length.csv", ["delta", "xi", "stderr", "divergent"], fit_rows)
    out.csv("excitation_statistics.csv", ["delta", "mean_n", "lambda_hat", "tv_distance"], dist_rows)
    out.csv("subsystem_entropy.csv", ["delta", "subsystem_id", "V", "A", "S2"], entropy_rows)
    out.csv(
        "scaling_fit.csv",
        ["delta", "s_V", "s_A", "stderr_V", "stderr_A", "ratio", "s_A_reliable"],
        scaling_rows,
    )
    out.json("correlator_matrices.json", matrices)


def _run_tomography_study(config: RunConfig, device: DeviceConfig, out: _Outputs) -> None:
    spec = device.spec
    states = _prepared_states(config, spec)
    subsystems = enumerate_subsystems(spec, device.coloring, config.max_volume)
    n_s = int(config.ns_grid[0])
    rows = []
    for delta, state in states.items():
        records = simultaneous_tomography(
            state, device.coloring, subsystems, n_s, seed=config.seeds[0]
        )
        sample_records = {}
        reconstructed = {}
        for sub, record in records.items():
            result = mle_reconstruct(record)
            exact = renyi2_entropy(reduced_density_matrix(state.amplitudes, sub.sites))
            rows.append(
                [
                    _fmt(delta),
                    sub.label,
                    sub.volume,
                    sub.area,
                    _fmt(renyi2_entropy(result.rho)),
                    _fmt(exact),
                    result.iterations,
                    int(result.converged),
                ]
            )
            if sub.volume <= 2:
                sample_records[sub.label] = record_to_dict(record)
                reconstructed[sub.label] = density_matrix_to_pairs(result.rho)
        out.json(f"records_delta_{_fmt(delta)}.json", sample_records)
        out.json(f"reconstructed_delta_{_fmt(delta)}.json", reconstructed)
    out.csv(
        "tomography_entropy.csv",
        ["delta", "subsystem_id", "V", "A", "S2_mle", "S2_exact", "iterations", "converged"],
        rows,
    )


def _run_sampling_study(config: RunConfig, device: DeviceConfig, out: _Outputs) -> None:
    spec = device.spec
    states = _prepared_states(config, spec)
    subsystems = enumerate_subsystems(spec, device.coloring, config.max_volume)
    rows = []
    for delta, state in states.items():
        for seed in config.seeds:
            for row in sampling_study(state, subsystems, config.ns_grid, seed):
                rows.append(
                    [
                        _fmt(delta),
                        int(seed),
                        row.volume,
                        row.n_s,
                        _fmt(row.mean_extracted_entropy),
                        _fmt(row.mean_exact_entropy),
                    ]
                )
    out.csv(
        "sampling_study.csv",
        ["delta", "seed", "V", "n_s", "mean_S2_mle", "mean_S2_exact"],
        rows,
    )


def _run_scaling_study(config: RunConfig, device: DeviceConfig, out: _Outputs) -> None:
    spec = device.spec
    rows = []
    for seed in config.seeds:
        for row in scalability_study(spec, config.r_values, config.v_max_values, seed):
            rows.append(
                [
                    int(seed),
                    _fmt(row.r),
                    row.v_max,
                    _fmt(row.s_v),
                    _fmt(row.s_a),
                    _fmt(row.ratio),
                    int(row.reliable),
                ]
            )
    out.csv(
        "scaling_study.csv",
        ["seed", "r", "V_max", "s_V", "s_A", "ratio", "s_A_reliable"],
        rows,
    )


def _run_schmidt_study(config: RunConfig, device: DeviceConfig, out: _Outputs) -> None:
    spec = device.spec
    states = _prepared_states(config, spec)
    sites = config.subsystem or [2, 3, 6, 7, 10]
    label = "-".join(str(s) for s in sites)
    rows, rank_rows = [], []
    for delta, state in states.items():
        rho = reduced_density_matrix(state.amplitudes, sites)
        spectrum = schmidt_spectrum(rho)
        rows.extend(
            [_fmt(delta), label, k + 1, _fmt(v)] for k, v in enumerate(spectrum.values)
        )
        rank_rows.append([_fmt(delta), label, truncation_rank(spectrum, 1e-3)])
    out.csv(
        f"schmidt_spectrum_{label}.csv",
        ["delta", "subsystem_id", "k", "lambda_sq"],
        rows,
    )
    out.csv(f"schmidt_rank_{label}.csv", ["delta", "subsystem_id", "rank_0.999"], rank_rows)


def _run_1d_comparison(config: RunConfig, device: DeviceConfig, out: _Outputs) -> None:
    sites = int(config.chain_sites)
    times = list(config.times) or [round(0.5 * k, 4) for k in range(1, 41)]
    half = list(range(sites // 2))
    rows = []
    for nnn in (0.0, config.chain_nnn) if config.chain_nnn else (0.0,):
        chain = build_lattice(1, sites, 1.0, nnn)
        for delta in config.deltas:
            drive = DriveSpec(omega=config.omega, delta=float(delta))
            states = evolve_trajectory(chain, drive, StateVector.vacuum(sites), times)
            for t, state in zip(times, states):
                total = float(site_populations(state).sum())
                s2 = renyi2_entropy(reduced_density_matrix(state.amplitudes, half))
                rows.append([_fmt(nnn), _fmt(delta), _fmt(t), _fmt(total), _fmt(s2)])
    out.csv(
        "chain_dynamics.csv",
        ["j_nnn", "delta", "t", "total_n", "S2_half_chain"],
        rows,
    )


_RUNNERS = {
    "spectrum": _run_spectrum,
    "drive-dynamics": _run_drive_dynamics,
    "detuning-sweep": _run_detuning_sweep,
    "tomography-study": _run_tomography_study,
    "sampling-study": _run_sampling_study,
    "scaling-study": _run_scaling_study,
    "schmidt-study": _run_schmidt_study,
    "1d-comparison": _run_1d_comparison,
}


def run(config: RunConfig, config_text: str) -> int:
    device = resolve_device(config.device)
    out = _Outputs(config.out_dir, config_text)
    _RUNNERS[config.kind](config, device, out)
    out.manifest(config)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hcbh-lab",
        description="Driven hard-core lattice experiments from declarative configs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "validate"):
        cmd = sub.add_parser(name)
        cmd.add_argument("config", type=Path)
        cmd.add_argument("--seed", type=int, default=None, help="override the seed list")
        cmd.add_argument("--workers", type=int, default=None)
        cmd.add_argument("--out-dir", type=Path, default=None)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_run_config(args.config)
        if args.seed is not None:
            config.seeds = [args.seed]
        if args.workers is not None:
            config.workers = args.workers
        if args.out_dir is not None:
            config.out_dir = args.out_dir
        resolve_device(config.device)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.command == "validate":
        print(f"ok: {args.config} ({config.kind})")
        return 0
    try:
        return run(config, args.config.read_text())
    except (EvolutionError, ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure in {config.kind}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
