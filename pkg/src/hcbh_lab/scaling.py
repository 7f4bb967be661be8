"""Extraction of the area/volume entropy densities from subsystem entropy
tables, the geometric entropy ratio, and the large-lattice scalability study
built on ground-state/random-state superpositions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg

from .errors import ConvergenceError
from .evolution import StateVector, amplitudes_of
from .hamiltonian import apply_hcbh
from .lattice import LatticeSpec, Subsystem, enumerate_connected_subsystems
from .quantum_info import reduced_density_matrix, renyi2_entropy

FIT_FLOOR = 1e-4
FIT_CEIL = 1.0


@dataclass(frozen=True, eq=False)
class EntropyTable:
    """Per-subsystem Renyi-2 entropies with their volumes and areas."""

    subsystem_ids: tuple[str, ...]
    volumes: np.ndarray
    areas: np.ndarray
    entropies: np.ndarray

    def __post_init__(self) -> None:
        if not (
            len(self.subsystem_ids)
            == len(self.volumes)
            == len(self.areas)
            == len(self.entropies)
        ):
            raise ValueError("table columns have mismatched lengths")
        if np.any(self.volumes < 1) or np.any(self.areas < 0):
            raise ValueError("volumes must be >= 1 and areas >= 0")
        if np.any(self.entropies < -1e-9):
            raise ValueError("entropies must be nonnegative")

    @classmethod
    def from_rows(cls, rows) -> "EntropyTable":
        ids, volumes, areas, entropies = [], [], [], []
        for sid, volume, area, s2 in rows:
            ids.append(str(sid))
            volumes.append(int(volume))
            areas.append(int(area))
            entropies.append(float(s2))
        return cls(tuple(ids), np.array(volumes), np.array(areas), np.array(entropies))


def entropy_table(psi, subsystems) -> EntropyTable:
    """Exact subsystem entropies of a pure state."""
    amps = amplitudes_of(psi)
    rows = []
    for sub in subsystems:
        s2 = renyi2_entropy(reduced_density_matrix(amps, sub.sites))
        rows.append((sub.label, sub.volume, sub.area, s2))
    return EntropyTable.from_rows(rows)


@dataclass(frozen=True)
class ScalingFit:
    """Entropy densities fitted from S2 = s_A * A + s_V * V."""

    s_v: float
    s_a: float
    stderr_v: float
    stderr_a: float
    s_a_reliable: bool


def _group_slopes(fixed: np.ndarray, varying: np.ndarray, entropy: np.ndarray) -> list[float]:
    """Least-squares slopes of entropy vs ``varying`` within constant-``fixed``
    groups, averaging entropies at repeated abscissas first."""
    slopes = []
    for value in np.unique(fixed):
        sel = fixed == value
        xs = varying[sel]
        ys = entropy[sel]
        levels = np.unique(xs)
        if len(levels) < 2:
            continue
        means = np.array([ys[xs == x].mean() for x in levels])
        x_centered = levels - levels.mean()
        slopes.append(float(np.dot(x_centered, means) / np.dot(x_centered, x_centered)))
    return slopes


def _clamp(value: float) -> float:
    return min(max(value, FIT_FLOOR), FIT_CEIL)


def fit_scaling(table: EntropyTable) -> ScalingFit:
    """Mean constant-area slope vs volume (s_V) and constant-volume slope vs
    area (s_A), each clamped to [1e-4, 1].

    Reliability heuristic for s_A: the pre-clamp mean slope must be positive,
    at or above the clamp floor, and at least twice its standard error.
    Slopes clamped from below (including negative fits, which random states
    produce about half the time) are never reliable.
    """
    v_slopes = _group_slopes(table.areas, table.volumes, table.entropies)
    if not v_slopes:
        raise ValueError("no constant-area group with >= 2 distinct volumes")
    a_slopes = _group_slopes(table.volumes, table.areas, table.entropies)
    if not a_slopes:
        raise ValueError("no constant-volume group with >= 2 distinct areas")

    def mean_and_err(slopes: list[float]) -> tuple[float, float]:
        mean = float(np.mean(slopes))
        if len(slopes) < 2:
            return mean, 0.0
        return mean, float(np.std(slopes, ddof=1) / math.sqrt(len(slopes)))

    raw_v, err_v = mean_and_err(v_slopes)
    raw_a, err_a = mean_and_err(a_slopes)
    reliable = raw_a >= FIT_FLOOR and 2.0 * err_a <= raw_a
    return ScalingFit(
        s_v=_clamp(raw_v),
        s_a=_clamp(raw_a),
        stderr_v=err_v,
        stderr_a=err_a,
        s_a_reliable=bool(reliable),
    )


def geometric_ratio(fit: ScalingFit) -> float:
    """s_V / s_A; meaningful only when fit.s_a_reliable."""
    return fit.s_v / fit.s_a


# ---------------------------------------------------------------------------
# Ground states, random states, and superpositions
# ---------------------------------------------------------------------------


def ground_state(spec: LatticeSpec, residual_tol: float = 1e-8, max_iterations: int = 50000) -> StateVector:
    """Lowest-energy eigenvector of the undriven Hamiltonian at zero detuning.

    Matrix-free restarted Lanczos (the operator is real symmetric in the
    computational basis, so the solve runs in float64).  Raises
    ConvergenceError if the residual bound is not met.
    """
    dim = spec.dim

    def matvec(v: np.ndarray) -> np.ndarray:
        return apply_hcbh(spec, 0.0, v)

    operator = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=matvec, dtype=np.float64)
    try:
        energies, vectors = scipy.sparse.linalg.eigsh(
            operator, k=1, which="SA", maxiter=max_iterations, tol=1e-12
        )
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise ConvergenceError(f"ground-state solve did not converge: {exc}") from exc
    vec = vectors[:, 0]
    residual = np.linalg.norm(matvec(vec) - energies[0] * vec)
    if residual > residual_tol:
        raise ConvergenceError(f"ground-state residual {residual:.2e} > {residual_tol:.0e}")
    return StateVector.normalized(vec.astype(complex), spec.sites)


def haar_random_state(n_sites: int, seed) -> StateVector:
    """Seeded random state: normalized complex Gaussian amplitudes."""
    rng = np.random.default_rng(seed)
    dim = 1 << n_sites
    amps = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return StateVector.normalized(amps, n_sites)


def superposition_state(r: float, psi_gs: StateVector, psi_random: StateVector) -> StateVector:
    """sqrt(1-r) |random> + sqrt(r) |ground>, renormalized.

    The inputs are generically non-orthogonal, hence the renormalization.
    """
    if not 0 <= r <= 1:
        raise ValueError("r must lie in [0, 1]")
    amps = math.sqrt(1 - r) * psi_random.amplitudes + math.sqrt(r) * psi_gs.amplitudes
    return StateVector.normalized(amps, psi_gs.n_sites)


def study_subsystems(spec: LatticeSpec, max_volume: int) -> list[Subsystem]:
    """Default subsystem family for scaling studies without a coloring.

    Chains use contiguous windows; small 2D lattices use every connected
    subset up to the requested volume.
    """
    if spec.rows == 1 or spec.cols == 1:
        length = spec.sites
        subs = []
        for volume in range(1, max_volume + 1):
            for start in range(length - volume + 1):
                subs.append(Subsystem.of(spec, range(start, start + volume)))
        return subs
    if spec.sites > 16:
        raise ValueError("exhaustive 2D subsystem enumeration is limited to 16 sites")
    return [
        Subsystem.of(spec, sites)
        for sites in enumerate_connected_subsystems(spec, max_volume)
    ]


@dataclass(frozen=True)
class ScalabilityRow:
    r: float
    v_max: int
    s_v: float
    s_a: float
    ratio: float
    reliable: bool


def scalability_study(
    spec: LatticeSpec, r_values, v_max_values, seed, subsystems=None
) -> list[ScalabilityRow]:
    """Fitted s_V/s_A of ground/random superpositions versus the largest
    subsystem volume used in the fit."""
    v_max_values = sorted(int(v) for v in v_max_values)
    if not v_max_values:
        raise ValueError("v_max_values must be nonempty")
    if subsystems is None:
        subsystems = study_subsystems(spec, v_max_values[-1])
    subsystems = list(subsystems)
    if max(s.volume for s in subsystems) < v_max_values[-1]:
        raise ValueError("subsystem family does not reach the largest requested volume")

    psi_gs = ground_state(spec)
    psi_random = haar_random_state(spec.sites, seed)
    rows = []
    for r in r_values:
        psi = superposition_state(float(r), psi_gs, psi_random)
        table = entropy_table(psi, subsystems)
        for v_max in v_max_values:
            sel = table.volumes <= v_max
            sub_table = EntropyTable(
                tuple(np.array(table.subsystem_ids)[sel]),
                table.volumes[sel],
                table.areas[sel],
                table.entropies[sel],
            )
            fit = fit_scaling(sub_table)
            rows.append(
                ScalabilityRow(
                    r=float(r),
                    v_max=v_max,
                    s_v=fit.s_v,
                    s_a=fit.s_a,
                    ratio=geometric_ratio(fit),
                    reliable=fit.s_a_reliable,
                )
            )
    return rows
