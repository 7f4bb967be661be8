"""Unitary time evolution and the coherent-like state preparation protocol.

All rates are in units of the reference coupling J and times in 1/J (hbar=1).
Evolution runs in the drive frame: the generator is the constant driven
Hamiltonian, integrated with a fixed-step classical 4th-order scheme and a
single renormalization at the end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvolutionError
from .hamiltonian import DriveSpec, driven_sparse
from .lattice import LatticeSpec


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized amplitude vector over the 2^N computational basis states."""

    amplitudes: np.ndarray
    n_sites: int

    def __post_init__(self) -> None:
        amps = np.ascontiguousarray(self.amplitudes, dtype=complex)
        if amps.shape != (1 << self.n_sites,):
            raise ValueError(
                f"amplitude vector has shape {amps.shape}, expected ({1 << self.n_sites},)"
            )
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def vacuum(cls, n_sites: int) -> "StateVector":
        amps = np.zeros(1 << n_sites, dtype=complex)
        amps[0] = 1.0
        return cls(amps, n_sites)

    @classmethod
    def normalized(cls, amplitudes, n_sites: int) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(amps / norm, n_sites)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def amplitudes_of(psi) -> np.ndarray:
    """Accept a StateVector or a bare amplitude array."""
    return np.asarray(getattr(psi, "amplitudes", psi))


@dataclass(frozen=True)
class EvolutionSettings:
    """Integrator settings.

    ``rk4`` (default) is a fixed-step classical 4th-order scheme; ``step``
    must then resolve the largest energy scale (step * ||H|| well below 1) or
    the norm-drift guard raises.  ``adaptive`` delegates to an embedded
    Runge-Kutta solver with error control derived from ``tolerance``.
    ``tolerance`` always bounds the allowed norm drift per unit time before
    the final renormalization.
    """

    step: float = 0.005
    tolerance: float = 1e-6
    method: str = "rk4"

    def __post_init__(self) -> None:
        if self.step <= 0 or self.tolerance <= 0:
            raise ValueError("step and tolerance must be positive")
        if self.method not in ("rk4", "adaptive"):
            raise ValueError(f"unknown integration method {self.method!r}")


DEFAULT_SETTINGS = EvolutionSettings()


def _rk4_segment(operator, psi: np.ndarray, duration: float, step: float) -> np.ndarray:
    def deriv(v: np.ndarray) -> np.ndarray:
        return -1j * (operator @ v)

    remaining = duration
    while remaining > 1e-15:
        h = min(step, remaining)
        k1 = deriv(psi)
        k2 = deriv(psi + (h / 2) * k1)
        k3 = deriv(psi + (h / 2) * k2)
        k4 = deriv(psi + h * k3)
        psi = psi + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        remaining -= h
    return psi


def _adaptive_segment(operator, psi: np.ndarray, duration: float, tolerance: float) -> np.ndarray:
    import scipy.integrate

    if duration <= 1e-15:
        return psi
    solution = scipy.integrate.solve_ivp(
        lambda _, v: -1j * (operator @ v),
        (0.0, duration),
        psi,
        method="DOP853",
        rtol=max(tolerance * 1e-3, 1e-12),
        atol=1e-12,
    )
    if not solution.success:
        raise EvolutionError(f"adaptive integration failed: {solution.message}")
    return solution.y[:, -1]


def _integrate(operator, psi: np.ndarray, duration: float, settings: EvolutionSettings) -> np.ndarray:
    if settings.method == "adaptive":
        return _adaptive_segment(operator, psi, duration, settings.tolerance)
    return _rk4_segment(operator, psi, duration, settings.step)


def _check_drift(psi: np.ndarray, duration: float, settings: EvolutionSettings) -> None:
    drift = abs(np.linalg.norm(psi) - 1.0)
    budget = settings.tolerance * max(duration, settings.step)
    if drift > budget:
        reason = "integration unstable (step too large for ||H||)" if drift > 10 * budget else "norm drift exceeded tolerance"
        raise EvolutionError(
            f"{reason}: drift {drift:.3e} over duration {duration:g} exceeds {budget:.3e}"
        )


def evolve(
    spec: LatticeSpec,
    drive: DriveSpec,
    psi0: StateVector,
    settings: EvolutionSettings = DEFAULT_SETTINGS,
) -> StateVector:
    """Solve i dpsi/dt = H_driven psi for drive.duration, renormalizing at the end."""
    psi = _integrate(driven_sparse(spec, drive), psi0.amplitudes, drive.duration, settings)
    _check_drift(psi, drive.duration, settings)
    return StateVector.normalized(psi, spec.sites)


def evolve_trajectory(
    spec: LatticeSpec,
    drive: DriveSpec,
    psi0: StateVector,
    times,
    settings: EvolutionSettings = DEFAULT_SETTINGS,
) -> list[StateVector]:
    """States at the requested (ascending) times, integrated piecewise."""
    times = list(times)
    if any(t < 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("sample times must be ascending and nonnegative")
    out = []
    operator = driven_sparse(spec, drive)
    psi = psi0.amplitudes
    prev = 0.0
    for t in times:
        psi = _integrate(operator, psi, t - prev, settings)
        _check_drift(psi, max(t, settings.step), settings)
        out.append(StateVector.normalized(psi, spec.sites))
        prev = t
    return out


def prepare_coherent_like_state(
    spec: LatticeSpec,
    omega: float,
    delta: float,
    t: float,
    settings: EvolutionSettings = DEFAULT_SETTINGS,
) -> StateVector:
    """Drive the vacuum with the common drive for time t (units 1/J)."""
    if omega < 0:
        raise ValueError("drive strength must be >= 0")
    drive = DriveSpec(omega=omega, delta=delta, duration=t)
    return evolve(spec, drive, StateVector.vacuum(spec.sites), settings)


def eigenbasis_overlap(psi, spectra_by_sector) -> list[tuple[int, float, float]]:
    """Overlap weights |<n,k|psi>|^2 against per-sector eigenbases.

    ``spectra_by_sector`` maps particle number n to ``(basis, energies,
    eigenvectors)`` as produced by ``hamiltonian.sector_spectra(...,
    eigenvectors=True)``.  Returns (n, energy, weight) rows; weights over all
    listed sectors sum to 1 when every sector is included.
    """
    amps = amplitudes_of(psi)
    rows: list[tuple[int, float, float]] = []
    for n in sorted(spectra_by_sector):
        basis, energies, vectors = spectra_by_sector[n]
        if vectors.shape != (len(basis), len(energies)):
            raise ValueError(f"sector {n}: eigenvector block has shape {vectors.shape}")
        if basis.max(initial=0) >= amps.shape[0]:
            raise ValueError(f"sector {n}: basis indices exceed the state dimension")
        component = amps[basis]
        weights = np.abs(vectors.conj().T @ component) ** 2
        rows.extend((n, float(e), float(w)) for e, w in zip(energies, weights))
    total = sum(w for _, _, w in rows)
    if total > 1 + 1e-9:
        raise ValueError(f"overlap weights sum to {total} > 1")
    return rows
