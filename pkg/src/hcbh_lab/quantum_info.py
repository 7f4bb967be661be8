"""Reduced density matrices, Renyi-2 entropies, Schmidt analysis, global
entanglement, and the analytic dephasing-entropy estimate.

Entropies are in bits (log base 2) throughout.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .evolution import amplitudes_of

PSD_TOLERANCE = 1e-9
HERMITICITY_TOLERANCE = 1e-10
TRACE_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive-semidefinite, unit-trace matrix for a subsystem."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        mat = np.ascontiguousarray(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("density matrix must be square")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def validate(self) -> None:
        mat = self.matrix
        if np.max(np.abs(mat - mat.conj().T)) > HERMITICITY_TOLERANCE:
            raise ValueError("density matrix is not Hermitian within tolerance")
        if abs(np.trace(mat).real - 1.0) > TRACE_TOLERANCE:
            raise ValueError(f"trace is {np.trace(mat).real}, expected 1")
        lowest = np.linalg.eigvalsh(mat)[0]
        if lowest < -PSD_TOLERANCE:
            raise ValueError(f"density matrix has eigenvalue {lowest} < -{PSD_TOLERANCE}")


def _matrix_of(rho) -> np.ndarray:
    return np.asarray(getattr(rho, "matrix", rho))


def reduced_density_matrix(psi, subsystem) -> DensityMatrix:
    """Partial trace of |psi><psi| onto the given sites.

    Subsystem indexing: bit p of the reduced matrix index is the occupation of
    the p-th subsystem site in ascending site order, matching the global
    convention restricted to the subsystem.
    """
    amps = np.asarray(amplitudes_of(psi))
    n = amps.shape[0].bit_length() - 1
    if amps.shape != (1 << n,):
        raise ValueError("state dimension is not a power of 2")
    sites = [int(s) for s in getattr(subsystem, "sites", subsystem)]
    if len(set(sites)) != len(sites):
        raise ValueError("duplicate sites in subsystem")
    if any(not 0 <= s < n for s in sites):
        raise ValueError(f"site index out of range for {n} sites")
    sites = sorted(sites)
    env = [s for s in range(n) if s not in set(sites)]
    # Tensor axis a of psi.reshape([2]*n) carries the occupation of site n-1-a.
    order = [n - 1 - s for s in reversed(sites)] + [n - 1 - e for e in reversed(env)]
    block = amps.reshape([2] * n).transpose(order).reshape(1 << len(sites), 1 << len(env))
    return DensityMatrix(block @ block.conj().T)


def renyi2_entropy(rho, allow_unphysical: bool = False) -> float:
    """Second Renyi entropy -log2(Tr rho^2), clamped to >= 0.

    ``allow_unphysical`` skips the positivity check so purities of raw
    linear-inversion estimates (Hermitian but possibly non-PSD) can be taken
    directly.
    """
    mat = _matrix_of(rho)
    if np.max(np.abs(mat - mat.conj().T)) > HERMITICITY_TOLERANCE:
        raise ValueError("input is not Hermitian within tolerance")
    if not allow_unphysical:
        lowest = np.linalg.eigvalsh(mat)[0]
        if lowest < -PSD_TOLERANCE:
            raise ValueError(f"input has eigenvalue {lowest}; pass allow_unphysical to override")
    purity = float(np.sum(np.abs(mat) ** 2))
    return max(0.0, -math.log2(purity))


@dataclass(frozen=True, eq=False)
class SchmidtSpectrum:
    """Squared Schmidt coefficients, sorted descending, summing to 1."""

    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)

    def ratio(self, k: int) -> float:
        """lambda^2_1 / lambda^2_k (1-based k)."""
        return float(self.values[0] / self.values[k - 1])


def schmidt_spectrum(rho) -> SchmidtSpectrum:
    """Eigenvalues of rho sorted descending; negatives clipped, renormalized."""
    vals = np.linalg.eigvalsh(_matrix_of(rho))[::-1]
    vals = np.clip(vals, 0.0, None)
    total = vals.sum()
    if total <= 0:
        raise ValueError("density matrix has no positive weight")
    return SchmidtSpectrum(vals / total)


def truncation_rank(schmidt, epsilon: float) -> int:
    """Smallest rank whose squared coefficients sum to at least 1 - epsilon."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    values = np.asarray(getattr(schmidt, "values", schmidt), dtype=float)
    cumulative = np.cumsum(values)
    return int(np.searchsorted(cumulative, 1.0 - epsilon) + 1)


def global_entanglement(psi) -> float:
    """Mean single-site mixedness: 2 - (2/N) * sum_i Tr(rho_i^2)."""
    amps = np.asarray(amplitudes_of(psi))
    n = amps.shape[0].bit_length() - 1
    purities = 0.0
    for i in range(n):
        rho = reduced_density_matrix(amps, [i]).matrix
        purities += float(np.sum(np.abs(rho) ** 2))
    return 2.0 - 2.0 * purities / n


def page_renyi2(volume: int, n_sites: int) -> float:
    """Reference random-state Renyi-2 entropy of a volume-V subsystem.

    The unitarily-averaged purity of a subsystem of a random pure state is
    (d_A + d_B) / (d_A d_B + 1); this is its -log2, the analog of the Page
    curve for the second Renyi entropy.
    """
    if not 1 <= volume <= n_sites:
        raise ValueError("volume must lie in 1..n_sites")
    d_a = 2.0**volume
    d_b = 2.0 ** (n_sites - volume)
    return -math.log2((d_a + d_b) / (d_a * d_b + 1.0))


@dataclass(frozen=True)
class DecoherenceParams:
    """Relaxation/dephasing rates (units of J) and the experiment duration."""

    gamma_1: float
    gamma_nu: float
    tau: float

    def __post_init__(self) -> None:
        if self.gamma_1 < 0 or self.gamma_nu < 0 or self.tau < 0:
            raise ValueError("decoherence parameters must be >= 0")

    @property
    def effective_rate(self) -> float:
        """Driven-evolution decay rate: (3/4) Gamma_1 + (1/2) Gamma_nu."""
        return 0.75 * self.gamma_1 + 0.5 * self.gamma_nu

    @property
    def error_probability(self) -> float:
        """Per-site error gamma = 1 - exp(-rate * tau)."""
        return 1.0 - math.exp(-self.effective_rate * self.tau)


def dephasing_entropy(volume: int, gamma: float, mean_field_correction: float = 0.0) -> float:
    """First-order estimate of the entropy a subsystem gains from dephasing.

    Treats per-site errors of probability ``gamma`` as a Z channel acting on a
    near-maximally-mixed subsystem of ``volume`` sites; valid for
    0 <= gamma < 1/volume.  ``mean_field_correction`` adds the optional
    density-dependent term 2*gamma*V*((N/2 - <n>)/(N/2))^2 inside the log
    (see ``mean_field_dephasing_correction``).
    """
    if volume < 1:
        raise ValueError("volume must be >= 1")
    if not 0 <= gamma < 1.0 / volume:
        warnings.warn(
            f"gamma={gamma} outside the first-order regime [0, 1/{volume}); "
            "estimate unreliable",
            stacklevel=2,
        )
    argument = 1.0 + volume**2 * gamma**2 - 2 * volume * gamma + volume * gamma**2
    argument += mean_field_correction
    return -math.log2(argument)


def mean_field_dephasing_correction(
    volume: int, gamma: float, mean_excitations: float, n_sites: int
) -> float:
    """Leading correction to the dephasing estimate away from half filling."""
    half = n_sites / 2.0
    return 2.0 * gamma * volume * ((half - mean_excitations) / half) ** 2
