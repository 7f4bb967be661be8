"""Simulated finite-sample Pauli-string measurements and density-matrix
reconstruction by linear inversion and maximum likelihood.

Wire conventions (also documented in the README):
  * a Pauli string is a str over "XYZ"; character p addresses the p-th
    subsystem site in ascending site order;
  * outcome bitstrings are integers whose bit p is the outcome of the p-th
    subsystem site; under Z the bit equals the occupation, under X/Y the bit
    is 1 iff the measured eigenvalue is -1;
  * consistently with the sigma_z convention of the Hamiltonian
    (sigma_z |1> = +|1>), the Z operator entering reconstruction is
    diag(-1, +1) in the (|0>, |1>) basis.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .evolution import amplitudes_of
from .lattice import Subsystem, TomographyColoring
from .quantum_info import DensityMatrix, reduced_density_matrix

_SQ2 = 1.0 / math.sqrt(2.0)

ROTATIONS = {
    "Z": np.eye(2, dtype=complex),
    "X": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "Y": np.array([[_SQ2, -1j * _SQ2], [_SQ2, 1j * _SQ2]], dtype=complex),
}

# Operator reconstructed from each measurement basis, consistent with the
# eigenvalue -> bit maps above: sum_b sign(b) R^dag |b><b| R.
OPERATORS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[-1, 0], [0, 1]], dtype=complex),
}

# sign[basis][bit] = measured eigenvalue
OUTCOME_SIGNS = {
    "X": (1.0, -1.0),
    "Y": (1.0, -1.0),
    "Z": (-1.0, 1.0),
}


def all_pauli_strings(volume: int) -> list[str]:
    return ["".join(chars) for chars in itertools.product("XYZ", repeat=volume)]


def string_rotation(pauli: str) -> np.ndarray:
    """Unitary mapping the string's eigenbasis to the computational basis."""
    mat = np.eye(1, dtype=complex)
    for char in reversed(pauli):  # site 0 ends up at the least significant bit
        mat = np.kron(mat, ROTATIONS[char])
    return mat


# Per-site kernels for the factorized string contractions below.
# _PROB_KERNEL[c, o, i, j] = U_c[o, i] * conj(U_c[o, j]) with c indexing "XYZ".
_BASIS_STACK = np.stack([ROTATIONS[c] for c in "XYZ"])
_PROB_KERNEL = np.einsum("coi,coj->coij", _BASIS_STACK, _BASIS_STACK.conj())


def _interleave_state_axes(volume: int) -> list[int]:
    """Permutation of rho.reshape((2,)*2V) to (i_0, j_0, i_1, j_1, ...)."""
    perm: list[int] = []
    for p in range(volume):
        perm += [volume - 1 - p, 2 * volume - 1 - p]
    return perm


def _deinterleave_pairs(volume: int) -> list[int]:
    """Permutation from (i_0, j_0, ...) pair order to MSB-first matrix axes."""
    return [2 * p for p in reversed(range(volume))] + [
        2 * p + 1 for p in reversed(range(volume))
    ]


def string_probabilities(rho, volume: int) -> np.ndarray:
    """Outcome distributions of every Pauli string at once, shape (3^V, 2^V).

    Row order matches ``all_pauli_strings``; column bit p is the outcome of
    the p-th subsystem site.  The contraction runs site by site through the
    tensor-product structure of the rotations, costing O(6^V) rather than
    O(12^V).
    """
    mat = np.asarray(getattr(rho, "matrix", rho))
    tensor = mat.reshape((2,) * (2 * volume)).transpose(_interleave_state_axes(volume))
    for _ in range(volume):
        tensor = np.einsum("ij...,coij->...co", tensor, _PROB_KERNEL)
    # axes now (c_0, o_0, ..., c_{V-1}, o_{V-1}); strings are c_0-major and
    # outcome integers are o_{V-1}-major
    perm = [2 * p for p in range(volume)] + [2 * p + 1 for p in reversed(range(volume))]
    return np.real(tensor.transpose(perm).reshape(3**volume, 2**volume))


def _weighted_projector_sum(weights: np.ndarray, volume: int) -> np.ndarray:
    """sum_{s,m} w[s,m] R_s^dag |m><m| R_s via the same factorized contraction."""
    tensor = weights.reshape((3,) * volume + (2,) * volume).astype(complex)
    perm: list[int] = []
    for p in range(volume):
        perm += [p, 2 * volume - 1 - p]
    tensor = tensor.transpose(perm)  # (c_0, o_0, c_1, o_1, ...)
    kernel = _PROB_KERNEL.conj()
    for _ in range(volume):
        tensor = np.einsum("co...,coij->...ij", tensor, kernel)
    dim = 1 << volume
    return tensor.transpose(_deinterleave_pairs(volume)).reshape(dim, dim)


def _seed_tuple(seed) -> tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    """Per-Pauli-string outcome counts for one subsystem.

    Counts are stored as float arrays indexed by outcome integer; they are
    integral for sampled records and may be fractional for exact-expectation
    records (``samples_per_string`` is then the injected weight).
    """

    subsystem: Subsystem
    per_string: dict[str, np.ndarray]
    samples_per_string: float

    @property
    def volume(self) -> int:
        return self.subsystem.volume

    def validate(self) -> None:
        dim = 1 << self.volume
        for pauli, counts in self.per_string.items():
            if len(pauli) != self.volume:
                raise ValueError(f"string {pauli!r} has wrong length")
            if counts.shape != (dim,):
                raise ValueError(f"counts for {pauli!r} have shape {counts.shape}")
            if abs(counts.sum() - self.samples_per_string) > 1e-6 * max(
                1.0, self.samples_per_string
            ):
                raise ValueError(f"counts for {pauli!r} sum to {counts.sum()}")

    def is_complete(self) -> bool:
        return all(s in self.per_string for s in all_pauli_strings(self.volume))


def born_probabilities(rho: DensityMatrix, pauli: str) -> np.ndarray:
    """Outcome distribution of measuring the string on the subsystem state."""
    rotation = string_rotation(pauli)
    probs = np.real(np.einsum("ij,jk,ik->i", rotation, rho.matrix, rotation.conj()))
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def sample_pauli_string(psi, subsystem, pauli: str, n_s: int, seed) -> np.ndarray:
    """Counts of n_s independent draws from the exact outcome distribution.

    Local basis rotation on each subsystem site followed by a computational
    basis projection, marginalized over the complement.
    """
    sites = getattr(subsystem, "sites", subsystem)
    if len(pauli) != len(sites):
        raise ValueError(f"string {pauli!r} does not match subsystem volume {len(sites)}")
    if n_s < 1:
        raise ValueError("n_s must be >= 1")
    rho = reduced_density_matrix(amplitudes_of(psi), sites)
    rng = np.random.default_rng(_seed_tuple(seed))
    return rng.multinomial(n_s, born_probabilities(rho, pauli)).astype(float)


def measure_record(psi, subsystem: Subsystem, n_s: int, seed) -> MeasurementRecord:
    """Complete record: every Pauli string sampled n_s times.

    Each string uses an rng seeded by (seed..., string_index), so records are
    reproducible independently of evaluation order.
    """
    rho = reduced_density_matrix(amplitudes_of(psi), subsystem.sites)
    distributions = np.clip(string_probabilities(rho, subsystem.volume), 0.0, None)
    distributions /= distributions.sum(axis=1, keepdims=True)
    base = _seed_tuple(seed)
    per_string = {}
    for index, pauli in enumerate(all_pauli_strings(subsystem.volume)):
        rng = np.random.default_rng(base + (index,))
        per_string[pauli] = rng.multinomial(n_s, distributions[index]).astype(float)
    return MeasurementRecord(subsystem=subsystem, per_string=per_string, samples_per_string=n_s)


def exact_record(psi_or_rho, subsystem: Subsystem, weight: float = 1.0) -> MeasurementRecord:
    """Record with exact outcome probabilities injected as fractional counts.

    The infinite-sample limit: reconstruction from such a record recovers the
    source state up to solver tolerance.
    """
    if isinstance(psi_or_rho, DensityMatrix):
        rho = psi_or_rho
    else:
        rho = reduced_density_matrix(amplitudes_of(psi_or_rho), subsystem.sites)
    distributions = np.clip(string_probabilities(rho, subsystem.volume), 0.0, None)
    distributions /= distributions.sum(axis=1, keepdims=True)
    per_string = {
        pauli: weight * distributions[index]
        for index, pauli in enumerate(all_pauli_strings(subsystem.volume))
    }
    return MeasurementRecord(subsystem=subsystem, per_string=per_string, samples_per_string=weight)


def _rotate_site(amps: np.ndarray, n: int, site: int, mat: np.ndarray) -> np.ndarray:
    v = amps.reshape(1 << (n - 1 - site), 2, 1 << site)
    out = np.empty_like(v)
    out[:, 0, :] = mat[0, 0] * v[:, 0, :] + mat[0, 1] * v[:, 1, :]
    out[:, 1, :] = mat[1, 0] * v[:, 0, :] + mat[1, 1] * v[:, 1, :]
    return out.reshape(amps.shape)


def simultaneous_tomography(
    psi, coloring: TomographyColoring, subsystems, n_s: int, seed
) -> dict[Subsystem, MeasurementRecord]:
    """Simulate one global campaign of 3^C colored Pauli settings, n_s shots each.

    Every non-excluded site is rotated according to its color's basis and the
    full lattice is projected; each global outcome feeds the compatible
    marginal of every subsystem, so a volume-V subsystem accumulates
    n_s * 3^(C-V) samples per local string, with the same inter-subsystem
    sample correlations a hardware campaign would produce.
    """
    amps = np.ascontiguousarray(amplitudes_of(psi), dtype=complex)
    n = amps.shape[0].bit_length() - 1
    subsystems = list(subsystems)
    for sub in subsystems:
        if not coloring.is_reconstructable(sub.sites):
            raise ValueError(f"subsystem {sub.sites} is not reconstructable under the coloring")
    n_colors = coloring.n_colors
    measured_sites = sorted(
        s for s in coloring.assignment if s not in coloring.excluded_sites
    )

    records: dict[Subsystem, dict[str, np.ndarray]] = {
        sub: {
            pauli: np.zeros(1 << sub.volume)
            for pauli in all_pauli_strings(sub.volume)
        }
        for sub in subsystems
    }
    base = _seed_tuple(seed)
    global_idx = np.arange(1 << n, dtype=np.int64)
    sub_idx = {
        sub: sum(((global_idx >> site) & 1) << p for p, site in enumerate(sub.sites))
        for sub in subsystems
    }

    for setting_index, setting in enumerate(itertools.product("XYZ", repeat=n_colors)):
        rotated = amps
        for site in measured_sites:
            basis = setting[coloring.assignment[site]]
            if basis != "Z":
                rotated = _rotate_site(rotated, n, site, ROTATIONS[basis])
        probs = np.abs(rotated) ** 2
        probs = probs / probs.sum()
        rng = np.random.default_rng(base + (setting_index,))
        counts = rng.multinomial(n_s, probs)
        hits = np.nonzero(counts)[0]
        weights = counts[hits].astype(float)
        for sub in subsystems:
            local = "".join(setting[coloring.assignment[site]] for site in sub.sites)
            np.add.at(records[sub][local], sub_idx[sub][hits], weights)

    multiplier = {sub: n_s * 3 ** (n_colors - sub.volume) for sub in subsystems}
    return {
        sub: MeasurementRecord(
            subsystem=sub, per_string=records[sub], samples_per_string=multiplier[sub]
        )
        for sub in subsystems
    }


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------


def _counts_matrix(record: MeasurementRecord) -> np.ndarray:
    strings = all_pauli_strings(record.volume)
    missing = [s for s in strings if s not in record.per_string]
    if missing:
        raise ValueError(f"record is incomplete: missing {len(missing)} strings, e.g. {missing[0]!r}")
    return np.stack([record.per_string[s] for s in strings])


def linear_inversion(record: MeasurementRecord) -> np.ndarray:
    """Direct estimate (1/2^V) * sum_P <P> P over all 4^V Pauli operators.

    Expectations of operators with identity factors pool the counts of every
    compatible recorded string.  The result is Hermitian with unit trace but
    generally not positive semidefinite at finite samples.
    """
    volume = record.volume
    dim = 1 << volume
    counts = _counts_matrix(record)
    strings = all_pauli_strings(volume)
    outcome_bits = (np.arange(dim)[:, None] >> np.arange(volume)) & 1  # (dim, V)

    sums = np.zeros((4,) * volume)
    totals = np.zeros((4,) * volume)
    code = {"X": 1, "Y": 2, "Z": 3}
    for s_index, pauli in enumerate(strings):
        signs = np.array(
            [[OUTCOME_SIGNS[c][b] for b in (0, 1)] for c in pauli]
        )  # (V, 2)
        site_signs = signs[np.arange(volume)[None, :], outcome_bits].T  # (V, dim)
        # products[mask] = prod over sites p in mask of site_signs[p]
        products = np.ones((1 << volume, dim))
        for mask in range(1, 1 << volume):
            low = mask & -mask
            products[mask] = products[mask ^ low] * site_signs[low.bit_length() - 1]
        values = products @ counts[s_index]
        total = counts[s_index].sum()
        for mask in range(1 << volume):
            key = tuple(
                code[pauli[p]] if (mask >> p) & 1 else 0 for p in range(volume)
            )
            sums[key] += values[mask]
            totals[key] += total

    t = sums / totals
    # Inverse Pauli transform: contract each site axis with its operator.
    stack = np.stack([OPERATORS[c] for c in "IXYZ"])
    result = t.astype(complex)
    for _ in range(volume):
        result = np.tensordot(result, stack, axes=([0], [0]))
    # axes now (i_0, j_0, ..., i_{V-1}, j_{V-1}); want MSB-first rows/cols
    perm = [2 * p for p in reversed(range(volume))] + [
        2 * p + 1 for p in reversed(range(volume))
    ]
    rho = result.transpose(perm).reshape(dim, dim) / dim
    return (rho + rho.conj().T) / 2


@dataclass(frozen=True)
class MleSettings:
    """Convergence controls for the iterative likelihood maximizer.

    ``mixing`` is the initial dilution of the fixed-point step; the line
    search doubles it after successful steps (up to ``max_mixing``,
    overrelaxing past the plain fixed point) and halves it whenever a step
    would decrease the likelihood, so likelihood is monotone by construction.
    """

    tol: float = 1e-10
    max_iterations: int = 2000
    mixing: float = 0.5
    max_mixing: float = 256.0

    def __post_init__(self) -> None:
        if not 0 < self.mixing <= self.max_mixing:
            raise ValueError("mixing must lie in (0, max_mixing]")
        if self.tol <= 0 or self.max_iterations < 1:
            raise ValueError("tol and max_iterations must be positive")


DEFAULT_MLE_SETTINGS = MleSettings()

_PROB_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    rho: DensityMatrix
    log_likelihood: float
    iterations: int
    converged: bool


def _log_likelihood(counts: np.ndarray, probs: np.ndarray) -> float:
    mask = counts > 0
    return float(np.sum(counts[mask] * np.log(probs[mask])))


def mle_reconstruct(
    record: MeasurementRecord, settings: MleSettings = DEFAULT_MLE_SETTINGS
) -> ReconstructionResult:
    """Maximize the multinomial likelihood of the recorded bitstring counts.

    Diluted fixed-point iteration: rho <- G rho G / Tr(...) with
    G = (1-a) I + a R(rho), where R is the likelihood gradient operator.  The
    step is halved within an iteration whenever it would decrease the
    likelihood, so the likelihood is non-decreasing by construction.
    """
    volume = record.volume
    dim = 1 << volume
    counts = _counts_matrix(record)
    n_total = counts.sum()

    def probabilities(rho: np.ndarray) -> np.ndarray:
        return np.clip(string_probabilities(rho, volume), _PROB_FLOOR, None)

    rho = np.eye(dim, dtype=complex) / dim
    probs = probabilities(rho)
    likelihood = _log_likelihood(counts, probs)
    converged = False
    iterations = 0
    step = settings.mixing

    for iterations in range(1, settings.max_iterations + 1):
        weights = np.where(counts > 0, counts / probs, 0.0)
        gain_op = _weighted_projector_sum(weights, volume) / n_total

        improved = False
        while step > 1e-8:
            mix = (1 - step) * np.eye(dim) + step * gain_op
            candidate = mix @ rho @ mix.conj().T
            candidate /= np.trace(candidate).real
            candidate = (candidate + candidate.conj().T) / 2
            cand_probs = probabilities(candidate)
            cand_likelihood = _log_likelihood(counts, cand_probs)
            if cand_likelihood >= likelihood:
                improved = True
                break
            step /= 2
        if not improved:
            converged = True
            break
        gain = cand_likelihood - likelihood
        rho, probs, likelihood = candidate, cand_probs, cand_likelihood
        step = min(step * 2, settings.max_mixing)
        if gain < settings.tol * (1.0 + abs(likelihood)):
            converged = True
            break

    # Enforce the density-matrix invariants exactly.
    vals, vecs = np.linalg.eigh(rho)
    vals = np.clip(vals, 0.0, None)
    vals /= vals.sum()
    rho = (vecs * vals) @ vecs.conj().T
    rho = (rho + rho.conj().T) / 2
    return ReconstructionResult(
        rho=DensityMatrix(rho),
        log_likelihood=likelihood,
        iterations=iterations,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# Sampling-saturation study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplingStudyRow:
    volume: int
    n_s: int
    mean_extracted_entropy: float
    mean_exact_entropy: float


def sampling_study(
    psi, subsystems, ns_grid, seed, settings: MleSettings = DEFAULT_MLE_SETTINGS
) -> list[SamplingStudyRow]:
    """Mean MLE-extracted entropy versus per-string sample count.

    Per-subsystem direct sampling (each Pauli string drawn n_s times); rows
    are grouped by subsystem volume.  Extracted entropies increase with n_s
    and saturate at the exact value.
    """
    from .quantum_info import renyi2_entropy

    ns_grid = [int(v) for v in ns_grid]
    if not ns_grid:
        raise ValueError("ns_grid must be nonempty")
    subsystems = list(subsystems)
    base = _seed_tuple(seed)
    exact = {
        sub: renyi2_entropy(reduced_density_matrix(amplitudes_of(psi), sub.sites))
        for sub in subsystems
    }
    rows = []
    volumes = sorted({sub.volume for sub in subsystems})
    for ns_index, n_s in enumerate(ns_grid):
        extracted: dict[Subsystem, float] = {}
        for sub_index, sub in enumerate(subsystems):
            record = measure_record(psi, sub, n_s, base + (sub_index, ns_index))
            result = mle_reconstruct(record, settings)
            extracted[sub] = renyi2_entropy(result.rho)
        for volume in volumes:
            members = [s for s in subsystems if s.volume == volume]
            rows.append(
                SamplingStudyRow(
                    volume=volume,
                    n_s=n_s,
                    mean_extracted_entropy=float(np.mean([extracted[s] for s in members])),
                    mean_exact_entropy=float(np.mean([exact[s] for s in members])),
                )
            )
    return rows


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def record_to_dict(record: MeasurementRecord) -> dict:
    """JSON-ready form; bitstring keys render the outcome integer MSB-first
    (bit p, counted from the right, is the p-th subsystem site)."""
    volume = record.volume
    return {
        "sites": list(record.subsystem.sites),
        "volume": volume,
        "area": record.subsystem.area,
        "samples_per_string": record.samples_per_string,
        "counts": {
            pauli: {
                format(outcome, f"0{volume}b"): count
                for outcome, count in enumerate(counts)
                if count != 0
            }
            for pauli, counts in sorted(record.per_string.items())
        },
    }


def record_from_dict(raw: dict) -> MeasurementRecord:
    volume = int(raw["volume"])
    subsystem = Subsystem(
        sites=tuple(int(s) for s in raw["sites"]),
        volume=volume,
        area=int(raw["area"]),
    )
    per_string = {}
    for pauli, outcomes in raw["counts"].items():
        counts = np.zeros(1 << volume)
        for bits, count in outcomes.items():
            counts[int(bits, 2)] = count
        per_string[pauli] = counts
    return MeasurementRecord(
        subsystem=subsystem,
        per_string=per_string,
        samples_per_string=float(raw["samples_per_string"]),
    )


def density_matrix_to_pairs(rho) -> list[list[float]]:
    """Row-major [re, im] pairs, the export format for reconstructed states."""
    mat = np.asarray(getattr(rho, "matrix", rho))
    return [[float(z.real), float(z.imag)] for z in mat.reshape(-1)]


def save_record(record: MeasurementRecord, path) -> None:
    with open(path, "w") as fh:
        json.dump(record_to_dict(record), fh, indent=1)


def load_record(path) -> MeasurementRecord:
    with open(path) as fh:
        return record_from_dict(json.load(fh))
