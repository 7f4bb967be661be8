"""Brute-force reference implementations used only by the tests.

Everything here is deliberately naive: dense operators assembled from
Kronecker products, double-loop partial traces, dense matrix exponentials.
They define ground truth; the package must agree with them, and they must
stay independent of the package internals they check.
"""

import numpy as np
import scipy.linalg

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
# occupation -> +1 convention, matching the package's sigma_z
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)
RAISE = np.array([[0, 0], [1, 0]], dtype=complex)  # |0> -> |1>
LOWER = RAISE.conj().T


def op_at(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Single-site operator embedded at ``site`` (bit i of the index = site i)."""
    mat = np.eye(1, dtype=complex)
    for s in range(n_sites - 1, -1, -1):
        mat = np.kron(mat, op if s == site else I2)
    return mat


def dense_hamiltonian(spec, delta: float, omega: float = 0.0) -> np.ndarray:
    """Dense driven Hamiltonian from the stated operator definitions."""
    n = spec.sites
    dim = 1 << n
    ham = np.zeros((dim, dim), dtype=complex)
    for (i, j), coupling in spec.couplings.items():
        ham += coupling * (
            op_at(RAISE, i, n) @ op_at(LOWER, j, n)
            + op_at(LOWER, i, n) @ op_at(RAISE, j, n)
        )
    for i in range(n):
        ham += (delta / 2.0) * op_at(SIGMA_Z, i, n)
        ham += (spec.site_detunings[i] / 2.0) * op_at(SIGMA_Z, i, n)
    if omega:
        for j in range(n):
            alpha = spec.drive_couplings[j]
            ham += omega * (
                alpha * op_at(LOWER, j, n) + np.conj(alpha) * op_at(RAISE, j, n)
            )
    return ham


def dense_evolve(spec, delta: float, omega: float, psi0: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) psi0 by dense matrix exponentiation."""
    ham = dense_hamiltonian(spec, delta, omega)
    return scipy.linalg.expm(-1j * ham * t) @ psi0


def naive_partial_trace(psi: np.ndarray, keep, n_sites: int) -> np.ndarray:
    """Double-loop partial trace; bit p of the output index = p-th kept site."""
    keep = sorted(keep)
    env = [s for s in range(n_sites) if s not in set(keep)]
    dim_keep = 1 << len(keep)
    rho = np.zeros((dim_keep, dim_keep), dtype=complex)
    for b1 in range(1 << n_sites):
        for b2 in range(1 << n_sites):
            if all(((b1 >> e) & 1) == ((b2 >> e) & 1) for e in env):
                k1 = sum(((b1 >> s) & 1) << p for p, s in enumerate(keep))
                k2 = sum(((b2 >> s) & 1) << p for p, s in enumerate(keep))
                rho[k1, k2] += psi[b1] * np.conj(psi[b2])
    return rho


def random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)
