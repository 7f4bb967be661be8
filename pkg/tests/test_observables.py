import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hcbh_lab.lattice import build_lattice
from hcbh_lab.observables import (
    CorrelationFitOptions,
    CorrelatorMatrix,
    correlation_length,
    excitation_distribution,
    mean_sq_correlator_by_distance,
    poisson_fit,
    site_populations,
    truncated_poisson,
    two_point_correlators,
)

from oracles import random_state


def test_population_examples():
    vacuum = np.zeros(8, dtype=complex)
    vacuum[0] = 1.0
    assert np.allclose(site_populations(vacuum), 0.0)
    single = np.zeros(8, dtype=complex)
    single[1 << 2] = 1.0
    assert np.allclose(site_populations(single), [0.0, 0.0, 1.0])


def test_excitation_distribution_examples():
    vacuum = np.zeros(16, dtype=complex)
    vacuum[0] = 1.0
    dist = excitation_distribution(vacuum)
    assert dist[0] == pytest.approx(1.0)
    mix = np.zeros(4, dtype=complex)
    mix[0] = mix[1] = 1 / math.sqrt(2)  # vacuum + one-particle superposition
    dist = excitation_distribution(mix)
    assert dist[0] == pytest.approx(0.5)
    assert dist[1] == pytest.approx(0.5)


@given(seed=st.integers(0, 2**31), n=st.integers(1, 8))
def test_mean_excitations_equals_population_sum(seed, n):
    rng = np.random.default_rng(seed)
    psi = random_state(1 << n, rng)
    dist = excitation_distribution(psi)
    assert dist.sum() == pytest.approx(1.0, abs=1e-9)
    mean = float(np.dot(np.arange(n + 1), dist))
    assert mean == pytest.approx(site_populations(psi).sum(), abs=1e-9)


def test_poisson_fit_self_consistency():
    model = truncated_poisson(2.0, 16)
    lam, tv = poisson_fit(model)
    assert tv < 1e-9
    assert lam == pytest.approx(2.0, abs=1e-6)


def test_poisson_fit_degenerate_distributions():
    delta0 = np.zeros(17)
    delta0[0] = 1.0
    lam, tv = poisson_fit(delta0)
    assert lam == 0.0
    assert tv == 0.0
    delta3 = np.zeros(9)
    delta3[3] = 1.0
    lam, tv = poisson_fit(delta3)
    assert lam == pytest.approx(3.0)


def test_correlators_product_state_vanish():
    rng = np.random.default_rng(0)
    single = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    single /= np.linalg.norm(single, axis=1, keepdims=True)
    psi = np.ones(1, dtype=complex)
    for row in single:
        psi = np.kron(row, psi)  # site k uses bit k
    corr = two_point_correlators(psi)
    assert np.max(np.abs(corr.entries)) < 1e-12


def test_bell_pair_correlator_is_one():
    psi = np.zeros(4, dtype=complex)
    psi[0] = psi[3] = 1 / math.sqrt(2)
    corr = two_point_correlators(psi)
    assert corr.entries[0, 1] == pytest.approx(1.0)
    assert np.allclose(corr.entries, corr.entries.T)


def test_correlator_matrix_against_dense_oracle():
    from oracles import SIGMA_X, op_at

    rng = np.random.default_rng(9)
    n = 5
    psi = random_state(1 << n, rng)
    corr = two_point_correlators(psi).entries
    for i in range(n):
        for j in range(i + 1, n):
            xi = np.vdot(psi, op_at(SIGMA_X, i, n) @ psi).real
            xj = np.vdot(psi, op_at(SIGMA_X, j, n) @ psi).real
            xx = np.vdot(psi, op_at(SIGMA_X, i, n) @ op_at(SIGMA_X, j, n) @ psi).real
            assert corr[i, j] == pytest.approx(xx - xi * xj, abs=1e-12)


def _synthetic_correlators(spec, xi):
    n = spec.sites
    entries = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            distance = spec.manhattan_distance(i, j)
            entries[i, j] = entries[j, i] = math.exp(-distance / (2 * xi))
    return CorrelatorMatrix(entries)


def test_exact_exponential_fit():
    spec = build_lattice(4, 4, 1.0)
    fit = correlation_length(_synthetic_correlators(spec, 2.0), spec)
    assert not fit.divergent
    assert fit.xi == pytest.approx(2.0, abs=1e-6)
    assert fit.stderr == pytest.approx(0.0, abs=1e-9)


def test_fit_scaling_invariance_power_of_two_exact():
    spec = build_lattice(4, 4, 1.0)
    base = _synthetic_correlators(spec, 1.3)
    noisy = CorrelatorMatrix(base.entries + 1e-3 * np.sin(np.arange(256)).reshape(16, 16))
    noisy = CorrelatorMatrix((noisy.entries + noisy.entries.T) / 2)
    fit1 = correlation_length(noisy, spec)
    scaled = CorrelatorMatrix(noisy.entries * 2.0)  # |C|^2 scales by exactly 4.0
    fit2 = correlation_length(scaled, spec)
    assert fit2.xi == fit1.xi  # bit-identical
    assert fit2.amplitude == pytest.approx(4.0 * fit1.amplitude, rel=1e-12)


@given(scale=st.floats(0.1, 10.0))
def test_fit_scaling_invariance_general(scale):
    spec = build_lattice(4, 4, 1.0)
    base = _synthetic_correlators(spec, 1.7)
    fit1 = correlation_length(base, spec)
    fit2 = correlation_length(CorrelatorMatrix(base.entries * math.sqrt(scale)), spec)
    assert fit2.xi == pytest.approx(fit1.xi, rel=1e-12)


def test_fit_flags_divergent_when_flat():
    spec = build_lattice(4, 4, 1.0)
    entries = np.full((16, 16), 0.3)
    np.fill_diagonal(entries, 0.0)
    fit = correlation_length(CorrelatorMatrix(entries), spec)
    assert fit.divergent
    assert fit.xi == math.inf


def test_fit_flags_divergent_beyond_xi_max():
    spec = build_lattice(4, 4, 1.0)
    fit = correlation_length(_synthetic_correlators(spec, 80.0), spec)
    assert fit.divergent
    assert fit.xi > 50.0


def test_fit_noise_floor_and_min_points():
    spec = build_lattice(4, 4, 1.0)
    entries = np.zeros((16, 16))
    # only M=1 pairs above the floor
    for i, j in spec.nn_bonds:
        entries[i, j] = entries[j, i] = 0.5
    with pytest.raises(ValueError):
        correlation_length(CorrelatorMatrix(entries), spec)
    # restricting distances below two usable bins also raises
    good = _synthetic_correlators(spec, 2.0)
    with pytest.raises(ValueError):
        correlation_length(good, spec, CorrelationFitOptions(distances=(1,)))


def test_mean_sq_groups_include_all_pairs():
    spec = build_lattice(4, 4, 1.0)
    corr = _synthetic_correlators(spec, 2.0)
    by_distance = mean_sq_correlator_by_distance(corr, spec)
    assert set(by_distance) == {1, 2, 3, 4, 5, 6}
    total_pairs = sum(
        1 for i in range(16) for j in range(i + 1, 16)
    )
    counted = sum(
        sum(
            1
            for i in range(16)
            for j in range(i + 1, 16)
            if spec.manhattan_distance(i, j) == m
        )
        for m in by_distance
    )
    assert counted == total_pairs
