import math

import numpy as np
import pytest

from hcbh_lab.errors import EvolutionError
from hcbh_lab.evolution import (
    DriveSpec,
    EvolutionSettings,
    StateVector,
    eigenbasis_overlap,
    evolve,
    evolve_trajectory,
    prepare_coherent_like_state,
)
from hcbh_lab.hamiltonian import apply_driven, sector_basis, sector_project, sector_spectra, sector_spectrum
from hcbh_lab.lattice import build_lattice
from hcbh_lab.observables import site_populations

from oracles import dense_evolve, random_state


def _embed_sector_state(vec, basis, n_sites):
    amps = np.zeros(1 << n_sites, dtype=complex)
    amps[basis] = vec
    return StateVector(amps, n_sites)


def test_stationary_eigenstate_acquires_only_phase():
    spec = build_lattice(2, 2, 1.0)
    sector = sector_project(spec, 2, 0.0)
    energies, vectors = sector_spectrum(sector, eigenvectors=True)
    psi0 = _embed_sector_state(vectors[:, 1], sector.basis, 4)
    final = evolve(spec, DriveSpec(0.0, 0.0, duration=3.0), psi0)
    fidelity = abs(np.vdot(psi0.amplitudes, final.amplitudes))
    assert fidelity == pytest.approx(1.0, abs=1e-6)
    # and the phase matches e^{-iEt}
    phase = np.vdot(psi0.amplitudes, final.amplitudes)
    assert phase == pytest.approx(np.exp(-1j * energies[1] * 3.0), abs=1e-5)


def test_single_site_rabi_flop():
    spec = build_lattice(1, 1, 1.0)
    state = prepare_coherent_like_state(spec, omega=1.0, delta=0.0, t=math.pi / 2)
    populations = site_populations(state)
    assert populations[0] == pytest.approx(1.0, abs=1e-6)
    # intermediate time: sin^2(Omega t)
    state = prepare_coherent_like_state(spec, omega=1.0, delta=0.0, t=0.4)
    assert populations_close(state, math.sin(0.4) ** 2)


def populations_close(state, expected):
    return site_populations(state)[0] == pytest.approx(expected, abs=1e-6)


def test_2x2_against_dense_expm():
    rng = np.random.default_rng(1)
    spec = build_lattice(
        2, 2, 1.0, drive_couplings=rng.random(4) * np.exp(2j * np.pi * rng.random(4))
    )
    psi0 = StateVector.normalized(random_state(16, rng), 4)
    final = evolve(spec, DriveSpec(0.5, 0.0, duration=10.0), psi0)
    reference = dense_evolve(spec, 0.0, 0.5, psi0.amplitudes, 10.0)
    fidelity = abs(np.vdot(reference, final.amplitudes))
    assert fidelity > 1 - 1e-6


def test_energy_conserved_without_drive():
    spec = build_lattice(2, 3, 1.0, 0.15)
    rng = np.random.default_rng(7)
    psi0 = StateVector.normalized(random_state(spec.dim, rng), 6)
    drive = DriveSpec(0.0, 0.3)
    states = evolve_trajectory(spec, drive, psi0, [2.0, 6.0, 10.0])
    energies = [
        np.vdot(s.amplitudes, apply_driven(spec, drive, s.amplitudes)).real for s in states
    ]
    initial = np.vdot(psi0.amplitudes, apply_driven(spec, drive, psi0.amplitudes)).real
    assert all(abs(e - initial) < 1e-6 for e in energies)


def test_step_halving_is_fourth_order():
    spec = build_lattice(2, 2, 1.0)
    psi0 = StateVector.vacuum(4)
    drive = DriveSpec(2.0, 0.7, duration=3.0)
    reference = dense_evolve(spec, 0.7, 2.0, psi0.amplitudes, 3.0)

    def deficit(step):
        # tolerance relaxed: this test measures the discretization error that
        # the default tolerance would reject at these coarse steps
        final = evolve(spec, drive, psi0, EvolutionSettings(step=step, tolerance=1.0))
        return 1.0 - abs(np.vdot(reference, final.amplitudes))

    coarse, fine = deficit(0.08), deficit(0.04)
    assert coarse / fine >= 8.0


def test_adaptive_method_matches_dense_expm():
    rng = np.random.default_rng(4)
    spec = build_lattice(2, 2, 1.0, drive_couplings=rng.random(4) * np.exp(1j * rng.random(4)))
    psi0 = StateVector.normalized(random_state(16, rng), 4)
    final = evolve(
        spec,
        DriveSpec(0.7, -0.4, duration=6.0),
        psi0,
        EvolutionSettings(method="adaptive"),
    )
    reference = dense_evolve(spec, -0.4, 0.7, psi0.amplitudes, 6.0)
    assert abs(np.vdot(reference, final.amplitudes)) > 1 - 1e-6


def test_unknown_method_rejected():
    with pytest.raises(ValueError):
        EvolutionSettings(method="euler")


def test_coherent_like_state_at_zero_time_is_vacuum():
    spec = build_lattice(2, 2, 1.0)
    state = prepare_coherent_like_state(spec, omega=0.5, delta=0.0, t=0.0)
    assert state.amplitudes[0] == pytest.approx(1.0)
    assert np.linalg.norm(state.amplitudes[1:]) == pytest.approx(0.0)


def test_far_detuned_drive_barely_excites():
    spec = build_lattice(2, 2, 1.0)
    state = prepare_coherent_like_state(
        spec, omega=0.5, delta=20.0, t=10.0, settings=EvolutionSettings(step=5e-4)
    )
    assert site_populations(state).sum() < 0.5


def test_unstable_step_raises():
    spec = build_lattice(2, 2, 1.0)
    with pytest.raises(EvolutionError):
        evolve(
            spec,
            DriveSpec(0.5, 40.0, duration=2.0),
            StateVector.vacuum(4),
            EvolutionSettings(step=0.05),
        )


def test_trajectory_rejects_unsorted_times():
    spec = build_lattice(1, 2, 1.0)
    with pytest.raises(ValueError):
        evolve_trajectory(spec, DriveSpec(0.1, 0.0), StateVector.vacuum(2), [2.0, 1.0])


def test_trajectory_matches_single_shot():
    spec = build_lattice(2, 2, 1.0)
    drive = DriveSpec(0.5, 0.4)
    traj = evolve_trajectory(spec, drive, StateVector.vacuum(4), [1.0, 2.5])
    single = evolve(spec, DriveSpec(0.5, 0.4, duration=2.5), StateVector.vacuum(4))
    assert abs(np.vdot(traj[-1].amplitudes, single.amplitudes)) == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------------------
# Eigenbasis overlap
# ---------------------------------------------------------------------------


def test_vacuum_overlap_concentrates_on_empty_sector():
    spec = build_lattice(2, 2, 1.0)
    spectra = sector_spectra(spec, delta=0.6, eigenvectors=True)
    rows = eigenbasis_overlap(StateVector.vacuum(4), spectra)
    total = sum(w for _, _, w in rows)
    assert total == pytest.approx(1.0, abs=1e-9)
    for n, energy, weight in rows:
        if n == 0:
            assert weight == pytest.approx(1.0, abs=1e-12)
            assert energy == pytest.approx(-0.6 * 4 / 2)
        else:
            assert weight == pytest.approx(0.0, abs=1e-12)


def test_overlap_total_is_one_for_all_sectors():
    spec = build_lattice(3, 3, 1.0)
    state = prepare_coherent_like_state(spec, 0.5, 0.0, 6.0)
    spectra = sector_spectra(spec, delta=0.0, eigenvectors=True)
    rows = eigenbasis_overlap(state, spectra)
    assert sum(w for _, _, w in rows) == pytest.approx(1.0, abs=1e-9)


def test_detuned_state_shifts_overlap_toward_band_edges():
    rng = np.random.default_rng(3)
    alpha = np.exp(2j * np.pi * rng.random(9)) * (0.5 + 0.5 * rng.random(9))
    spec = build_lattice(3, 3, 1.0, drive_couplings=alpha)
    spectra = sector_spectra(spec, delta=0.0, eigenvectors=True)

    def edge_concentration(delta):
        """Overlap-mass-weighted |E - band center| / half-width per sector."""
        state = prepare_coherent_like_state(spec, 0.5, delta, 10.0)
        rows = eigenbasis_overlap(state, spectra)
        numerator = denominator = mean_energy = 0.0
        for n in range(10):
            sector_rows = [(e, w) for nn, e, w in rows if nn == n]
            if len(sector_rows) < 3:
                continue
            energies = np.array([e for e, _ in sector_rows])
            center = (energies.max() + energies.min()) / 2
            half = (energies.max() - energies.min()) / 2
            numerator += sum(w * abs(e - center) / half for e, w in sector_rows)
            denominator += sum(w for _, w in sector_rows)
            mean_energy += sum(e * w for e, w in sector_rows)
        return numerator / denominator, mean_energy

    resonant, energy_0 = edge_concentration(0.0)
    mid, _ = edge_concentration(1.0)
    detuned, energy_pos = edge_concentration(2.0)
    _, energy_neg = edge_concentration(-2.0)
    assert resonant < 0.3  # mass concentrated near sector band centers
    assert resonant < mid < detuned
    assert abs(energy_0) < 1.0
    # opposite detuning signs populate opposite halves of the band
    assert energy_pos < -1.0 < 1.0 < energy_neg


def test_overlap_dimension_mismatch():
    spec = build_lattice(2, 2, 1.0)
    spectra = sector_spectra(spec, eigenvectors=True)
    basis, energies, vectors = spectra[1]
    spectra[1] = (basis, energies, vectors[:, :2])
    with pytest.raises(ValueError):
        eigenbasis_overlap(StateVector.vacuum(4), spectra)
