"""Desk-scale simulator and analysis toolkit for entanglement scaling in
driven 2D hard-core Bose-Hubbard lattices."""

__version__ = "0.1.0"

from .errors import ConfigError, ConvergenceError, EvolutionError
from .evolution import (
    DriveSpec,
    EvolutionSettings,
    StateVector,
    eigenbasis_overlap,
    evolve,
    evolve_trajectory,
    prepare_coherent_like_state,
)
from .hamiltonian import (
    SectorHamiltonian,
    apply_driven,
    apply_hcbh,
    sector_basis,
    sector_project,
    sector_spectra,
    sector_spectrum,
    spectrum_skew,
)
from .lattice import (
    DeviceConfig,
    LatticeSpec,
    Subsystem,
    TomographyColoring,
    build_lattice,
    bundled_device,
    enumerate_connected_subsystems,
    enumerate_subsystems,
    load_device_config,
    manhattan_distance,
    subsystem_area,
)
from .observables import (
    CorrelationFit,
    CorrelationFitOptions,
    CorrelatorMatrix,
    correlation_length,
    excitation_distribution,
    mean_sq_correlator_by_distance,
    poisson_fit,
    site_populations,
    two_point_correlators,
)
from .quantum_info import (
    DecoherenceParams,
    DensityMatrix,
    SchmidtSpectrum,
    dephasing_entropy,
    global_entanglement,
    mean_field_dephasing_correction,
    page_renyi2,
    reduced_density_matrix,
    renyi2_entropy,
    schmidt_spectrum,
    truncation_rank,
)
from .scaling import (
    EntropyTable,
    ScalingFit,
    entropy_table,
    fit_scaling,
    geometric_ratio,
    ground_state,
    haar_random_state,
    scalability_study,
    superposition_state,
)
from .tomography import (
    MeasurementRecord,
    MleSettings,
    ReconstructionResult,
    exact_record,
    linear_inversion,
    measure_record,
    mle_reconstruct,
    sample_pauli_string,
    sampling_study,
    simultaneous_tomography,
)
