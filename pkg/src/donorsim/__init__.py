"""Simulation toolkit for donor spins in silicon.

Submodules group the physics by scale: ``spincore`` holds species data
and static Hamiltonians, ``dynamics`` the pulse-level propagators,
``protocols`` the measurement sequences, ``multiqubit`` two-donor gates,
``ner`` electrically driven nuclear resonance, ``chaos`` the driven top,
``sensing`` metrology figures, ``cavity`` ensemble-resonator physics,
and ``implantation`` counted-ion statistics.  ``cli`` exposes all of it
as the ``donorsim`` command.
"""

from .spincore import (
    BENCHMARKS,
    DONORS,
    GAMMA_E_MHZ_PER_T,
    KB_MHZ_PER_K,
    DonorSpecies,
    QuadrupoleParams,
    SpinSystem,
    breit_rabi_levels,
    build_static_hamiltonian,
    donor_lookup,
    esr_frequencies,
    ionized_hamiltonian,
    neutral_hamiltonian,
    registry_from_json,
    registry_to_json,
    spin_operators,
    transition_spectrum,
)
from .dynamics import (
    LindbladDephasing,
    PsdTable,
    PulseSequence,
    QuantumState,
    QuasiStaticGaussian,
    RotatingFrame,
    delay,
    drive,
    propagate_lindblad,
    propagate_unitary,
)
from .protocols import (
    ReadoutParams,
    cpmg_pattern,
    coherence_from_psd,
    filter_weight,
    qnd_fidelity_exact,
    qnd_nuclear_readout,
    qnd_readout_sweep,
    simulate_cpmg,
    simulate_rabi,
    simulate_ramsey,
    spin_to_charge_readout,
)
from .multiqubit import (
    FlipFlopParams,
    TwoDonorParams,
    crot_gate,
    crot_spectrum,
    edsr_rabi,
    flipflop_dipole_coupling,
    flipflop_splitting,
    xy_gate,
)
from .ner import NerDrive, ner_matrix_element, ner_spectrum_sim, quadrupole_line_shifts
from .chaos import (
    CHAOTIC_POINT,
    DEFAULT_TOP,
    REGULAR_POINT,
    TopParams,
    classical_trajectory,
    lyapunov_exponent,
    lyapunov_map,
    poincare_map,
    purity_map,
    quantum_stroboscopic,
    spin_coherent_state,
)
from .sensing import (
    SensorSpec,
    ac_sensitivity,
    dc_sensitivity,
    magnetic_sensitivity,
    min_detectable_strain,
    sensor_from_benchmark,
    strain_shift,
)
from .cavity import (
    CavityParams,
    EnsembleParams,
    InputPulse,
    cooperativity,
    matched_external_coupling,
    photon_storage_sim,
    purcell_rate,
    spins_for_cooperativity,
    vacuum_rabi_splitting,
)
from .implantation import (
    ION_TABLE,
    DetectorSpec,
    IonSpec,
    array_yield,
    detection_probability_exact,
    eh_pair_signal,
    fit_pair_energy,
    ion_detection_mc,
    placement_spread,
)

__version__ = "0.1.0"
