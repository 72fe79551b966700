"""Tests for ensemble-resonator physics: cooperativity, Purcell decay,
normal-mode splitting, and the linear photon-storage simulation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from donorsim import (
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

# Optimized-design constants: 3 kHz single-spin coupling, 1.8 kHz spin
# linewidth, 7.4 kHz cavity linewidth (Q = 1e6 at 7.4 GHz).
OPTIMIZED_CAVITY = CavityParams(f_c_mhz=7400.0, kappa_mhz=0.0074)
G0_MHZ = 0.003
GAMMA_MHZ = 0.0018

# Storage testbed: near-unit collective coupling against a 0.5 MHz line.
STORAGE_CAVITY = CavityParams(f_c_mhz=7400.0, kappa_mhz=0.01)
STORAGE_ENSEMBLE = EnsembleParams(n_spins=111_000, g0_mhz=0.003, gamma_mhz=0.5)


# ---------------------------------------------------------------------------
# Parameter containers


def test_kappa_from_quality_factor():
    cav = CavityParams(f_c_mhz=7400.0, q=1e6)
    assert math.isclose(cav.kappa, 0.0074, rel_tol=1e-12)


def test_consistent_kappa_and_q_accepted():
    CavityParams(f_c_mhz=7400.0, kappa_mhz=0.0074, q=1e6)
    with pytest.raises(ValueError, match="inconsistent"):
        CavityParams(f_c_mhz=7400.0, kappa_mhz=0.008, q=1e6)


def test_cavity_validation():
    with pytest.raises(ValueError, match="frequency"):
        CavityParams(f_c_mhz=-1.0, kappa_mhz=1.0)
    with pytest.raises(ValueError, match="kappa_mhz or q"):
        CavityParams(f_c_mhz=7400.0)
    with pytest.raises(ValueError, match="kappa_mhz must be positive"):
        CavityParams(f_c_mhz=7400.0, kappa_mhz=0.0)


def test_ensemble_validation():
    with pytest.raises(ValueError, match="n_spins"):
        EnsembleParams(n_spins=-1, g0_mhz=1.0, gamma_mhz=1.0)
    with pytest.raises(ValueError, match="non-negative"):
        EnsembleParams(n_spins=1, g0_mhz=-1.0, gamma_mhz=1.0)
    with pytest.raises(ValueError, match="distribution"):
        EnsembleParams(n_spins=1, g0_mhz=1.0, gamma_mhz=1.0, distribution="voigt")


def test_collective_coupling():
    ens = EnsembleParams(n_spins=10_000, g0_mhz=0.003, gamma_mhz=1.0)
    assert math.isclose(ens.g_ens_mhz, 0.3, rel_tol=1e-12)


# ---------------------------------------------------------------------------
# Cooperativity


def test_cooperativity_closed_form():
    ens = EnsembleParams(n_spins=12, g0_mhz=G0_MHZ, gamma_mhz=GAMMA_MHZ)
    res = cooperativity(OPTIMIZED_CAVITY, ens)
    expected = 12 * G0_MHZ**2 / (0.0074 * GAMMA_MHZ)
    assert math.isclose(res.c, expected, rel_tol=1e-12)
    assert math.isclose(res.g_ens_mhz, math.sqrt(12) * G0_MHZ, rel_tol=1e-12)


def test_empty_ensemble_has_zero_cooperativity():
    ens = EnsembleParams(n_spins=0, g0_mhz=G0_MHZ, gamma_mhz=GAMMA_MHZ)
    assert cooperativity(OPTIMIZED_CAVITY, ens).c == 0.0


def test_unit_cooperativity_crossing_at_two_spins():
    """With the optimized-design constants a single donor falls short of
    C = 1 but two already exceed it."""
    one = EnsembleParams(n_spins=1, g0_mhz=G0_MHZ, gamma_mhz=GAMMA_MHZ)
    two = EnsembleParams(n_spins=2, g0_mhz=G0_MHZ, gamma_mhz=GAMMA_MHZ)
    assert cooperativity(OPTIMIZED_CAVITY, one).c < 1.0
    assert cooperativity(OPTIMIZED_CAVITY, two).c > 1.0
    assert spins_for_cooperativity(OPTIMIZED_CAVITY, G0_MHZ, GAMMA_MHZ) == 2


def test_megaensemble_cooperativity():
    ens = EnsembleParams(n_spins=10**6, g0_mhz=G0_MHZ, gamma_mhz=GAMMA_MHZ)
    c = cooperativity(OPTIMIZED_CAVITY, ens).c
    assert abs(c - 6.8e5) / 6.8e5 < 0.02
    assert math.isclose(c, 10**6 * G0_MHZ**2 / (0.0074 * GAMMA_MHZ), rel_tol=1e-12)


def test_spin_count_ceiling_boundary():
    cav = CavityParams(f_c_mhz=1000.0, kappa_mhz=4.0)
    # target * kappa * gamma / g0^2 lands exactly on an integer.
    assert spins_for_cooperativity(cav, g0_mhz=1.0, gamma_mhz=1.0) == 4
    assert spins_for_cooperativity(cav, g0_mhz=2.0, gamma_mhz=1.0) == 1
    assert spins_for_cooperativity(cav, g0_mhz=1.0, gamma_mhz=1.0, target=0.0) == 0
    with pytest.raises(ValueError, match="g0_mhz"):
        spins_for_cooperativity(cav, g0_mhz=0.0, gamma_mhz=1.0)


def test_zero_linewidth_rejected():
    ens = EnsembleParams(n_spins=1, g0_mhz=1.0, gamma_mhz=0.0)
    with pytest.raises(ValueError, match="kappa > 0 and gamma > 0"):
        cooperativity(OPTIMIZED_CAVITY, ens)


@given(
    k=st.integers(min_value=1, max_value=10_000),
    n=st.integers(min_value=1, max_value=10_000),
    g0=st.floats(min_value=1e-4, max_value=10.0),
)
def test_cooperativity_depends_only_on_collective_coupling(k, n, g0):
    """C is invariant under g0 -> g0/sqrt(k), N -> k N."""
    cav = CavityParams(f_c_mhz=7400.0, kappa_mhz=0.0074)
    base = EnsembleParams(n_spins=n, g0_mhz=g0, gamma_mhz=0.0018)
    diluted = EnsembleParams(
        n_spins=k * n, g0_mhz=g0 / math.sqrt(k), gamma_mhz=0.0018
    )
    assert math.isclose(
        cooperativity(cav, base).c, cooperativity(cav, diluted).c, rel_tol=1e-9
    )


# ---------------------------------------------------------------------------
# Purcell decay


def test_resonant_purcell_rate():
    # kappa * rate = 4 g^2 exactly in the ordinary-frequency convention.
    rate = purcell_rate(G0_MHZ, 0.0074)
    assert math.isclose(rate * 0.0074, 4.0 * G0_MHZ**2, rel_tol=1e-12)
    assert math.isclose(rate, 0.00486486486486, rel_tol=1e-9)


def test_detuned_purcell_formula():
    rate = purcell_rate(0.5, 2.0, delta_mhz=3.0)
    assert math.isclose(rate, 0.25 * 2.0 / (9.0 + 1.0), rel_tol=1e-12)


def test_far_detuned_suppression():
    kappa = 0.0074
    delta = 10.0 * kappa
    ratio = purcell_rate(G0_MHZ, kappa, delta) / purcell_rate(G0_MHZ, kappa)
    assert abs(ratio - kappa**2 / (4.0 * delta**2)) / ratio < 0.01


def test_purcell_edge_cases():
    assert purcell_rate(0.0, 1.0) == 0.0
    with pytest.raises(ValueError, match="kappa_mhz"):
        purcell_rate(1.0, 0.0)


# ---------------------------------------------------------------------------
# Normal-mode splitting


def test_resonant_splitting_is_twice_collective_coupling():
    ens = EnsembleParams(n_spins=10**6, g0_mhz=0.003, gamma_mhz=0.0018)
    modes = vacuum_rabi_splitting(STORAGE_CAVITY, ens)
    assert math.isclose(modes.splitting_mhz, 2.0 * ens.g_ens_mhz, rel_tol=1e-12)
    assert math.isclose(
        modes.f_upper_mhz - modes.f_lower_mhz, modes.splitting_mhz, rel_tol=1e-12
    )


def test_quadrupling_spins_doubles_splitting():
    small = EnsembleParams(n_spins=2500, g0_mhz=0.003, gamma_mhz=0.0018)
    large = EnsembleParams(n_spins=10_000, g0_mhz=0.003, gamma_mhz=0.0018)
    s1 = vacuum_rabi_splitting(STORAGE_CAVITY, small).splitting_mhz
    s2 = vacuum_rabi_splitting(STORAGE_CAVITY, large).splitting_mhz
    assert math.isclose(s2, 2.0 * s1, rel_tol=1e-12)


def test_detuned_splitting_hypot():
    ens = EnsembleParams(n_spins=10_000, g0_mhz=0.003, gamma_mhz=0.0018)
    modes = vacuum_rabi_splitting(STORAGE_CAVITY, ens, spin_freq_mhz=7400.5)
    assert math.isclose(modes.splitting_mhz, math.hypot(0.5, 0.6), rel_tol=1e-12)


def test_far_detuned_modes_approach_bare_frequencies():
    ens = EnsembleParams(n_spins=10_000, g0_mhz=0.003, gamma_mhz=0.0018)
    modes = vacuum_rabi_splitting(STORAGE_CAVITY, ens, spin_freq_mhz=7700.0)
    # Mode pulling is of order g_ens^2 / detuning.
    pull = ens.g_ens_mhz**2 / 300.0
    assert abs(modes.f_lower_mhz - 7400.0) < 2.0 * pull
    assert abs(modes.f_upper_mhz - 7700.0) < 2.0 * pull


# ---------------------------------------------------------------------------
# Input pulses


@pytest.mark.parametrize("kind", ["gaussian", "square"])
def test_pulse_energy_normalized(kind):
    pulse = InputPulse(kind, duration_us=7.3)
    env = pulse.envelope()
    energy, _ = quad(lambda t: env(t) ** 2, 0.0, 7.3, limit=200)
    assert math.isclose(energy, 1.0, rel_tol=1e-9)


def test_pulse_vanishes_outside_window():
    env = InputPulse("gaussian", duration_us=2.0).envelope()
    assert env(-0.1) == 0.0
    assert env(2.1) == 0.0


def test_pulse_validation():
    with pytest.raises(ValueError, match="kind"):
        InputPulse("triangle", duration_us=1.0)
    with pytest.raises(ValueError, match="duration"):
        InputPulse("gaussian", duration_us=0.0)


# ---------------------------------------------------------------------------
# Photon storage


def test_matched_coupling_closed_form():
    expected = 2.0 * STORAGE_ENSEMBLE.g_ens_mhz**2 / 0.5
    assert math.isclose(
        matched_external_coupling(STORAGE_ENSEMBLE), expected, rel_tol=1e-12
    )
    with pytest.raises(ValueError, match="gamma > 0"):
        matched_external_coupling(EnsembleParams(1, 1.0, 0.0))


def test_matched_storage_absorbs_most_of_the_pulse():
    res = photon_storage_sim(
        STORAGE_CAVITY, STORAGE_ENSEMBLE, InputPulse("gaussian", 10.0)
    )
    assert res.kappa_ext_mhz == matched_external_coupling(STORAGE_ENSEMBLE)
    assert res.absorbed_fraction > 0.9
    assert math.isclose(res.absorbed_fraction, 0.959901701, rel_tol=1e-6)
    assert res.energy_balance_error < 1e-6


def test_energy_budget_closes():
    res = photon_storage_sim(
        STORAGE_CAVITY, STORAGE_ENSEMBLE, InputPulse("square", 10.0)
    )
    total = (
        res.absorbed_fraction
        + res.reflected_fraction
        + res.cavity_fraction
        + res.loss_fraction
    )
    assert abs(total - 1.0) < 1e-6
    assert res.energy_balance_error < 1e-6


def test_lorentzian_line_is_matched_exactly():
    # The documented matching condition is exact for a Lorentzian line,
    # so absorption approaches 1 once the pulse is narrow-band enough.
    ens = EnsembleParams(111_000, 0.003, 0.5, distribution="lorentzian")
    res = photon_storage_sim(STORAGE_CAVITY, ens, InputPulse("gaussian", 10.0))
    assert res.absorbed_fraction > 0.99


def test_absorption_monotone_in_cooperativity():
    """Five-point sweep up to the shipped matched configuration."""
    absorbed = []
    for n_spins in (2_000, 8_000, 20_000, 50_000, 111_000):
        ens = EnsembleParams(n_spins, 0.003, 0.5, distribution="lorentzian")
        res = photon_storage_sim(STORAGE_CAVITY, ens, InputPulse("gaussian", 10.0))
        absorbed.append(res.absorbed_fraction)
    assert all(0.0 <= a <= 1.0 for a in absorbed)
    assert all(b > a for a, b in zip(absorbed, absorbed[1:]))


def test_group_count_convergence():
    coarse = photon_storage_sim(
        STORAGE_CAVITY, STORAGE_ENSEMBLE, InputPulse("gaussian", 10.0), m_groups=101
    )
    fine = photon_storage_sim(
        STORAGE_CAVITY, STORAGE_ENSEMBLE, InputPulse("gaussian", 10.0), m_groups=201
    )
    assert abs(coarse.absorbed_fraction - fine.absorbed_fraction) < 1e-6


def test_uncoupled_ensemble_reflects_everything():
    dead = EnsembleParams(n_spins=0, g0_mhz=0.003, gamma_mhz=0.5)
    res = photon_storage_sim(
        STORAGE_CAVITY, dead, InputPulse("gaussian", 10.0), kappa_ext_mhz=3.996
    )
    assert res.absorbed_fraction == 0.0
    # Everything reflects, leaks through the internal loss port, or is
    # still rattling around the cavity at pulse end.
    assert math.isclose(
        res.reflected_fraction + res.loss_fraction + res.cavity_fraction,
        1.0,
        abs_tol=1e-6,
    )
    assert res.reflected_fraction > 0.98


def test_zero_width_line_collapses_to_single_group():
    narrow = EnsembleParams(n_spins=111_000, g0_mhz=0.003, gamma_mhz=0.0)
    res = photon_storage_sim(
        STORAGE_CAVITY, narrow, InputPulse("gaussian", 4.0), kappa_ext_mhz=1.0
    )
    assert res.detunings_mhz.tolist() == [0.0]
    assert res.weights.tolist() == [1.0]


def test_storage_traces_shapes_and_weights():
    res = photon_storage_sim(
        STORAGE_CAVITY, STORAGE_ENSEMBLE, InputPulse("gaussian", 10.0), n_times=301
    )
    assert res.times.shape == (301,)
    assert res.cavity_population.shape == (301,)
    assert math.isclose(res.weights.sum(), 1.0, rel_tol=1e-12)
    assert np.all(np.diff(res.input_energy) >= 0)
    assert math.isclose(res.input_energy[-1], 1.0, rel_tol=1e-6)


def test_storage_validation():
    with pytest.raises(ValueError, match="m_groups"):
        photon_storage_sim(
            STORAGE_CAVITY, STORAGE_ENSEMBLE, InputPulse("gaussian", 1.0), m_groups=0
        )
    with pytest.raises(ValueError, match="kappa_ext_mhz"):
        photon_storage_sim(
            STORAGE_CAVITY,
            STORAGE_ENSEMBLE,
            InputPulse("gaussian", 1.0),
            kappa_ext_mhz=-1.0,
        )
