import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from donorsim.spincore import (
    BENCHMARKS,
    DONORS,
    GAMMA_E_MHZ_PER_T,
    QuadrupoleParams,
    SpinSystem,
    breit_rabi_levels,
    build_static_hamiltonian,
    donor_lookup,
    efg_to_fq,
    esr_frequencies,
    ionized_hamiltonian,
    neutral_hamiltonian,
    quadrupole_hamiltonian,
    registry_from_json,
    registry_to_json,
    spin_operators,
    transition_spectrum,
)

half_integer_spins = st.sampled_from([0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5])


def test_registry_table_values():
    p = DONORS["31P"]
    assert (p.nuclear_spin, p.hyperfine_mhz, p.gamma_n_mhz_per_t) == (0.5, 117.53, 17.26)
    bi = DONORS["209Bi"]
    assert (bi.nuclear_spin, bi.hyperfine_mhz) == (4.5, 1475.4)
    sb = DONORS["123Sb"]
    assert (sb.nuclear_spin, sb.hyperfine_mhz) == (3.5, 101.52)
    assert DONORS["75As"].nuclear_spin == 1.5
    assert DONORS["121Sb"].nuclear_spin == 2.5
    # strain coefficients exist for every species except 123Sb
    assert sb.strain_k is None
    assert {n for n, s in DONORS.items() if s.strain_k is not None} == {
        "31P", "75As", "121Sb", "209Bi",
    }


def test_registry_json_round_trip_exact():
    text = registry_to_json()
    back = registry_from_json(text)
    assert back == DONORS
    # a second serialization is byte-identical (stable ordering)
    assert registry_to_json(back) == text


def test_donor_lookup_error_names_species():
    with pytest.raises(ValueError, match="32P"):
        donor_lookup("32P")


def test_spin_half_iz():
    ops = spin_operators(0.5)
    assert np.allclose(ops.z, np.diag([0.5, -0.5]))


def test_spin_seven_half_tr_iz_squared():
    ops = spin_operators(3.5)
    assert np.trace(ops.z @ ops.z).real == pytest.approx(42.0, abs=1e-12)


@given(half_integer_spins)
def test_commutator_identity(spin):
    ops = spin_operators(spin)
    comm = ops.x @ ops.y - ops.y @ ops.x
    assert np.max(np.abs(comm - 1j * ops.z)) < 1e-12


@given(half_integer_spins)
def test_ladder_relations(spin):
    ops = spin_operators(spin)
    assert np.max(np.abs(ops.plus - (ops.x + 1j * ops.y))) < 1e-12
    assert np.max(np.abs(ops.squared - (ops.x @ ops.x + ops.y @ ops.y + ops.z @ ops.z))) < 1e-12


def test_spin_operators_rejects_bad_spin():
    with pytest.raises(ValueError):
        spin_operators(0.7)
    with pytest.raises(ValueError):
        spin_operators(0.0)


def test_neutral_zero_field_hyperfine_gap():
    # eigenvalues of A*S.I for two spins 1/2: A/4 triplet, -3A/4 singlet
    h = neutral_hamiltonian(DONORS["31P"], 0.0)
    vals = np.sort(np.linalg.eigvalsh(h))
    a = DONORS["31P"].hyperfine_mhz
    assert vals[0] == pytest.approx(-0.75 * a, abs=1e-9)
    assert np.allclose(vals[1:], 0.25 * a, atol=1e-9)


def test_ionized_zeeman_splitting():
    h = ionized_hamiltonian(DONORS["31P"], 1.0)
    vals = np.sort(np.linalg.eigvalsh(h))
    assert vals[1] - vals[0] == pytest.approx(17.26, abs=1e-12)


def test_ionized_quadrupole_diagonal():
    # at eta = 0 the quadrupole term is f_q*(3m^2 - I(I+1)), diagonal in m
    f_q = 0.011
    sb = DONORS["123Sb"]
    h = ionized_hamiltonian(sb, 1.0, quad=QuadrupoleParams(f_q=f_q))
    m = sb.nuclear_spin - np.arange(8)
    zeeman = np.diag(ionized_hamiltonian(sb, 1.0))
    expected = zeeman + f_q * (3 * m**2 - 63.0 / 4.0)
    assert np.max(np.abs(np.diag(h) - expected)) < 1e-12
    assert np.max(np.abs(h - np.diag(np.diag(h)))) == 0.0


@given(
    st.sampled_from([1.5, 2.5, 3.5, 4.5]),
    st.floats(0.0, 1.0),
    st.floats(-0.1, 0.1),
)
def test_quadrupole_traceless_and_hermitian(spin, eta, f_q):
    h = quadrupole_hamiltonian(spin, QuadrupoleParams(f_q=f_q, eta=eta))
    assert abs(np.trace(h)) < 1e-10
    assert np.max(np.abs(h - h.conj().T)) < 1e-12


def test_quadrupole_rejected_for_spin_half():
    with pytest.raises(ValueError):
        quadrupole_hamiltonian(0.5, QuadrupoleParams(f_q=0.01))


def test_efg_to_fq_linear_in_vzz():
    a = efg_to_fq(20.0, 0.2, 1e20, 3.5)
    b = efg_to_fq(20.0, 0.2, 2e20, 3.5)
    assert b == pytest.approx(2 * a, rel=1e-12)
    with pytest.raises(ValueError):
        efg_to_fq(20.0, 0.2, 1e20, 0.5)


def test_esr_lines_31p_against_breit_rabi():
    """Exact diagonalization and the two-level closed form must agree."""
    lines = esr_frequencies(DONORS["31P"], 1.0)
    assert lines.shape == (2,)
    levels = breit_rabi_levels(DONORS["31P"], 1.0)
    # closed-form ESR transitions preserve m_I: the two Sx-allowed gaps
    gaps = np.sort([levels[2] - levels[1], levels[3] - levels[0]])
    assert np.max(np.abs(np.sort(lines) - gaps)) < 1e-9


def test_esr_lines_31p_first_order_positions():
    lines = np.sort(esr_frequencies(DONORS["31P"], 1.0))
    a = DONORS["31P"].hyperfine_mhz
    first_order = np.array([GAMMA_E_MHZ_PER_T - a / 2, GAMMA_E_MHZ_PER_T + a / 2])
    assert np.max(np.abs(lines - first_order)) < 0.3


@given(st.sampled_from(sorted(DONORS)), st.floats(0.5, 3.0))
@settings(max_examples=20, deadline=None)
def test_esr_second_order_shift(name, b0):
    """Principal ESR lines deviate from gamma_e*B0 + A*m_I by the
    flip-flop second-order shift A^2*(I(I+1) - m_I^2)/(2*gamma_e*B0)."""
    sp = DONORS[name]
    a = sp.hyperfine_mhz
    if GAMMA_E_MHZ_PER_T * b0 < 10 * a:
        return
    # threshold 0.05 keeps the 2I+1 principal lines and drops the
    # hyperfine-mixing forbidden ones (intensity ~ (A/2*ge*B0)^2)
    lines = np.sort(esr_frequencies(sp, b0, threshold=0.05))
    m_i = np.sort(sp.nuclear_spin - np.arange(int(2 * sp.nuclear_spin) + 1))
    assert lines.size == m_i.size
    second_order = a**2 * (sp.nuclear_spin * (sp.nuclear_spin + 1) - m_i**2) / (
        2 * GAMMA_E_MHZ_PER_T * b0
    )
    predicted = np.sort(GAMMA_E_MHZ_PER_T * b0 + a * m_i + second_order)
    tol = 0.25 * second_order.max() + 1e-9
    assert np.max(np.abs(lines - predicted)) < tol


def test_ionized_spectrum_single_line():
    h = ionized_hamiltonian(DONORS["31P"], 1.0)
    ops = spin_operators(0.5)
    lines = transition_spectrum(h, ops.x, threshold=1e-6)
    assert len(lines) == 1
    assert lines[0].frequency == pytest.approx(17.26, abs=1e-9)


def test_longitudinal_drive_gives_only_weak_flip_flop():
    # Sz in the near-eigenbasis leaves only the hyperfine-mixed pair,
    # whose intensity is the squared mixing amplitude ~ (A/2B0(ge+gn))^2
    sys = SpinSystem((0.5, 0.5), ("electron", "nucleus"))
    sz = sys.operators(0).z
    h = neutral_hamiltonian(DONORS["31P"], 1.0)
    lines = transition_spectrum(h, sz, threshold=1e-6)
    assert all(line.intensity < 1e-4 for line in lines)
    mixing = DONORS["31P"].hyperfine_mhz / (
        2 * (GAMMA_E_MHZ_PER_T + DONORS["31P"].gamma_n_mhz_per_t)
    )
    flip_flop = [line for line in lines if line.intensity > 1e-6]
    assert len(flip_flop) == 1
    assert flip_flop[0].intensity == pytest.approx(mixing**2, rel=0.01)


def test_spectrum_invariant_under_energy_shift():
    h = neutral_hamiltonian(DONORS["75As"], 0.8)
    sys = SpinSystem((0.5, 1.5), ("electron", "nucleus"))
    sx = sys.operators(0).x
    base = transition_spectrum(h, sx, threshold=1e-3)
    shifted = transition_spectrum(h + 123.456 * np.eye(h.shape[0]), sx, threshold=1e-3)
    assert len(base) == len(shifted)
    for a, b in zip(base, shifted):
        assert a.frequency == pytest.approx(b.frequency, abs=1e-9)
        assert a.intensity == pytest.approx(b.intensity, abs=1e-12)


@given(st.sampled_from(sorted(DONORS)), st.floats(0.0, 2.0), st.booleans())
@settings(max_examples=25, deadline=None)
def test_hamiltonians_hermitian(name, b0, neutral):
    h = build_static_hamiltonian(name, b0, neutral=neutral)
    assert np.max(np.abs(h - h.conj().T)) < 1e-12


def test_benchmark_registry_values():
    e = BENCHMARKS["electron"]
    assert (e.t1_s, e.t2_star_ms, e.t2_hahn_ms, e.t2_cpmg_s) == (9.8, 0.27, 1.1, 0.55)
    assert e.f_measurement == 0.92
    n = BENCHMARKS["31P"]
    assert (n.t2_star_ms, n.t2_hahn_ms) == (0.570, 20.0)
    i = BENCHMARKS["31P+"]
    assert (i.t2_star_ms, i.t2_hahn_ms, i.t2_cpmg_s) == (600.0, 1800.0, 35.6)
