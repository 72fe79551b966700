import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from donorsim.dynamics import (
    LindbladDephasing,
    PsdTable,
    PulseSegment,
    QuantumState,
    QuasiStaticGaussian,
    RotatingFrame,
    delay,
    drive,
    propagate_lindblad,
    propagate_unitary,
    run_sequence_ensemble,
)
from donorsim.spincore import spin_operators

OPS = spin_operators(0.5)
UP = np.array([1.0, 0.0], dtype=complex)


def test_norm_preserved_under_lab_drive():
    h0 = 10.0 * OPS.z
    seq = [drive(OPS.x, duration=3.0, frequency=10.0, amplitude=0.2)]
    traj = propagate_unitary(h0, seq, UP, dt_max=0.002)
    norms = np.linalg.norm(traj.states, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-9


def test_lab_and_rotating_agree_for_weak_resonant_drive():
    """A pi pulse computed with the full cosine carrier matches the
    rotating-wave result once the drive is weak (amp << carrier)."""
    f0, amp = 10.0, 0.08
    h0 = f0 * OPS.z
    t_pi = 1.0 / amp
    seq = [drive(OPS.x, duration=t_pi, frequency=f0, amplitude=amp)]
    lab = propagate_unitary(h0, seq, UP, dt_max=0.002)
    rot = propagate_unitary(
        h0, seq, UP, frame=RotatingFrame(operator=OPS.z, frequency=f0), dt_max=0.05
    )
    p_lab = abs(lab.final_state()[1]) ** 2
    p_rot = abs(rot.final_state()[1]) ** 2
    assert p_rot > 0.9999
    assert abs(p_lab - p_rot) < 1e-3


def test_lab_frame_rejects_coarse_dt():
    seq = [drive(OPS.x, duration=1.0, frequency=10.0, amplitude=0.1)]
    with pytest.raises(ValueError, match="dt_max"):
        propagate_unitary(10.0 * OPS.z, seq, UP, dt_max=0.5)


def test_dt_max_must_be_positive():
    with pytest.raises(ValueError, match="dt_max"):
        propagate_unitary(OPS.z, [delay(1.0)], UP, dt_max=0.0)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError, match="dim"):
        propagate_unitary(np.eye(4), [delay(1.0)], UP)


def test_drive_requires_operator():
    with pytest.raises(ValueError, match="drive_operator"):
        PulseSegment(kind="mw_drive", duration=1.0, frequency=5.0, amplitude=0.1)


def test_negative_duration_rejected():
    with pytest.raises(ValueError, match="duration"):
        delay(-1.0)


def test_lindblad_zero_rate_matches_unitary():
    h0 = 5.0 * OPS.z + 0.3 * OPS.x
    seq = [delay(4.0)]
    uni = propagate_unitary(h0, seq, UP, dt_max=0.01)
    lin = propagate_lindblad(h0, seq, UP, LindbladDephasing(0.0, OPS.z), dt_max=0.01)
    rho_uni = np.outer(uni.final_state(), uni.final_state().conj())
    assert np.max(np.abs(lin.final_state() - rho_uni)) < 1e-9


def test_lindblad_coherence_decay_analytic():
    """Free dephasing of a spin-1/2 superposition: with jump operator Sz
    the off-diagonal decays as exp(-rate*t/2)."""
    rate = 0.3
    plus = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
    traj = propagate_lindblad(
        np.zeros((2, 2)), [delay(6.0)], plus, LindbladDephasing(rate, OPS.z), dt_max=0.05
    )
    coh = np.abs(traj.states[:, 0, 1])
    expected = 0.5 * np.exp(-rate * traj.times / 2)
    assert np.max(np.abs(coh - expected)) < 1e-6


def test_lindblad_negative_rate_rejected():
    with pytest.raises(ValueError, match="rate"):
        LindbladDephasing(-0.1, OPS.z)


@given(st.floats(0.0, 1.0), st.floats(0.0, 8.0))
@settings(max_examples=15, deadline=None)
def test_lindblad_trace_and_hermiticity(rate, t_total):
    h0 = 3.0 * OPS.z + 0.5 * OPS.x
    traj = propagate_lindblad(
        h0, [delay(t_total)], UP, LindbladDephasing(rate, OPS.z), dt_max=0.1
    )
    rho = traj.final_state()
    assert abs(np.trace(rho).real - 1.0) < 1e-9
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-9


def test_lindblad_purity_non_increasing_in_eigenbasis():
    # H diagonal in the jump operator's basis: pure dephasing only
    h0 = 4.0 * OPS.z
    plus = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
    traj = propagate_lindblad(
        h0, [delay(5.0)], plus, LindbladDephasing(0.4, OPS.z), dt_max=0.05
    )
    purity = np.real(np.einsum("kij,kji->k", traj.states, traj.states))
    assert np.all(np.diff(purity) < 1e-12)


def test_ensemble_sigma_zero_equals_single_run():
    h0 = 2.0 * OPS.z
    seq = [delay(3.0)]
    plus = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
    res = run_sequence_ensemble(
        h0, seq, plus, QuasiStaticGaussian(0.0), OPS.z, [OPS.x], n_samples=1
    )
    single = propagate_unitary(h0, seq, plus, dt_max=0.01)
    sx = np.real(
        np.einsum("ki,ij,kj->k", single.states.conj(), np.asarray(OPS.x), single.states)
    )
    assert np.max(np.abs(res.mean[0] - sx)) < 1e-12


def test_ensemble_deterministic_given_seed():
    h0 = 2.0 * OPS.z
    plus = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
    kwargs = dict(n_samples=200, seed=7)
    a = run_sequence_ensemble(
        h0, [delay(2.0)], plus, QuasiStaticGaussian(0.1), OPS.z, [OPS.x], **kwargs
    )
    b = run_sequence_ensemble(
        h0, [delay(2.0)], plus, QuasiStaticGaussian(0.1), OPS.z, [OPS.x], **kwargs
    )
    assert np.array_equal(a.mean, b.mean)
    assert np.array_equal(a.std, b.std)


def test_ensemble_rejects_empty_sampling():
    plus = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
    with pytest.raises(ValueError):
        run_sequence_ensemble(
            2.0 * OPS.z, [delay(1.0)], plus, QuasiStaticGaussian(0.1), OPS.z, [OPS.x],
            n_samples=0,
        )


def test_psd_single_row_is_total_variance():
    table = PsdTable(nu=[0.5], s=[0.04])
    assert np.array_equal(table.weights(), [1.0])


@given(
    st.lists(st.floats(1e-4, 10.0), min_size=2, max_size=12, unique=True).map(sorted)
)
def test_psd_weights_sum_to_span(nus):
    nus = np.asarray(nus)
    table = PsdTable(nu=nus, s=np.ones_like(nus))
    assert np.sum(table.weights()) == pytest.approx(nus[-1] - nus[0], rel=1e-12)


def test_psd_validation():
    with pytest.raises(ValueError):
        PsdTable(nu=[0.1, 0.2], s=[-1.0, 0.0])
    with pytest.raises(ValueError):
        PsdTable(nu=[0.1, 0.2], s=[1.0])
    with pytest.raises(ValueError):
        QuasiStaticGaussian(-0.5)


def test_quantum_state_validation():
    with pytest.raises(ValueError, match="norm"):
        QuantumState(np.array([1.0, 1.0]))
    with pytest.raises(ValueError, match="Hermitian"):
        QuantumState(np.array([[0.5, 1.0], [0.0, 0.5]]))
    with pytest.raises(ValueError, match="trace"):
        QuantumState(np.diag([0.9, 0.9]))
    ok = QuantumState(np.diag([0.5, 0.5]))
    assert ok.matrix is not None
