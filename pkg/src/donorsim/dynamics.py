"""Pulse sequences and time evolution for small dense spin systems.

Propagators use the ordinary-frequency convention U = expm(-2j*pi*H*t)
with H in MHz and t in microseconds, matching :mod:`donorsim.spincore`.
Dimensions up to a few tens are handled by dense eigendecomposition;
there is no sparse path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "PulseSegment",
    "PulseSequence",
    "delay",
    "drive",
    "RotatingFrame",
    "QuantumState",
    "QuasiStaticGaussian",
    "PsdTable",
    "LindbladDephasing",
    "Trajectory",
    "propagate_unitary",
    "propagate_lindblad",
    "lindblad_superoperator",
    "run_sequence_ensemble",
    "EnsembleResult",
]

_SEGMENT_KINDS = ("delay", "mw_drive", "rf_drive", "electric_drive")


@dataclass(frozen=True)
class PulseSegment:
    """One piecewise element of a pulse sequence.

    ``amplitude`` is in tesla for magnetic drives (the drive operator
    then carries MHz/T) and in MHz for pre-converted electric drives
    (dimensionless operator); in either case the product
    amplitude * drive_operator must come out in MHz.
    """

    kind: str
    duration: float
    frequency: float = 0.0
    amplitude: float = 0.0
    phase: float = 0.0
    drive_operator: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in _SEGMENT_KINDS:
            raise ValueError(f"unknown segment kind {self.kind!r}; expected one of {_SEGMENT_KINDS}")
        if self.duration < 0:
            raise ValueError(f"segment duration must be non-negative, got {self.duration}")
        if self.kind != "delay":
            if self.drive_operator is None:
                raise ValueError("drive segments require a drive_operator")
            if self.frequency < 0:
                raise ValueError(f"drive frequency must be non-negative, got {self.frequency}")


@dataclass(frozen=True)
class PulseSequence:
    segments: tuple[PulseSegment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def total_duration(self) -> float:
        return sum(seg.duration for seg in self.segments)


def delay(duration: float) -> PulseSegment:
    return PulseSegment("delay", duration)


def drive(
    operator: np.ndarray,
    duration: float,
    frequency: float,
    amplitude: float,
    phase: float = 0.0,
    kind: str = "mw_drive",
) -> PulseSegment:
    return PulseSegment(kind, duration, frequency, amplitude, phase, operator)


@dataclass(frozen=True)
class RotatingFrame:
    """Frame rotating at ``frequency`` (MHz) about ``operator``.

    The operator must commute with the static Hamiltonian; its
    eigenvalue ladder defines which drive matrix elements co-rotate.
    In this frame the rotating-wave approximation is applied: only
    drive components connecting eigenvalue differences of +-1 survive,
    at half the lab-frame amplitude.
    """

    operator: np.ndarray
    frequency: float


class QuantumState:
    """State vector or density matrix with validation helpers."""

    def __init__(self, data: np.ndarray, atol: float = 1e-9):
        arr = np.asarray(data, dtype=complex)
        if arr.ndim == 1:
            norm = np.linalg.norm(arr)
            if abs(norm - 1.0) > atol:
                raise ValueError(f"state vector norm {norm} deviates from 1 beyond {atol}")
            self.vector: np.ndarray | None = arr
            self.matrix = None
        elif arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
            if np.max(np.abs(arr - arr.conj().T)) > atol:
                raise ValueError("density matrix is not Hermitian")
            tr = np.real(np.trace(arr))
            if abs(tr - 1.0) > atol:
                raise ValueError(f"density matrix trace {tr} deviates from 1 beyond {atol}")
            eigs = np.linalg.eigvalsh(arr)
            if eigs.min() < -atol:
                raise ValueError(f"density matrix has negative eigenvalue {eigs.min():.3e}")
            self.vector = None
            self.matrix = arr
        else:
            raise ValueError(f"state must be a vector or square matrix, got shape {arr.shape}")

    @property
    def dim(self) -> int:
        return self.vector.shape[0] if self.vector is not None else self.matrix.shape[0]

    @property
    def is_pure(self) -> bool:
        return self.vector is not None

    def density_matrix(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        return np.outer(self.vector, self.vector.conj())

    def purity(self) -> float:
        p = float(np.real(np.trace(self.density_matrix() @ self.density_matrix())))
        dim = self.dim
        if not (1.0 / dim - 1e-10 <= p <= 1.0 + 1e-10):
            raise ValueError(f"purity {p} outside [1/{dim}, 1]")
        return p


# ---------------------------------------------------------------------------
# Noise models


@dataclass(frozen=True)
class QuasiStaticGaussian:
    """Shot-to-shot Gaussian detuning, standard deviation in MHz."""

    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")


@dataclass(frozen=True)
class PsdTable:
    """One-sided power spectral density of frequency noise.

    ``nu`` in MHz, ``s`` in MHz^2/MHz.  A single-row table is read as a
    delta line carrying total variance ``s[0]`` (MHz^2).
    """

    nu: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        nu = np.atleast_1d(np.asarray(self.nu, dtype=float))
        s = np.atleast_1d(np.asarray(self.s, dtype=float))
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "s", s)
        if nu.shape != s.shape or nu.ndim != 1:
            raise ValueError("nu and s must be 1-d arrays of equal length")
        if not np.all(np.isfinite(nu)) or not np.all(np.isfinite(s)):
            raise ValueError("PSD table contains non-finite entries")
        if np.any(s < 0) or np.any(nu < 0):
            raise ValueError("PSD table entries must be non-negative")
        if len(nu) > 1 and np.any(np.diff(nu) <= 0):
            raise ValueError("PSD frequencies must be strictly increasing")

    def weights(self) -> np.ndarray:
        """Trapezoid integration weights; a single row gets weight 1 so
        that its entry is a total variance."""
        if len(self.nu) == 1:
            return np.ones(1)
        w = np.zeros_like(self.nu)
        dnu = np.diff(self.nu)
        w[0] = dnu[0] / 2
        w[-1] = dnu[-1] / 2
        w[1:-1] = (dnu[:-1] + dnu[1:]) / 2
        return w


@dataclass(frozen=True)
class LindbladDephasing:
    """Markovian dephasing: rate (1/us) times the standard dissipator of
    ``jump_operator``."""

    rate: float
    jump_operator: np.ndarray

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"dephasing rate must be non-negative, got {self.rate}")


# ---------------------------------------------------------------------------
# Propagation


@dataclass
class Trajectory:
    """Sampled time evolution; ``states`` holds vectors (n_t, d) for
    unitary runs or density matrices (n_t, d, d) for Lindblad runs.
    States are expressed in the frame the run used."""

    times: np.ndarray
    states: np.ndarray
    frame: str = "lab"

    def expectation(self, op: np.ndarray) -> np.ndarray:
        if self.states.ndim == 2:
            return np.real(np.einsum("ti,ij,tj->t", self.states.conj(), op, self.states))
        return np.real(np.einsum("tij,ji->t", self.states, op))

    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _step_unitaries(h_batch: np.ndarray, dt: float) -> np.ndarray:
    """expm(-2j*pi*H*dt) for a stack of Hermitian matrices."""
    w, v = np.linalg.eigh(h_batch)
    phase = np.exp(-2j * np.pi * w * dt)
    return np.einsum("...ij,...j,...kj->...ik", v, phase, v.conj())


def _check_frame(h0: np.ndarray, frame: RotatingFrame) -> tuple[np.ndarray, np.ndarray]:
    z = frame.operator
    if z.shape != h0.shape:
        raise ValueError(f"frame operator shape {z.shape} does not match H0 {h0.shape}")
    comm = h0 @ z - z @ h0
    scale = max(np.max(np.abs(h0)), 1.0)
    if np.max(np.abs(comm)) > 1e-9 * scale:
        raise ValueError("frame operator must commute with the static Hamiltonian")
    z_diag = np.diag(z)
    if np.max(np.abs(z - np.diag(z_diag))) > 1e-12:
        # Work in the eigenbasis of the frame operator.
        zvals, basis = np.linalg.eigh(z)
    else:
        zvals, basis = np.real(z_diag).copy(), np.eye(z.shape[0], dtype=complex)
    return np.real(zvals), basis


def _rwa_coupling(v: np.ndarray, zvals: np.ndarray) -> np.ndarray:
    """Co-rotating (raising) part of a drive operator: matrix elements
    connecting frame-operator eigenvalues that differ by +1."""
    dz = zvals[:, None] - zvals[None, :]
    return np.where(np.abs(dz - 1.0) < 1e-6, v, 0.0)


def _segment_hamiltonians(
    h0: np.ndarray,
    seg: PulseSegment,
    frame: RotatingFrame | None,
    zvals: np.ndarray | None,
    dt_max: float,
) -> tuple[np.ndarray, float, int]:
    """Stack of piecewise-constant Hamiltonians covering one segment.

    Returns (h_stack, dt, n_steps); a length-1 stack with n_steps > 1
    marks a segment that is time-independent once framed.  Midpoint
    sampling of the carrier makes each slice second-order accurate.
    """
    if seg.duration == 0:
        return np.empty((0,) + h0.shape, dtype=complex), 0.0, 0
    n = max(1, int(np.ceil(seg.duration / dt_max)))
    dt = seg.duration / n
    if frame is None:
        if seg.kind == "delay":
            return h0[None, :, :], dt, n
        if seg.frequency > 0 and dt_max > 1.0 / seg.frequency:
            raise ValueError(
                f"dt_max={dt_max} exceeds the drive period {1.0 / seg.frequency}; "
                "lab-frame integration cannot resolve the carrier"
            )
        t_mid = (np.arange(n) + 0.5) * dt
        carrier = seg.amplitude * np.cos(2 * np.pi * seg.frequency * t_mid + seg.phase)
        v = np.asarray(seg.drive_operator, dtype=complex)
        if v.shape != h0.shape:
            raise ValueError(f"drive operator shape {v.shape} does not match H0 {h0.shape}")
        return h0[None, :, :] + carrier[:, None, None] * v[None, :, :], dt, n

    # Rotating frame at frame.frequency about the frame operator.
    h_static = h0 - frame.frequency * np.diag(zvals).astype(complex)
    if seg.kind == "delay":
        return h_static[None, :, :], dt, n
    v = np.asarray(seg.drive_operator, dtype=complex)
    if v.shape != h0.shape:
        raise ValueError(f"drive operator shape {v.shape} does not match H0 {h0.shape}")
    v_plus = _rwa_coupling(v, zvals)
    delta = seg.frequency - frame.frequency
    if delta == 0.0:
        term = 0.5 * seg.amplitude * np.exp(-1j * seg.phase) * v_plus
        return (h_static + term + term.conj().T)[None, :, :], dt, n
    t_mid = (np.arange(n) + 0.5) * dt
    rot = np.exp(-1j * (2 * np.pi * delta * t_mid + seg.phase))
    term = 0.5 * seg.amplitude * rot[:, None, None] * v_plus[None, :, :]
    return h_static[None, :, :] + term + term.conj().transpose(0, 2, 1), dt, n


def _propagate_state_batch(
    h0_batch: np.ndarray,
    sequence: PulseSequence,
    psi_batch: np.ndarray,
    frame: RotatingFrame | None,
    dt_max: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Propagate a batch of pure states under a shared pulse sequence.

    ``h0_batch`` has shape (B, d, d) and ``psi_batch`` (B, d); each batch
    member may carry a different static Hamiltonian (ensemble detunings)
    but shares segment timing.  Returns (times, states) with states of
    shape (n_t, B, d) including the initial state.
    """
    b, dim = psi_batch.shape
    zvals = None
    rotated = False
    if frame is not None:
        zvals, basis = _check_frame(h0_batch[0], frame)
        rotated = np.max(np.abs(basis - np.eye(dim))) > 1e-12
        if rotated:
            h0_batch = np.einsum("ij,bjk,kl->bil", basis.conj().T, h0_batch, basis)
            psi_batch = psi_batch @ basis.conj()
            sequence = PulseSequence(
                tuple(
                    seg
                    if seg.drive_operator is None
                    else PulseSegment(
                        seg.kind,
                        seg.duration,
                        seg.frequency,
                        seg.amplitude,
                        seg.phase,
                        basis.conj().T @ np.asarray(seg.drive_operator, dtype=complex) @ basis,
                    )
                    for seg in sequence.segments
                )
            )
    offsets = h0_batch - h0_batch[0][None, :, :]
    uniform = bool(np.max(np.abs(offsets)) == 0.0) if b > 1 else True
    times = [0.0]
    states = [psi_batch.copy()]
    t0 = 0.0
    for seg in sequence.segments:
        if seg.duration == 0:
            continue
        h_slices, dt, n = _segment_hamiltonians(h0_batch[0], seg, frame, zvals, dt_max)
        psi = states[-1]
        if len(h_slices) == 1:
            # Time-independent segment: one decomposition, reused steps.
            if uniform:
                u = _step_unitaries(h_slices[0], dt)
                for _ in range(n):
                    psi = psi @ u.T
                    t0 += dt
                    times.append(t0)
                    states.append(psi)
            else:
                u = _step_unitaries(h_slices[0][None, :, :] + offsets, dt)
                for _ in range(n):
                    psi = np.einsum("bij,bj->bi", u, psi)
                    t0 += dt
                    times.append(t0)
                    states.append(psi)
        elif uniform:
            # Diagonalize slice Hamiltonians in chunks to amortize the
            # batched eigh while bounding memory.
            chunk = max(1, int(2**22 // (dim * dim * 16)))
            for start in range(0, n, chunk):
                u = _step_unitaries(h_slices[start : start + chunk], dt)
                for k in range(u.shape[0]):
                    psi = psi @ u[k].T
                    t0 += dt
                    times.append(t0)
                    states.append(psi)
        else:
            for k in range(n):
                u = _step_unitaries(h_slices[k][None, :, :] + offsets, dt)
                psi = np.einsum("bij,bj->bi", u, psi)
                t0 += dt
                times.append(t0)
                states.append(psi)
    if rotated:
        states = [s @ basis.T for s in states]
    return np.asarray(times), np.asarray(states)


def propagate_unitary(
    h0: np.ndarray,
    sequence: PulseSequence | Sequence[PulseSegment],
    state: np.ndarray | QuantumState,
    frame: RotatingFrame | None = None,
    dt_max: float = 0.01,
) -> Trajectory:
    """Evolve a pure state through a pulse sequence.

    In the lab frame the full cosine carrier is integrated with
    midpoint-sampled piecewise-constant slices no longer than
    ``dt_max``.  With a :class:`RotatingFrame` the co-rotating part of
    each drive is kept (amplitude halved) and delays evolve under
    H0 - f*Z; returned states are expressed in that frame.
    """
    if dt_max <= 0:
        raise ValueError(f"dt_max must be positive, got {dt_max}")
    if not isinstance(sequence, PulseSequence):
        sequence = PulseSequence(tuple(sequence))
    psi = state.vector if isinstance(state, QuantumState) else np.asarray(state, dtype=complex)
    if psi is None or psi.ndim != 1:
        raise ValueError("propagate_unitary requires a pure state vector")
    if psi.shape[0] != h0.shape[0]:
        raise ValueError(f"state dim {psi.shape[0]} does not match H0 dim {h0.shape[0]}")
    times, states = _propagate_state_batch(
        h0[None, :, :], sequence, psi[None, :], frame, dt_max
    )
    return Trajectory(times, states[:, 0, :], frame="rotating" if frame else "lab")


def _dissipator_superop(noise: LindbladDephasing, dim: int) -> np.ndarray:
    """Row-major superoperator of rate * D[L]."""
    l_op = np.asarray(noise.jump_operator, dtype=complex)
    if l_op.shape != (dim, dim):
        raise ValueError(f"jump operator shape {l_op.shape} does not match dimension {dim}")
    eye = np.eye(dim)
    ll = l_op.conj().T @ l_op
    sup = np.kron(l_op, l_op.conj())
    sup -= 0.5 * (np.kron(ll, eye) + np.kron(eye, ll.T))
    return noise.rate * sup


def _hamiltonian_superop(h: np.ndarray) -> np.ndarray:
    eye = np.eye(h.shape[0])
    return -2j * np.pi * (np.kron(h, eye) - np.kron(eye, h.T))


def lindblad_superoperator(
    h: np.ndarray, noises: Sequence[LindbladDephasing] = ()
) -> np.ndarray:
    """Generator of the master equation acting on row-major vectorized
    density matrices: ``d vec(rho)/dt = G vec(rho)``.

    Exposed so other modules can exponentiate time-independent channels
    directly instead of stepping through :func:`propagate_lindblad`.
    """
    gen = _hamiltonian_superop(np.asarray(h, dtype=complex))
    for noise in noises:
        gen = gen + _dissipator_superop(noise, h.shape[0])
    return gen


def propagate_lindblad(
    h0: np.ndarray,
    sequence: PulseSequence | Sequence[PulseSegment],
    state: np.ndarray | QuantumState,
    noise: LindbladDephasing,
    dt_max: float = 0.01,
) -> Trajectory:
    """Evolve a density matrix under the lab-frame master equation

        drho/dt = -2j*pi*[H(t), rho] + rate * D[L] rho.

    Accepts a pure state or a density matrix; always returns density
    matrices.  Trace is preserved exactly by construction of each
    exponential step.
    """
    if dt_max <= 0:
        raise ValueError(f"dt_max must be positive, got {dt_max}")
    if not isinstance(sequence, PulseSequence):
        sequence = PulseSequence(tuple(sequence))
    if isinstance(state, QuantumState):
        rho = state.density_matrix()
    else:
        arr = np.asarray(state, dtype=complex)
        rho = np.outer(arr, arr.conj()) if arr.ndim == 1 else arr
    dim = h0.shape[0]
    if rho.shape != (dim, dim):
        raise ValueError(f"state shape {rho.shape} does not match H0 dim {dim}")
    diss = _dissipator_superop(noise, dim)

    times = [0.0]
    rhos = [rho.copy()]
    vec = rho.reshape(-1)
    t0 = 0.0
    for seg in sequence.segments:
        if seg.duration == 0:
            continue
        h_slices, dt, n = _segment_hamiltonians(h0, seg, None, None, dt_max)
        step = None
        if len(h_slices) == 1:
            step = scipy.linalg.expm((_hamiltonian_superop(h_slices[0]) + diss) * dt)
        for k in range(n):
            if step is not None:
                vec = step @ vec
            else:
                gen = _hamiltonian_superop(h_slices[k]) + diss
                vec = scipy.linalg.expm(gen * dt) @ vec
            t0 += dt
            times.append(t0)
            rhos.append(vec.reshape(dim, dim))
    return Trajectory(np.asarray(times), np.asarray(rhos), frame="lab")


# ---------------------------------------------------------------------------
# Quasi-static ensembles


@dataclass
class EnsembleResult:
    times: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    n_samples: int

    @property
    def sem(self) -> np.ndarray:
        return self.std / np.sqrt(self.n_samples)


def run_sequence_ensemble(
    h0: np.ndarray,
    sequence: PulseSequence | Sequence[PulseSegment],
    state: np.ndarray | QuantumState,
    noise: QuasiStaticGaussian,
    noise_operator: np.ndarray,
    observables: Sequence[np.ndarray],
    n_samples: int = 1000,
    seed: int = 0,
    frame: RotatingFrame | None = None,
    dt_max: float = 0.01,
) -> EnsembleResult:
    """Average observables over shot-to-shot Gaussian detunings.

    Each sample evolves under H0 + delta * noise_operator with delta
    drawn once per shot; all draws come from a single generator seeded
    by ``seed``, so results are reproducible and independent of any
    execution partitioning.  ``mean``/``std`` have shape
    (n_observables, n_times).
    """
    if not isinstance(sequence, PulseSequence):
        sequence = PulseSequence(tuple(sequence))
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    psi = state.vector if isinstance(state, QuantumState) else np.asarray(state, dtype=complex)
    if psi is None or psi.ndim != 1:
        raise ValueError("ensemble propagation requires a pure state vector")
    rng = np.random.default_rng(seed)
    deltas = rng.normal(0.0, noise.sigma, size=n_samples) if noise.sigma > 0 else np.zeros(n_samples)
    if np.max(np.abs(noise_operator - noise_operator.conj().T)) > 1e-10:
        raise ValueError("noise operator must be Hermitian")
    h_batch = h0[None, :, :] + deltas[:, None, None] * noise_operator[None, :, :]
    psi_batch = np.broadcast_to(psi, (n_samples, psi.shape[0])).copy()
    times, states = _propagate_state_batch(h_batch, sequence, psi_batch, frame, dt_max)
    # states: (n_t, B, d) -> expectation (n_obs, n_t, B)
    means = []
    stds = []
    for op in observables:
        vals = np.real(np.einsum("tbi,ij,tbj->tb", states.conj(), op, states))
        means.append(vals.mean(axis=1))
        stds.append(vals.std(axis=1))
    return EnsembleResult(times, np.asarray(means), np.asarray(stds), n_samples)
