"""Exchange-coupled donor pairs and the electron-nuclear flip-flop qubit.

Covers the two natural two-qubit encodings: conditional rotations (CROT)
on a weakly exchange-coupled pair of donor electrons, and electrically
driven flip-flop qubits coupled by their charge dipoles.  All couplings
are in MHz, fields in tesla, distances in nanometres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.linalg import expm

from .dynamics import (
    LindbladDephasing,
    PulseSequence,
    RotatingFrame,
    _propagate_state_batch,
    drive,
    lindblad_superoperator,
)
from .spincore import (
    DONORS,
    GAMMA_E_MHZ_PER_T,
    DonorSpecies,
    SpectrumLine,
    SpinSystem,
    neutral_hamiltonian,
)

__all__ = [
    "TwoDonorParams",
    "two_donor_system",
    "two_donor_hamiltonian",
    "crot_spectrum",
    "CrotGateResult",
    "crot_gate",
    "FlipFlopParams",
    "flipflop_splitting",
    "flipflop_subspace_gap",
    "flipflop_dipole_coupling",
    "edsr_rabi",
    "EdsrResult",
    "ISWAP",
    "SQRT_ISWAP",
    "XyGateResult",
    "xy_gate",
    "ClockPoint",
    "find_flipflop_clock_points",
]


# ---------------------------------------------------------------------------
# Two-donor exchange system


@dataclass(frozen=True)
class TwoDonorParams:
    """Pair of hyperfine-coupled donors with isotropic exchange ``j_mhz``.

    Site-specific hyperfine values default to the registry value of each
    species; they differ in real devices through local strain and
    electric fields.
    """

    species1: DonorSpecies
    species2: DonorSpecies
    j_mhz: float
    b0_t: float
    a1_mhz: float | None = None
    a2_mhz: float | None = None
    gamma_e_mhz_per_t: float = GAMMA_E_MHZ_PER_T

    def __post_init__(self) -> None:
        if self.j_mhz < 0:
            raise ValueError("exchange coupling j_mhz must be non-negative")

    @property
    def a1(self) -> float:
        return self.species1.hyperfine_mhz if self.a1_mhz is None else self.a1_mhz

    @property
    def a2(self) -> float:
        return self.species2.hyperfine_mhz if self.a2_mhz is None else self.a2_mhz


def two_donor_system(params: TwoDonorParams) -> SpinSystem:
    return SpinSystem(
        (0.5, params.species1.nuclear_spin, 0.5, params.species2.nuclear_spin),
        ("electron1", "nucleus1", "electron2", "nucleus2"),
    )


def _dot(a, b) -> np.ndarray:
    return a.x @ b.x + a.y @ b.y + a.z @ b.z


def two_donor_hamiltonian(params: TwoDonorParams) -> np.ndarray:
    """Static Hamiltonian of the donor pair in MHz.

    Electron Zeeman terms add, nuclear Zeeman terms subtract (opposite
    sign of gyromagnetic ratio), each donor keeps its contact hyperfine
    coupling, and the electrons share an isotropic exchange term.
    """
    sys = two_donor_system(params)
    s1, i1 = sys.operators(0), sys.operators(1)
    s2, i2 = sys.operators(2), sys.operators(3)
    h = params.gamma_e_mhz_per_t * params.b0_t * (s1.z + s2.z)
    h = h - params.b0_t * (
        params.species1.gamma_n_mhz_per_t * i1.z
        + params.species2.gamma_n_mhz_per_t * i2.z
    )
    h = h + params.a1 * _dot(s1, i1) + params.a2 * _dot(s2, i2)
    h = h + params.j_mhz * _dot(s1, s2)
    return h


def _rounded_projection(value: float) -> float:
    return round(2.0 * value) / 2.0


def _sharp_nuclear_eigenbasis(
    h: np.ndarray, i1z: np.ndarray, i2z: np.ndarray, tol: float = 0.02
) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition with degenerate clusters rotated onto product
    nuclear states.

    Identical donors leave swapped nuclear configurations degenerate up
    to couplings orders of magnitude below the level spacing, so ``eigh``
    returns arbitrary hybrids whose per-nucleus projections average away
    and defeat any labelling by nuclear configuration.  Within each
    cluster of eigenvalues closer than ``tol`` (MHz) the basis is rotated
    to diagonalize ``I1z + sqrt(2) I2z``, whose spectrum separates every
    projection pair, restoring sharp labels while moving no energy by
    more than the cluster width.  ``tol`` must stay well below the
    secular level spacings (of order ``gamma_n * B0``); at fields so low
    that swap-hybrid splittings reach that scale the conditional or
    unconditional character of a line is physically washed out anyway.
    """
    energies, vectors = np.linalg.eigh(h)
    tag = i1z + math.sqrt(2.0) * i2z
    n = energies.size
    start = 0
    for stop in range(1, n + 1):
        if stop < n and energies[stop] - energies[stop - 1] < tol:
            continue
        if stop - start > 1:
            block = vectors[:, start:stop]
            sub = block.conj().T @ tag @ block
            _, rot = np.linalg.eigh(0.5 * (sub + sub.conj().T))
            vectors[:, start:stop] = block @ rot
        start = stop
    return energies, vectors


def crot_spectrum(
    params: TwoDonorParams,
    threshold: float = 1e-3,
    merge_tol: float = 0.05,
) -> list[SpectrumLine]:
    """Electron resonance lines of the pair under a uniform transverse drive.

    Every eigenstate pair with squared matrix element of ``S1x + S2x``
    above ``threshold`` contributes; lines within ``merge_tol`` MHz are
    merged.  Each line is labelled ``conditional`` when the two nuclear
    projections of the participating states differ (the frequency then
    depends on the partner electron, producing pairs split by the
    exchange), ``unconditional`` when the nuclei are parallel, and
    ``mixed`` when merging combined both characters, as happens when the
    exchange vanishes.
    """
    h = two_donor_hamiltonian(params)
    sys = two_donor_system(params)
    drive_op = sys.operators(0).x + sys.operators(2).x
    energies, vectors = _sharp_nuclear_eigenbasis(
        h, sys.operators(1).z, sys.operators(3).z
    )
    elem = np.abs(vectors.conj().T @ drive_op @ vectors) ** 2

    def expect(op: np.ndarray) -> np.ndarray:
        return np.real(np.einsum("in,ij,jn->n", vectors.conj(), op, vectors))

    m_n1 = expect(sys.operators(1).z)
    m_n2 = expect(sys.operators(3).z)
    m_e = expect(sys.operators(0).z + sys.operators(2).z)

    raw: list[tuple[float, float, int, int, str]] = []
    n = h.shape[0]
    for i in range(n):
        for f in range(i + 1, n):
            if elem[f, i] <= threshold:
                continue
            parallel = _rounded_projection(m_n1[i]) == _rounded_projection(m_n2[i])
            label = "unconditional" if parallel else "conditional"
            raw.append((energies[f] - energies[i], elem[f, i], i, f, label))
    raw.sort(key=lambda r: r[0])

    lines: list[SpectrumLine] = []
    for freq, inten, i, f, label in raw:
        if lines and freq - lines[-1].frequency < merge_tol:
            prev = lines[-1]
            lines[-1] = SpectrumLine(
                prev.frequency,
                prev.intensity + inten,
                prev.level_i,
                prev.level_f,
                prev.delta_m,
                prev.label if prev.label == label else "mixed",
            )
        else:
            dm = m_e[f] - m_e[i]
            delta_m = int(round(dm)) if abs(dm - round(dm)) < 0.25 else None
            lines.append(SpectrumLine(freq, inten, i, f, delta_m, label))
    return lines


@dataclass
class CrotGateResult:
    """Outcome of a resonant conditional-rotation pulse.

    ``matrix`` is the 4x4 propagator on the two-electron computational
    subspace (nuclei frozen in the configuration addressed by the target
    line), taken in the interaction picture of the static Hamiltonian
    and ordered |dd>, |du>, |ud>, |uu>.  ``fidelity`` is the average gate
    fidelity against the ideal conditional pi rotation (-iX on the
    addressed control state) after optimizing one phase per qubit;
    ``leakage`` is the population lost from the subspace.
    """

    matrix: np.ndarray
    fidelity: float
    leakage: float
    line: SpectrumLine
    target_qubit: int
    control_qubit: int
    control_state: str
    amplitude_mhz: float
    duration_us: float


def _phase_optimized_fidelity(m: np.ndarray, v: np.ndarray) -> float:
    """Average gate fidelity max over single-qubit z phases.

    Works on possibly non-unitary ``m`` (leakage-reduced subspace
    propagator): F = (tr(M^dag M) + |tr(V^dag Z M)|^2) / 20.
    """
    d = np.diag(m @ v.conj().T)

    def neg_overlap(x: np.ndarray) -> float:
        alpha, beta = x
        tr = (
            d[0]
            + d[1] * np.exp(1j * beta)
            + d[2] * np.exp(1j * alpha)
            + d[3] * np.exp(1j * (alpha + beta))
        )
        return -abs(tr) ** 2

    starts = [(0.0, 0.0), (np.pi, np.pi)]
    if abs(d[0]) > 1e-12:
        starts.append(
            (-float(np.angle(d[2] / d[0])), -float(np.angle(d[1] / d[0])))
        )
    best = -min(
        optimize.minimize(neg_overlap, s, method="Nelder-Mead").fun for s in starts
    )
    return float((np.trace(m.conj().T @ m).real + best) / 20.0)


def crot_gate(
    params: TwoDonorParams,
    target_line: SpectrumLine | float,
    rabi_mhz: float,
    duration_us: float | None = None,
    threshold: float = 1e-3,
) -> CrotGateResult:
    """Simulate a resonant pulse on one conditional line of the pair.

    The drive amplitude is calibrated so the addressed transition flops
    at ``rabi_mhz``; the default duration is the corresponding pi time.
    The full 16-dimensional Hamiltonian is evolved in the frame rotating
    at the line frequency (co-rotating drive term only), so selectivity
    against the exchange-split partner line and all other transitions is
    captured.  ``target_line`` may be a line from :func:`crot_spectrum`
    or a bare frequency in MHz.
    """
    if rabi_mhz <= 0:
        raise ValueError("rabi_mhz must be positive")
    h = two_donor_hamiltonian(params)
    sys = two_donor_system(params)
    drive_op = sys.operators(0).x + sys.operators(2).x
    energies, vectors = _sharp_nuclear_eigenbasis(
        h, sys.operators(1).z, sys.operators(3).z
    )
    elem = vectors.conj().T @ drive_op @ vectors

    want = (
        target_line.frequency
        if isinstance(target_line, SpectrumLine)
        else float(target_line)
    )
    best = None
    n = h.shape[0]
    for i in range(n):
        for f in range(i + 1, n):
            if np.abs(elem[f, i]) ** 2 <= threshold:
                continue
            freq = energies[f] - energies[i]
            if abs(freq - want) > 0.5:
                continue
            if best is None or np.abs(elem[f, i]) > np.abs(elem[best[0], best[1]]):
                best = (f, i)
    if best is None:
        raise ValueError(f"no drivable transition within 0.5 MHz of {want} MHz")
    lvl_f, lvl_i = best
    frequency = float(energies[lvl_f] - energies[lvl_i])

    def expect(op: np.ndarray, idx: np.ndarray | int) -> np.ndarray:
        col = vectors[:, idx]
        return np.real(np.einsum("i...,ij,j...->...", col.conj(), op, col))

    s1z, s2z = sys.operators(0).z, sys.operators(2).z
    i1z, i2z = sys.operators(1).z, sys.operators(3).z
    m1 = _rounded_projection(float(expect(i1z, lvl_i)))
    m2 = _rounded_projection(float(expect(i2z, lvl_i)))

    # Computational subspace: the four eigenstates sharing the target
    # line's nuclear configuration, ordered |dd>, |du>, |ud>, |uu>.
    all_m1 = np.array([_rounded_projection(v) for v in expect(i1z, np.arange(n))])
    all_m2 = np.array([_rounded_projection(v) for v in expect(i2z, np.arange(n))])
    members = np.flatnonzero((all_m1 == m1) & (all_m2 == m2))
    if members.size != 4:
        raise ValueError(
            "could not isolate a frozen-nuclei electron subspace; "
            f"found {members.size} matching levels"
        )
    s1 = expect(s1z, members)
    s2 = expect(s2z, members)
    order = members[np.lexsort((s2, s1))]  # dd, du, ud, uu
    basis = vectors[:, order]

    pos_i = int(np.flatnonzero(order == lvl_i)[0])
    pos_f = int(np.flatnonzero(order == lvl_f)[0])
    flips_q1 = {pos_i, pos_f} in ({0, 2}, {1, 3})
    target_qubit = 0 if flips_q1 else 1
    control_qubit = 1 - target_qubit
    control_up = (pos_i in (1, 3)) if flips_q1 else (pos_i in (2, 3))

    ideal = np.eye(4, dtype=complex)
    ideal[pos_i, pos_i] = ideal[pos_f, pos_f] = 0.0
    ideal[pos_i, pos_f] = ideal[pos_f, pos_i] = -1j

    amplitude = rabi_mhz / float(np.abs(elem[lvl_f, lvl_i]))
    if duration_us is None:
        duration_us = 1.0 / (2.0 * rabi_mhz)

    if duration_us == 0:
        matrix = np.eye(4, dtype=complex)
    else:
        z_total = s1z + i1z + s2z + i2z
        frame = RotatingFrame(z_total, frequency)
        seq = PulseSequence(
            (drive(drive_op, duration_us, frequency, amplitude),)
        )
        h_batch = np.broadcast_to(h, (4,) + h.shape)
        _, states = _propagate_state_batch(
            h_batch, seq, basis.T.copy(), frame, dt_max=duration_us
        )
        final = states[-1].T  # columns follow the basis columns
        # Interaction picture of the framed static Hamiltonian: remove
        # the deterministic phase evolution of every level.
        k = h - frequency * z_total
        kvals, kvecs = np.linalg.eigh(k)
        undo = (kvecs * np.exp(2j * np.pi * kvals * duration_us)) @ kvecs.conj().T
        matrix = basis.conj().T @ undo @ final

    fidelity = _phase_optimized_fidelity(matrix, ideal)
    leakage = float(1.0 - np.trace(matrix.conj().T @ matrix).real / 4.0)
    line = SpectrumLine(
        frequency,
        float(np.abs(elem[lvl_f, lvl_i]) ** 2),
        lvl_i,
        lvl_f,
        None,
        "conditional" if m1 != m2 else "unconditional",
    )
    return CrotGateResult(
        matrix=matrix,
        fidelity=fidelity,
        leakage=leakage,
        line=line,
        target_qubit=target_qubit,
        control_qubit=control_qubit,
        control_state="up" if control_up else "down",
        amplitude_mhz=amplitude,
        duration_us=duration_us,
    )


# ---------------------------------------------------------------------------
# Flip-flop qubit


@dataclass(frozen=True)
class FlipFlopParams:
    """Electron-nuclear flip-flop qubit of a single donor.

    ``a_eff_mhz`` is the electrically tuned hyperfine coupling (at most
    the registry value; vertical electric fields only reduce it).  The
    transverse gyromagnetic sum defaults to the species value.  Dipole
    coupling between two such qubits is parameterized by a reference
    strength at a reference distance and falls off with the cube of the
    separation.
    """

    species: DonorSpecies = DONORS["31P"]
    a_eff_mhz: float = 117.53
    b0_t: float = 0.4
    gamma_plus_mhz_per_t: float | None = None
    da_de_mhz_per_v_m: float | None = None
    r_nm: float = 200.0
    g_ref_mhz: float = 10.0
    r_ref_nm: float = 200.0
    gamma_e_mhz_per_t: float = GAMMA_E_MHZ_PER_T

    def __post_init__(self) -> None:
        if not 0.0 < self.a_eff_mhz <= self.species.hyperfine_mhz:
            raise ValueError(
                "a_eff_mhz must lie in (0, species hyperfine] = "
                f"(0, {self.species.hyperfine_mhz}]"
            )
        if self.r_nm <= 0 or self.r_ref_nm <= 0:
            raise ValueError("distances must be positive")
        if self.g_ref_mhz < 0:
            raise ValueError("g_ref_mhz must be non-negative")

    @property
    def gamma_plus(self) -> float:
        if self.gamma_plus_mhz_per_t is not None:
            return self.gamma_plus_mhz_per_t
        return self.gamma_e_mhz_per_t + self.species.gamma_n_mhz_per_t


def flipflop_splitting(params: FlipFlopParams) -> float:
    """Energy splitting of the |up,Down>/|down,Up> doublet in MHz.

    Closed form sqrt((gamma_plus * B0)**2 + A_eff**2); agrees with the
    zero-total-projection gap of the full donor Hamiltonian exactly (the
    two-dimensional block diagonalizes in closed form).
    """
    return math.hypot(params.gamma_plus * params.b0_t, params.a_eff_mhz)


def flipflop_subspace_gap(params: FlipFlopParams) -> float:
    """Flip-flop gap extracted from the full neutral-donor Hamiltonian.

    Numerical cross-check for :func:`flipflop_splitting`: diagonalizes a
    spin-1/2-nucleus donor with the effective hyperfine value (the
    flip-flop encoding lives in one hyperfine doublet) and measures the
    gap between the two eigenstates of zero total spin projection.
    """
    gamma_n = params.gamma_plus - params.gamma_e_mhz_per_t
    species = DonorSpecies(
        name=params.species.name,
        nuclear_spin=0.5,
        hyperfine_mhz=params.a_eff_mhz,
        gamma_n_mhz_per_t=gamma_n,
        quadrupole_moment_range=None,
        strain_k=None,
        dnu_da_low=None,
        dnu_da_high=None,
    )
    h = neutral_hamiltonian(species, params.b0_t, gamma_e=params.gamma_e_mhz_per_t)
    sys = SpinSystem((0.5, 0.5), ("electron", "nucleus"))
    z_total = sys.operators(0).z + sys.operators(1).z
    energies, vectors = np.linalg.eigh(h)
    proj = np.real(np.einsum("in,ij,jn->n", vectors.conj(), z_total, vectors))
    zero = np.flatnonzero(np.abs(proj) < 0.25)
    if zero.size != 2:
        raise RuntimeError("expected exactly two zero-projection levels")
    return float(energies[zero[1]] - energies[zero[0]])


def flipflop_dipole_coupling(
    r_nm: float, g_ref_mhz: float = 10.0, r_ref_nm: float = 200.0
) -> float:
    """Electric-dipole coupling between two flip-flop qubits, MHz.

    Scales with the inverse cube of the separation from a reference
    strength; defaults give 10 MHz at 200 nm.
    """
    if r_nm <= 0:
        raise ValueError("separation must be positive")
    return g_ref_mhz * (r_ref_nm / r_nm) ** 3


@dataclass(frozen=True)
class EdsrResult:
    f_rabi_mhz: float
    pi_time_us: float


def edsr_rabi(params: FlipFlopParams, e_ac_v_per_m: float) -> EdsrResult:
    """Electrically driven flip-flop Rabi frequency.

    Modulating the hyperfine coupling drives the flip-flop transition;
    only the component transverse to the qubit axis rotates the state,
    giving f_Rabi = (dA/dE * E_ac / 2) * (gamma_plus * B0 / splitting).
    The pi time 1/(2 f_Rabi) is the single-qubit gate time.
    """
    if params.da_de_mhz_per_v_m is None:
        raise ValueError("params.da_de_mhz_per_v_m is required for electric driving")
    eps = flipflop_splitting(params)
    projection = params.gamma_plus * params.b0_t / eps
    f_rabi = abs(params.da_de_mhz_per_v_m * e_ac_v_per_m) / 2.0 * projection
    pi_time = math.inf if f_rabi == 0 else 1.0 / (2.0 * f_rabi)
    return EdsrResult(f_rabi_mhz=f_rabi, pi_time_us=pi_time)


# ---------------------------------------------------------------------------
# XY (iSWAP-family) gates between flip-flop qubits

# Propagator convention exp(-2j*pi*H*t) puts -i on the swapped
# amplitudes; the +i convention is the adjoint of these constants.
ISWAP = np.array(
    [
        [1, 0, 0, 0],
        [0, 0, -1j, 0],
        [0, -1j, 0, 0],
        [0, 0, 0, 1],
    ],
    dtype=complex,
)

_R = 1.0 / math.sqrt(2.0)
SQRT_ISWAP = np.array(
    [
        [1, 0, 0, 0],
        [0, _R, -1j * _R, 0],
        [0, -1j * _R, _R, 0],
        [0, 0, 0, 1],
    ],
    dtype=complex,
)

_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass
class XyGateResult:
    """Transverse-exchange evolution and its overlap with the root-iSWAP.

    ``unitary`` is set for coherent evolution; with dephasing the
    row-major channel superoperator is returned instead and the fidelity
    is the average channel fidelity.
    """

    fidelity_sqrt_iswap: float
    duration_us: float
    coupling_mhz: float
    unitary: np.ndarray | None = None
    channel: np.ndarray | None = None


def xy_gate(
    g_mhz: float, t_us: float, dephasing_rate_per_us: float = 0.0
) -> XyGateResult:
    """Evolve two qubits under H = (g/2)(XX + YY) for time ``t_us``.

    ``g_mhz`` is the single off-diagonal element coupling |du> and |ud>,
    so the evolution reaches iSWAP at t = 1/(4g) and its square root at
    t = 1/(8g).  Optional pure dephasing acts independently on each
    qubit at the given rate.
    """
    if g_mhz <= 0:
        raise ValueError("coupling g_mhz must be positive")
    if t_us < 0:
        raise ValueError("duration must be non-negative")
    h = 0.5 * g_mhz * (np.kron(_PAULI_X, _PAULI_X) + np.kron(_PAULI_Y, _PAULI_Y))

    if dephasing_rate_per_us == 0.0:
        angle = 2.0 * np.pi * g_mhz * t_us
        u = np.eye(4, dtype=complex)
        u[1, 1] = u[2, 2] = math.cos(angle)
        u[1, 2] = u[2, 1] = -1j * math.sin(angle)
        overlap = np.abs(np.trace(SQRT_ISWAP.conj().T @ u)) ** 2
        fidelity = float((4.0 + overlap) / 20.0)
        return XyGateResult(
            fidelity_sqrt_iswap=fidelity,
            duration_us=t_us,
            coupling_mhz=g_mhz,
            unitary=u,
        )

    noises = [
        LindbladDephasing(dephasing_rate_per_us, np.kron(_PAULI_Z, np.eye(2))),
        LindbladDephasing(dephasing_rate_per_us, np.kron(np.eye(2), _PAULI_Z)),
    ]
    gen = lindblad_superoperator(h, noises)
    channel = expm(gen * t_us)
    target = np.kron(SQRT_ISWAP, SQRT_ISWAP.conj())
    f_ent = np.trace(target.conj().T @ channel).real / 16.0
    f_avg = float((4.0 * f_ent + 1.0) / 5.0)
    return XyGateResult(
        fidelity_sqrt_iswap=f_avg,
        duration_us=t_us,
        coupling_mhz=g_mhz,
        channel=channel,
    )


# ---------------------------------------------------------------------------
# Clock points of an electrically tunable splitting


@dataclass(frozen=True)
class ClockPoint:
    """Stationary point of the flip-flop splitting versus electric field."""

    e_field: float
    splitting_mhz: float
    second_derivative: float
    order: int  # 1: d(eps)/dE = 0; 2: second derivative also vanishes


def find_flipflop_clock_points(
    a_eff_curve,
    e_grid: np.ndarray,
    b0_t: float,
    gamma_plus_mhz_per_t: float,
    second_order_tol: float = 1e-6,
) -> list[ClockPoint]:
    """Locate fields where the flip-flop splitting is first-order
    insensitive to the electric field.

    ``a_eff_curve`` maps electric field (user units) to the effective
    hyperfine coupling in MHz.  The splitting derivative is scanned on
    ``e_grid`` with central differences; each sign change is refined by
    root bracketing.  A point is second order when the curvature is
    below ``second_order_tol`` (per field-unit squared, relative to the
    local splitting).
    """
    e_grid = np.asarray(e_grid, dtype=float)
    if e_grid.size < 3:
        raise ValueError("e_grid needs at least three points")

    zb = gamma_plus_mhz_per_t * b0_t

    def eps(e: float) -> float:
        return math.hypot(zb, float(a_eff_curve(e)))

    h = np.min(np.diff(e_grid)) * 1e-3

    def deriv(e: float) -> float:
        return (eps(e + h) - eps(e - h)) / (2.0 * h)

    d_vals = np.array([deriv(e) for e in e_grid])
    points: list[ClockPoint] = []
    for k in range(e_grid.size - 1):
        if d_vals[k] == 0.0:
            root = float(e_grid[k])
        elif d_vals[k] * d_vals[k + 1] < 0.0:
            root = float(optimize.brentq(deriv, e_grid[k], e_grid[k + 1]))
        else:
            continue
        curvature = (deriv(root + h) - deriv(root - h)) / (2.0 * h)
        value = eps(root)
        order = 2 if abs(curvature) < second_order_tol * value else 1
        points.append(ClockPoint(root, value, curvature, order))
    return points
