"""Spin operators, donor parameter registry, and static donor Hamiltonians.

Unit conventions used throughout the package:

* Hamiltonians are expressed in ordinary frequency units (MHz), so the
  propagator over a time ``t`` in microseconds is ``expm(-2j*pi*H*t)``.
* Magnetic fields are in tesla, gyromagnetic ratios in MHz/T.
* The electron gyromagnetic ratio defaults to 28000 MHz/T and is
  configurable where it enters.

Tensor-product ordering is electron first, then nucleus; for two-donor
systems donor 1 precedes donor 2 (see :class:`SpinSystem`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

__all__ = [
    "GAMMA_E_MHZ_PER_T",
    "KB_MHZ_PER_K",
    "DonorSpecies",
    "DONORS",
    "Benchmarks",
    "BENCHMARKS",
    "donor_lookup",
    "SpinOperators",
    "spin_operators",
    "SpinSystem",
    "QuadrupoleParams",
    "efg_to_fq",
    "quadrupole_hamiltonian",
    "neutral_hamiltonian",
    "ionized_hamiltonian",
    "build_static_hamiltonian",
    "SpectrumLine",
    "transition_spectrum",
    "breit_rabi_levels",
    "esr_frequencies",
    "registry_to_json",
    "registry_from_json",
]

# Free-electron value rounded to the precision used for all derived numbers.
GAMMA_E_MHZ_PER_T = 28000.0

# Planck and Boltzmann constants (SI), used for unit conversions only.
_H_PLANCK = 6.62607015e-34
_K_BOLTZMANN = 1.380649e-23
_E_CHARGE = 1.602176634e-19

# Thermal energy scale in the package's frequency units.
KB_MHZ_PER_K = _K_BOLTZMANN / _H_PLANCK / 1e6


@dataclass(frozen=True)
class DonorSpecies:
    """Static parameters of one group-V donor in silicon.

    Attributes
    ----------
    name:
        Isotope label, e.g. ``"31P"``.
    nuclear_spin:
        Nuclear spin quantum number I (half-integer).
    hyperfine_mhz:
        Contact hyperfine coupling A in MHz.
    gamma_n_mhz_per_t:
        Nuclear gyromagnetic ratio in MHz/T (positive magnitude).
    quadrupole_moment_range:
        Electric quadrupole moment in units of 1e-28 m^2, stored as the
        published (first, second) bounds; equal entries for a single
        value, ``None`` for spin-1/2 where no moment exists.
    strain_k:
        Hyperfine strain-response coefficient K (1/strain), ``None`` when
        no published value exists for the isotope.
    dnu_da_low, dnu_da_high:
        |dnu/dA| sensitivity of the tracked transition to a hyperfine
        change, at low and high magnetic field (dimensionless), ``None``
        when not available.
    """

    name: str
    nuclear_spin: float
    hyperfine_mhz: float
    gamma_n_mhz_per_t: float
    quadrupole_moment_range: tuple[float, float] | None
    strain_k: float | None
    dnu_da_low: float | None
    dnu_da_high: float | None

    def __post_init__(self):
        two_i = 2 * self.nuclear_spin
        if abs(two_i - round(two_i)) > 1e-12 or round(two_i) % 2 == 0:
            raise ValueError(f"nuclear spin must be half-odd-integer, got {self.nuclear_spin}")

    @property
    def quadrupole_moment_mid(self) -> float | None:
        """Midpoint of the published quadrupole-moment bounds."""
        if self.quadrupole_moment_range is None:
            return None
        lo, hi = self.quadrupole_moment_range
        return 0.5 * (lo + hi)

    @property
    def dim_neutral(self) -> int:
        return int(2 * (2 * self.nuclear_spin + 1))

    @property
    def dim_ionized(self) -> int:
        return int(2 * self.nuclear_spin + 1)


DONORS: dict[str, DonorSpecies] = {
    "31P": DonorSpecies("31P", 0.5, 117.53, 17.26, None, 79.2, 1.0, 0.5),
    "75As": DonorSpecies("75As", 1.5, 198.35, 7.31, (0.314, 0.314), 37.4, 2.0, 1.5),
    "121Sb": DonorSpecies("121Sb", 2.5, 186.80, 10.26, (-0.36, -0.54), 32.8, 3.0, 2.5),
    "123Sb": DonorSpecies("123Sb", 3.5, 101.52, 5.55, (-0.49, -0.69), None, None, None),
    "209Bi": DonorSpecies("209Bi", 4.5, 1475.4, 6.96, (-0.37, -0.77), 19.1, 5.0, 4.5),
}


@dataclass(frozen=True)
class Benchmarks:
    """Demonstrated single-qubit figures of merit for one qubit flavour.

    Times are stored in the units their name declares; ``None`` marks
    entries with no published number (or only a bound).
    """

    t1_s: float | None
    t2_star_ms: float
    t2_hahn_ms: float
    t2_cpmg_s: float
    pi_pulse_us: float
    f_measurement: float
    f_clifford: float | None


BENCHMARKS: dict[str, Benchmarks] = {
    # Electron bound to a 31P donor.
    "electron": Benchmarks(9.8, 0.27, 1.1, 0.55, 0.15, 0.92, 0.9994),
    # 31P nucleus with the donor electron present (T1 only bounded, > 100 s).
    "31P": Benchmarks(None, 0.570, 20.0, 0.02, 25.0, 0.998, None),
    # 31P nucleus of the ionized donor.
    "31P+": Benchmarks(None, 600.0, 1800.0, 35.6, 30.0, 0.998, 0.9998),
}


def donor_lookup(name: str) -> DonorSpecies:
    """Return the registry entry for ``name`` or raise ``ValueError``."""
    try:
        return DONORS[name]
    except KeyError:
        known = ", ".join(sorted(DONORS))
        raise ValueError(f"unknown donor species {name!r}; known species: {known}") from None


# ---------------------------------------------------------------------------
# Spin operators


@dataclass(frozen=True)
class SpinOperators:
    """Cartesian and ladder operators for a single spin."""

    spin: float
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    plus: np.ndarray
    minus: np.ndarray

    @property
    def dim(self) -> int:
        return self.z.shape[0]

    @property
    def squared(self) -> np.ndarray:
        """Total spin operator I^2 = I(I+1) * identity."""
        s = self.spin
        return s * (s + 1) * np.eye(self.dim)


def spin_operators(spin: float) -> SpinOperators:
    """Build spin matrices for quantum number ``spin``.

    The basis is ordered by decreasing magnetic quantum number,
    m = spin, spin-1, ..., -spin.  ``spin`` must be a positive multiple
    of 1/2.
    """
    two_s = 2 * spin
    if abs(two_s - round(two_s)) > 1e-12 or round(two_s) < 1:
        raise ValueError(f"spin must be a positive multiple of 1/2, got {spin}")
    dim = int(round(two_s)) + 1
    m = spin - np.arange(dim)
    z = np.diag(m).astype(complex)
    # <m+1| S+ |m> = sqrt(s(s+1) - m(m+1)); basis index k holds m = spin - k.
    ladder = np.sqrt(spin * (spin + 1) - m[1:] * (m[1:] + 1))
    plus = np.zeros((dim, dim), dtype=complex)
    plus[np.arange(dim - 1), np.arange(1, dim)] = ladder
    minus = plus.conj().T
    x = 0.5 * (plus + minus)
    y = -0.5j * (plus - minus)
    return SpinOperators(spin, x, y, z, plus, minus)


@dataclass(frozen=True)
class SpinSystem:
    """Ordered tensor product of spins; electron before nucleus, donor 1
    before donor 2."""

    spins: tuple[float, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.spins) != len(self.labels):
            raise ValueError("spins and labels must have equal length")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(int(round(2 * s)) + 1 for s in self.spins)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def embed(self, index: int, op: np.ndarray) -> np.ndarray:
        """Lift a single-spin operator to the full product space."""
        dims = self.dims
        if op.shape != (dims[index], dims[index]):
            raise ValueError(
                f"operator shape {op.shape} does not match factor {index} (dim {dims[index]})"
            )
        out = np.eye(1, dtype=complex)
        for k, d in enumerate(dims):
            out = np.kron(out, op if k == index else np.eye(d))
        return out

    def operators(self, index: int) -> SpinOperators:
        """Spin operators of factor ``index`` embedded in the full space."""
        ops = spin_operators(self.spins[index])
        return SpinOperators(
            ops.spin,
            self.embed(index, ops.x),
            self.embed(index, ops.y),
            self.embed(index, ops.z),
            self.embed(index, ops.plus),
            self.embed(index, ops.minus),
        )


# ---------------------------------------------------------------------------
# Hamiltonians


@dataclass(frozen=True)
class QuadrupoleParams:
    """Nuclear quadrupole interaction, parameterized by the composite
    prefactor ``f_q`` (MHz) and the asymmetry ``eta``.

    The interaction reads f_q * (3*Iz^2 - I^2 + eta*(Ix^2 - Iy^2)); the
    adjacent transition spacing at eta = 0 is 6*f_q.
    """

    f_q: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"asymmetry eta must lie in [0, 1], got {self.eta}")


def efg_to_fq(gamma_s: float, q_moment: float, v_zz: float, spin: float) -> float:
    """Convert an electric-field-gradient amplitude to the quadrupole
    prefactor f_q in MHz.

    Parameters
    ----------
    gamma_s:
        Dimensionless gradient prefactor of the lattice response.
    q_moment:
        Nuclear quadrupole moment in units of 1e-28 m^2.
    v_zz:
        Field gradient along the principal axis, V/m^2.
    spin:
        Nuclear spin quantum number (must exceed 1/2).
    """
    if spin <= 0.5:
        raise ValueError("quadrupole coupling requires nuclear spin > 1/2")
    denom = 4 * spin * (2 * spin - 1) * _H_PLANCK
    return gamma_s * _E_CHARGE * (q_moment * 1e-28) * v_zz / denom * 1e-6


def quadrupole_hamiltonian(spin: float, quad: QuadrupoleParams) -> np.ndarray:
    """Quadrupole Hamiltonian on the nuclear space, in MHz."""
    if quad.f_q != 0.0 and spin <= 0.5:
        raise ValueError("nonzero f_q is invalid for spin 1/2 (no quadrupole moment)")
    ops = spin_operators(spin)
    h = 3 * ops.z @ ops.z - ops.squared
    if quad.eta != 0.0:
        h = h + quad.eta * (ops.x @ ops.x - ops.y @ ops.y)
    return quad.f_q * h


def neutral_hamiltonian(
    species: DonorSpecies,
    b0: float,
    quad: QuadrupoleParams | None = None,
    gamma_e: float = GAMMA_E_MHZ_PER_T,
    hyperfine_mhz: float | None = None,
) -> np.ndarray:
    """Static Hamiltonian of the neutral donor (electron + nucleus), MHz.

    H = (gamma_e*Sz - gamma_n*Iz)*B0 + A S.I + H_Q, on the
    electron (x) nucleus product space.
    """
    if b0 < 0:
        raise ValueError(f"b0 must be non-negative, got {b0}")
    a = species.hyperfine_mhz if hyperfine_mhz is None else hyperfine_mhz
    system = SpinSystem((0.5, species.nuclear_spin), ("electron", "nucleus"))
    s_ops = system.operators(0)
    i_ops = system.operators(1)
    h = b0 * (gamma_e * s_ops.z - species.gamma_n_mhz_per_t * i_ops.z)
    h = h + a * (s_ops.x @ i_ops.x + s_ops.y @ i_ops.y + s_ops.z @ i_ops.z)
    if quad is not None and quad.f_q != 0.0:
        h = h + system.embed(1, quadrupole_hamiltonian(species.nuclear_spin, quad))
    return h


def ionized_hamiltonian(
    species: DonorSpecies,
    b0: float,
    quad: QuadrupoleParams | None = None,
) -> np.ndarray:
    """Static Hamiltonian of the ionized donor (bare nucleus), MHz."""
    if b0 < 0:
        raise ValueError(f"b0 must be non-negative, got {b0}")
    ops = spin_operators(species.nuclear_spin)
    h = -species.gamma_n_mhz_per_t * b0 * ops.z
    if quad is not None and quad.f_q != 0.0:
        h = h + quadrupole_hamiltonian(species.nuclear_spin, quad)
    return h


def build_static_hamiltonian(
    species: DonorSpecies | str,
    b0: float,
    neutral: bool = True,
    quad: QuadrupoleParams | None = None,
    gamma_e: float = GAMMA_E_MHZ_PER_T,
) -> np.ndarray:
    """Dispatch to the neutral or ionized donor Hamiltonian."""
    if isinstance(species, str):
        species = donor_lookup(species)
    if neutral:
        return neutral_hamiltonian(species, b0, quad=quad, gamma_e=gamma_e)
    return ionized_hamiltonian(species, b0, quad=quad)


def assert_hermitian(h: np.ndarray, tol: float = 1e-10) -> None:
    dev = np.max(np.abs(h - h.conj().T))
    if dev > tol:
        raise ValueError(f"matrix is not Hermitian (max deviation {dev:.3e})")


# ---------------------------------------------------------------------------
# Transition spectra


@dataclass(frozen=True)
class SpectrumLine:
    """One resolved transition.

    ``frequency`` is the eigenvalue difference magnitude (MHz),
    ``intensity`` the squared drive matrix element summed over merged
    degenerate pairs.  ``level_i``/``level_f`` index eigenstates in
    ascending-energy order.  ``delta_m`` is the change of the labelling
    quantum number when one was assignable, ``label`` an optional
    human-readable tag used by higher-level spectra.
    """

    frequency: float
    intensity: float
    level_i: int
    level_f: int
    delta_m: int | None = None
    label: str | None = None


def _assign_quantum_numbers(vectors: np.ndarray, label_op: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("in,ij,jn->n", vectors.conj(), label_op, vectors))


def transition_spectrum(
    h: np.ndarray,
    drive: np.ndarray,
    threshold: float = 1e-6,
    merge_tol: float = 1e-9,
    label_op: np.ndarray | None = None,
) -> list[SpectrumLine]:
    """All transition lines of ``h`` visible under ``drive``.

    Every eigenpair with squared drive matrix element above
    ``threshold`` contributes a line; lines closer than ``merge_tol``
    in frequency are merged with intensities summed.  Returned sorted
    by frequency.
    """
    if h.shape != drive.shape or h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"shape mismatch: h {h.shape} vs drive {drive.shape}")
    assert_hermitian(h)
    assert_hermitian(drive)
    energies, vectors = np.linalg.eigh(h)
    d_eig = vectors.conj().T @ drive @ vectors
    intensity = np.abs(d_eig) ** 2
    q = None
    if label_op is not None:
        q = _assign_quantum_numbers(vectors, label_op)

    raw: list[SpectrumLine] = []
    n = h.shape[0]
    for i in range(n):
        for f in range(i + 1, n):
            if intensity[f, i] <= threshold:
                continue
            delta_m = None
            if q is not None:
                dq = q[f] - q[i]
                if abs(dq - round(dq)) < 0.25:
                    delta_m = int(round(dq))
            raw.append(
                SpectrumLine(abs(energies[f] - energies[i]), intensity[f, i], i, f, delta_m)
            )
    raw.sort(key=lambda line: line.frequency)

    merged: list[SpectrumLine] = []
    for line in raw:
        if merged and line.frequency - merged[-1].frequency < merge_tol:
            prev = merged[-1]
            merged[-1] = SpectrumLine(
                prev.frequency,
                prev.intensity + line.intensity,
                prev.level_i,
                prev.level_f,
                prev.delta_m if prev.delta_m == line.delta_m else None,
                prev.label,
            )
        else:
            merged.append(line)
    return merged


# ---------------------------------------------------------------------------
# Closed-form level structure for S = 1/2 coupled to arbitrary I


def breit_rabi_levels(
    species: DonorSpecies,
    b0: float,
    gamma_e: float = GAMMA_E_MHZ_PER_T,
) -> np.ndarray:
    """Exact eigenvalues (MHz, ascending) of the neutral donor without
    quadrupole coupling, from the closed-form solution for an
    electron coupled to a spin-I nucleus.

    Serves as an independent oracle for the matrix diagonalization.
    Each two-dimensional block of fixed m = m_S + m_I gives the doublet

        E(m) = -A/4 - gamma_n*B0*m +- (A*(I+1/2)/2)*sqrt(1 + 4*m*x/(2I+1) + x^2)

    with x = (gamma_e + gamma_n)*B0 / (A*(I+1/2)); the stretched states
    are field-linear.
    """
    i_spin = species.nuclear_spin
    a = species.hyperfine_mhz
    gamma_n = species.gamma_n_mhz_per_t
    x = (gamma_e + gamma_n) * b0 / (a * (i_spin + 0.5))

    levels = [
        a * i_spin / 2 + (gamma_e / 2 - gamma_n * i_spin) * b0,
        a * i_spin / 2 - (gamma_e / 2 - gamma_n * i_spin) * b0,
    ]
    for m in np.arange(-(i_spin - 0.5), i_spin):
        root = np.sqrt(1 + 4 * m * x / (2 * i_spin + 1) + x * x)
        base = -a / 4 - gamma_n * b0 * m
        half = a * (i_spin + 0.5) / 2
        levels.extend([base + half * root, base - half * root])
    return np.sort(np.asarray(levels))


def esr_frequencies(
    species: DonorSpecies,
    b0: float,
    gamma_e: float = GAMMA_E_MHZ_PER_T,
    threshold: float = 1e-3,
) -> np.ndarray:
    """Electron resonance line frequencies (MHz, ascending) of the
    neutral donor, from full diagonalization."""
    h = neutral_hamiltonian(species, b0, gamma_e=gamma_e)
    system = SpinSystem((0.5, species.nuclear_spin), ("electron", "nucleus"))
    lines = transition_spectrum(h, system.operators(0).x, threshold=threshold)
    return np.asarray([line.frequency for line in lines])


# ---------------------------------------------------------------------------
# Registry serialization


def registry_to_json(donors: dict[str, DonorSpecies] | None = None) -> str:
    """Serialize the species registry (coupling and strain tables) to JSON."""
    donors = DONORS if donors is None else donors
    payload = {name: asdict(sp) for name, sp in donors.items()}
    return json.dumps(payload, sort_keys=True, indent=2)


def registry_from_json(text: str) -> dict[str, DonorSpecies]:
    """Inverse of :func:`registry_to_json`."""
    payload = json.loads(text)
    out = {}
    for name, fields in payload.items():
        rng = fields["quadrupole_moment_range"]
        fields["quadrupole_moment_range"] = tuple(rng) if rng is not None else None
        out[name] = DonorSpecies(**fields)
    return out
