"""Periodically driven top: classical chaos and its quantum fingerprints.

A spin with a static twist about z, a quadratic torsion along x, and a
sinusoidal transverse drive is the minimal driven top.  Classically its
phase space is mixed: regular islands coexist with a chaotic sea.  The
quantum version of the same Hamiltonian cannot have positive Lyapunov
exponents, but coupling to a dephasing environment makes the distinction
visible again: states launched in classically chaotic regions lose
purity faster than states on regular islands.

Units follow the package convention (MHz, microseconds); the classical
angular momentum has fixed length ``l_norm`` and the quantum operators
are the usual spin matrices, so matched comparisons use
``l_norm = spin``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .spincore import spin_operators

__all__ = [
    "TopParams",
    "DEFAULT_TOP",
    "REGULAR_POINT",
    "CHAOTIC_POINT",
    "ClassicalTrajectory",
    "classical_trajectory",
    "poincare_map",
    "lyapunov_exponent",
    "lyapunov_map",
    "direction_angles",
    "angles_to_direction",
    "spin_coherent_state",
    "one_period_propagator",
    "one_period_channel",
    "QuantumStroboscopic",
    "quantum_stroboscopic",
    "PurityMap",
    "purity_map",
]


@dataclass(frozen=True)
class TopParams:
    """Driven-top coefficients, all in MHz.

    The Hamiltonian is ``c1*Lz + c2*Lx**2 + cd*cos(2*pi*nu*t)*Ly`` with
    ``c2`` per unit squared angular momentum, so the same numbers serve
    the classical top (|L| = ``l_norm``) and the quantum spin (operators
    of a spin ``l_norm``).
    """

    c1_mhz: float
    c2_mhz: float
    cd_mhz: float
    nu_mhz: float
    l_norm: float = 1.0

    def __post_init__(self) -> None:
        if self.nu_mhz <= 0:
            raise ValueError("drive frequency nu_mhz must be positive")
        if self.l_norm <= 0:
            raise ValueError("l_norm must be positive")

    @property
    def period_us(self) -> float:
        return 1.0 / self.nu_mhz

    def with_l_norm(self, l_norm: float) -> "TopParams":
        return TopParams(self.c1_mhz, self.c2_mhz, self.cd_mhz, self.nu_mhz, l_norm)


# Shipped configuration with a mixed phase space: the chaotic sea
# covers the north cap and the equatorial band, a single regular island
# sits around the -z pole.  l_norm = 4.5 so the classical map and the
# spin-9/2 quantum map describe the same top.  Found by scanning
# Lyapunov exponents on grids of initial directions
# (scripts/explore_chaos.py); the two reference points below are used by
# the regular-versus-chaotic purity comparison.
DEFAULT_TOP = TopParams(c1_mhz=1.0, c2_mhz=0.2, cd_mhz=0.3, nu_mhz=1.0, l_norm=4.5)

# (theta, phi) launch directions for DEFAULT_TOP: deep in the south
# island (Lyapunov exponent at the estimator floor, ~0.008/us) and deep
# in the sea (~0.93/us).
REGULAR_POINT = (2.9, 0.0)
CHAOTIC_POINT = (1.0, 3.0)


# ---------------------------------------------------------------------------
# Classical trajectories


def _torque(params: TopParams, l_vec: np.ndarray, t: float) -> np.ndarray:
    """Right-hand side 2*pi * dH/dL x L for a batch of L vectors."""
    grad = np.zeros_like(l_vec)
    grad[..., 0] = 2.0 * params.c2_mhz * l_vec[..., 0]
    grad[..., 1] = params.cd_mhz * math.cos(2.0 * math.pi * params.nu_mhz * t)
    grad[..., 2] = params.c1_mhz
    return 2.0 * math.pi * np.cross(grad, l_vec)


def _rk4_batch(
    params: TopParams,
    l_vec: np.ndarray,
    t0: float,
    n_steps: int,
    h: float,
    record: bool,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Advance a batch of unit-sphere points by ``n_steps`` RK4 steps.

    The length is restored after every step; the drift of a fixed-step
    RK4 is tiny but would otherwise accumulate over thousands of
    periods.
    """
    out = np.empty((n_steps, *l_vec.shape)) if record else None
    t = t0
    for k in range(n_steps):
        k1 = _torque(params, l_vec, t)
        k2 = _torque(params, l_vec + 0.5 * h * k1, t + 0.5 * h)
        k3 = _torque(params, l_vec + 0.5 * h * k2, t + 0.5 * h)
        k4 = _torque(params, l_vec + h * k3, t + h)
        l_vec = l_vec + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        norm = np.linalg.norm(l_vec, axis=-1, keepdims=True)
        l_vec = l_vec * (params.l_norm / norm)
        t = t0 + (k + 1) * h
        if record:
            out[k] = l_vec
    return l_vec, out


@dataclass
class ClassicalTrajectory:
    times: np.ndarray
    points: np.ndarray  # (n_times, 3)
    strobe_times: np.ndarray
    strobes: np.ndarray  # (n_periods + 1, 3)


def classical_trajectory(
    params: TopParams,
    l0: np.ndarray,
    n_periods: int,
    steps_per_period: int = 256,
) -> ClassicalTrajectory:
    """Integrate one driven-top trajectory and its Poincare samples.

    ``l0`` is scaled to length ``l_norm``; stroboscopic points are taken
    once per drive period, which is the natural section of the
    periodically driven flow.
    """
    if n_periods < 1 or steps_per_period < 1:
        raise ValueError("n_periods and steps_per_period must be positive")
    l0 = np.asarray(l0, dtype=float)
    if l0.shape != (3,) or not np.linalg.norm(l0) > 0:
        raise ValueError("l0 must be a nonzero 3-vector")
    l0 = l0 * (params.l_norm / np.linalg.norm(l0))

    h = params.period_us / steps_per_period
    n_total = n_periods * steps_per_period
    _, rec = _rk4_batch(params, l0[None, :], 0.0, n_total, h, record=True)
    points = np.concatenate([l0[None, :], rec[:, 0, :]], axis=0)
    times = np.arange(n_total + 1) * h
    strobes = points[:: steps_per_period]
    strobe_times = times[:: steps_per_period]
    return ClassicalTrajectory(times, points, strobe_times, strobes)


def poincare_map(
    params: TopParams,
    l0_batch: np.ndarray,
    n_periods: int,
    steps_per_period: int = 256,
) -> np.ndarray:
    """Stroboscopic samples for a batch of launch directions.

    Returns shape (n_starts, n_periods + 1, 3); all trajectories are
    integrated in lockstep, which vectorizes well for the dense maps.
    """
    l0 = np.asarray(l0_batch, dtype=float)
    if l0.ndim != 2 or l0.shape[1] != 3:
        raise ValueError("l0_batch must have shape (n, 3)")
    norms = np.linalg.norm(l0, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("launch directions must be nonzero")
    l_vec = l0 * (params.l_norm / norms)

    h = params.period_us / steps_per_period
    out = np.empty((l0.shape[0], n_periods + 1, 3))
    out[:, 0] = l_vec
    t = 0.0
    for k in range(n_periods):
        l_vec, _ = _rk4_batch(params, l_vec, t, steps_per_period, h, record=False)
        t = (k + 1) * params.period_us
        out[:, k + 1] = l_vec
    return out


def lyapunov_exponent(
    params: TopParams,
    l0: np.ndarray,
    n_periods: int = 400,
    steps_per_period: int = 256,
    delta0: float = 1e-7,
    discard_periods: int = 20,
) -> float:
    """Largest Lyapunov exponent (1/us) by two-trajectory renormalization.

    A companion trajectory offset by ``delta0`` is integrated alongside
    the reference; once per period the separation is measured, its log
    accumulated, and the companion is pulled back to ``delta0`` along
    the current separation direction.  The first ``discard_periods``
    periods let the direction align with the most unstable one.
    """
    l0 = np.asarray(l0, dtype=float)
    l0 = l0 * (params.l_norm / np.linalg.norm(l0))
    # Deterministic transverse offset direction.
    axis = np.cross(l0, [0.0, 0.0, 1.0])
    if np.linalg.norm(axis) < 1e-12 * params.l_norm:
        axis = np.cross(l0, [1.0, 0.0, 0.0])
    axis /= np.linalg.norm(axis)

    pair = np.stack([l0, l0 + delta0 * axis])
    pair[1] *= params.l_norm / np.linalg.norm(pair[1])
    h = params.period_us / steps_per_period
    log_sum = 0.0
    counted = 0
    for k in range(n_periods):
        pair, _ = _rk4_batch(params, pair, k * params.period_us, steps_per_period, h, False)
        sep = pair[1] - pair[0]
        dist = float(np.linalg.norm(sep))
        if dist == 0.0:
            continue
        if k >= discard_periods:
            log_sum += math.log(dist / delta0)
            counted += 1
        pair[1] = pair[0] + sep * (delta0 / dist)
        pair[1] *= params.l_norm / np.linalg.norm(pair[1])
    if counted == 0:
        return 0.0
    return log_sum / (counted * params.period_us)


def lyapunov_map(
    params: TopParams,
    theta_grid: np.ndarray,
    phi_grid: np.ndarray,
    n_periods: int = 250,
    steps_per_period: int = 128,
    delta0: float = 1e-7,
    discard_periods: int = 25,
) -> np.ndarray:
    """Lyapunov exponent over a (theta, phi) grid of launch directions.

    Same estimator as :func:`lyapunov_exponent`, but the whole grid and
    its companion copies ride through :func:`_rk4_batch` together, which
    is what makes classifying a purity-map grid affordable.  Returns an
    array of shape ``(len(theta_grid), len(phi_grid))`` in 1/us.
    """
    theta = np.asarray(theta_grid, dtype=float)
    phi = np.asarray(phi_grid, dtype=float)
    if theta.size == 0 or phi.size == 0:
        raise ValueError("theta_grid and phi_grid must be nonempty")
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    l0 = np.stack(
        [np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=-1
    ).reshape(-1, 3)
    l0 *= params.l_norm
    n = l0.shape[0]

    axis = np.cross(l0, [0.0, 0.0, 1.0])
    degenerate = np.linalg.norm(axis, axis=1) < 1e-12 * params.l_norm
    axis[degenerate] = np.cross(l0[degenerate], [1.0, 0.0, 0.0])
    axis /= np.linalg.norm(axis, axis=1, keepdims=True)

    pair = np.concatenate([l0, l0 + delta0 * axis])
    pair[n:] *= params.l_norm / np.linalg.norm(pair[n:], axis=1, keepdims=True)
    h = params.period_us / steps_per_period
    log_sum = np.zeros(n)
    counted = 0
    for k in range(n_periods):
        pair, _ = _rk4_batch(params, pair, k * params.period_us, steps_per_period, h, False)
        sep = pair[n:] - pair[:n]
        dist = np.linalg.norm(sep, axis=1)
        dist[dist == 0.0] = delta0
        if k >= discard_periods:
            log_sum += np.log(dist / delta0)
            counted += 1
        pair[n:] = pair[:n] + sep * (delta0 / dist)[:, None]
        pair[n:] *= params.l_norm / np.linalg.norm(pair[n:], axis=1, keepdims=True)
    if counted == 0:
        return np.zeros((theta.size, phi.size))
    return (log_sum / (counted * params.period_us)).reshape(theta.size, phi.size)


def direction_angles(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Polar and azimuthal angles of (..., 3) vectors."""
    points = np.asarray(points, dtype=float)
    r = np.linalg.norm(points, axis=-1)
    theta = np.arccos(np.clip(points[..., 2] / r, -1.0, 1.0))
    phi = np.arctan2(points[..., 1], points[..., 0])
    return theta, phi


def angles_to_direction(theta: float, phi: float) -> np.ndarray:
    st = math.sin(theta)
    return np.array([st * math.cos(phi), st * math.sin(phi), math.cos(theta)])


# ---------------------------------------------------------------------------
# Quantum stroboscopic evolution


def spin_coherent_state(spin: float, theta: float, phi: float) -> np.ndarray:
    """Spin-coherent state pointing along (theta, phi).

    Rotation of the maximal-projection state: exp(-i*phi*Iz) *
    exp(-i*theta*Iy) |m = I>, giving <I> = spin * n_hat.
    """
    ops = spin_operators(spin)
    top = np.zeros(ops.dim, dtype=complex)
    top[0] = 1.0
    vec = expm(-1j * theta * ops.y) @ top
    return expm(-1j * phi * ops.z) @ vec


def _top_operators(params: TopParams, spin: float):
    ops = spin_operators(spin)
    h0 = params.c1_mhz * ops.z + params.c2_mhz * (ops.x @ ops.x)
    return h0, ops.y, ops.z


def one_period_propagator(
    params: TopParams, spin: float, steps_per_period: int = 1024
) -> np.ndarray:
    """Floquet propagator over one drive period.

    Fourth-order Magnus steps on two-point Gauss-Legendre nodes: with
    A(t) = -2j*pi*H(t),

        Omega = (h/2)(A1 + A2) + (sqrt(3) h^2 / 12) [A2, A1],

    which keeps the propagator exactly unitary and self-converges below
    1e-8 between 2**10 and 2**12 steps for the shipped parameters.
    """
    h0, v, _ = _top_operators(params, spin)
    h = params.period_us / steps_per_period
    offset = h * math.sqrt(3.0) / 6.0
    u = np.eye(h0.shape[0], dtype=complex)
    for k in range(steps_per_period):
        t_mid = (k + 0.5) * h
        f1 = params.cd_mhz * math.cos(2.0 * math.pi * params.nu_mhz * (t_mid - offset))
        f2 = params.cd_mhz * math.cos(2.0 * math.pi * params.nu_mhz * (t_mid + offset))
        a1 = -2j * math.pi * (h0 + f1 * v)
        a2 = -2j * math.pi * (h0 + f2 * v)
        omega = (h / 2.0) * (a1 + a2)
        omega += (math.sqrt(3.0) * h * h / 12.0) * (a2 @ a1 - a1 @ a2)
        u = expm(omega) @ u
    return u


def one_period_channel(
    params: TopParams,
    spin: float,
    dephasing_rate_per_us: float,
    steps_per_period: int = 1024,
) -> np.ndarray:
    """One-period superoperator with Iz dephasing, row-major convention.

    Strang splitting per step: half a dephasing interval, the Magnus
    unitary step, half an interval again.  The Iz dissipator is diagonal
    in this basis (it multiplies rho_ij by exp(-rate*(z_i - z_j)**2 *
    t / 2)), so the splitting costs one dense matrix product per step.
    """
    if dephasing_rate_per_us < 0:
        raise ValueError("dephasing rate must be non-negative")
    h0, v, iz = _top_operators(params, spin)
    dim = h0.shape[0]
    z = np.real(np.diag(iz))
    dz2 = (z[:, None] - z[None, :]) ** 2
    h = params.period_us / steps_per_period
    decay_half = np.exp(-0.5 * dephasing_rate_per_us * dz2 * (h / 2.0)).reshape(-1)

    offset = h * math.sqrt(3.0) / 6.0
    s = np.eye(dim * dim, dtype=complex)
    for k in range(steps_per_period):
        t_mid = (k + 0.5) * h
        f1 = params.cd_mhz * math.cos(2.0 * math.pi * params.nu_mhz * (t_mid - offset))
        f2 = params.cd_mhz * math.cos(2.0 * math.pi * params.nu_mhz * (t_mid + offset))
        a1 = -2j * math.pi * (h0 + f1 * v)
        a2 = -2j * math.pi * (h0 + f2 * v)
        omega = (h / 2.0) * (a1 + a2)
        omega += (math.sqrt(3.0) * h * h / 12.0) * (a2 @ a1 - a1 @ a2)
        u = expm(omega)
        step = np.kron(u, u.conj())
        step = decay_half[:, None] * step * decay_half[None, :]
        s = step @ s
    return s


@dataclass
class QuantumStroboscopic:
    """Density matrices sampled once per drive period."""

    times: np.ndarray
    states: np.ndarray  # (n_periods + 1, dim, dim)
    purities: np.ndarray


def quantum_stroboscopic(
    params: TopParams,
    spin: float,
    state0: np.ndarray,
    n_periods: int,
    dephasing_rate_per_us: float = 0.0,
    steps_per_period: int = 1024,
) -> QuantumStroboscopic:
    """Stroboscopic quantum evolution of the driven top.

    Builds the one-period propagator (or dephasing channel) once and
    applies it repeatedly, so long strings of periods cost one dense
    product each.  ``state0`` may be a vector or a density matrix of the
    spin's dimension.
    """
    ops_dim = int(round(2 * spin)) + 1
    state0 = np.asarray(state0, dtype=complex)
    if state0.shape == (ops_dim,):
        rho = np.outer(state0, state0.conj())
        rho /= np.trace(rho).real
    elif state0.shape == (ops_dim, ops_dim):
        rho = state0 / np.trace(state0).real
    else:
        raise ValueError(
            f"state0 shape {state0.shape} does not match spin {spin} (dim {ops_dim})"
        )

    times = np.arange(n_periods + 1) * params.period_us
    states = np.empty((n_periods + 1, ops_dim, ops_dim), dtype=complex)
    states[0] = rho
    if dephasing_rate_per_us == 0.0:
        u = one_period_propagator(params, spin, steps_per_period)
        for k in range(n_periods):
            states[k + 1] = u @ states[k] @ u.conj().T
    else:
        s = one_period_channel(params, spin, dephasing_rate_per_us, steps_per_period)
        vec = rho.reshape(-1)
        for k in range(n_periods):
            vec = s @ vec
            states[k + 1] = vec.reshape(ops_dim, ops_dim)
    purities = np.real(np.einsum("kij,kji->k", states, states))
    return QuantumStroboscopic(times=times, states=states, purities=purities)


@dataclass
class PurityMap:
    """Final-state purity over a grid of spin-coherent launch points."""

    theta: np.ndarray
    phi: np.ndarray
    purity: np.ndarray  # (n_theta, n_phi)
    n_periods: int
    dephasing_rate_per_us: float
    params: TopParams | None = field(repr=False, default=None)


def purity_map(
    params: TopParams,
    spin: float,
    theta_grid: np.ndarray,
    phi_grid: np.ndarray,
    n_periods: int,
    dephasing_rate_per_us: float,
    steps_per_period: int = 256,
) -> PurityMap:
    """tr(rho^2) after ``n_periods`` for every spin-coherent start.

    The one-period channel is raised to the requested power once; the
    whole grid of initial states is then propagated with a single dense
    product, so the map cost is independent of the grid size up to
    memory.
    """
    theta = np.asarray(theta_grid, dtype=float)
    phi = np.asarray(phi_grid, dtype=float)
    if theta.size == 0 or phi.size == 0:
        raise ValueError("theta_grid and phi_grid must be nonempty")
    dim = int(round(2 * spin)) + 1

    if dephasing_rate_per_us == 0.0:
        purity = np.ones((theta.size, phi.size))
        return PurityMap(theta, phi, purity, n_periods, dephasing_rate_per_us, params)

    s = one_period_channel(params, spin, dephasing_rate_per_us, steps_per_period)
    s_n = np.linalg.matrix_power(s, n_periods)

    starts = np.empty((dim * dim, theta.size * phi.size), dtype=complex)
    col = 0
    for th in theta:
        for ph in phi:
            psi = spin_coherent_state(spin, float(th), float(ph))
            starts[:, col] = np.outer(psi, psi.conj()).reshape(-1)
            col += 1
    finals = s_n @ starts
    rho = finals.T.reshape(-1, dim, dim)
    purity = np.real(np.einsum("kij,kji->k", rho, rho)).reshape(theta.size, phi.size)
    return PurityMap(theta, phi, purity, n_periods, dephasing_rate_per_us, params)
