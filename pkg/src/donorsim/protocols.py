"""Named single-spin experiments: Rabi, Ramsey, CPMG, readout.

The simulators here work at the protocol level: control pulses (pi/2, pi)
are instantaneous, and dephasing enters as a classical frequency noise
process integrated along the sequence.  Finite-pulse effects can still be
studied by composing :mod:`donorsim.dynamics` sequences directly.

Frequency-noise conventions
---------------------------
A dephasing process ``delta_nu(t)`` (MHz) accumulates the phase
``phi = integral of s(t') * delta_nu(t') dt'`` where ``s`` is the +-1
toggling sign of the pulse pattern, and the measured coherence is
``<cos(2*pi*phi)>``.  For Gaussian noise with one-sided spectral table
``S(nu)`` this equals ``exp(-chi)`` with

    chi = 2 * pi**2 * sum_k S(nu_k) * w_k * |Y(nu_k; t)|**2

where ``Y`` is the finite-time filter transform computed by
:func:`filter_weight` and ``w_k`` the trapezoid weights of the table.  A
single-row table is treated as a discrete tone whose variance is the
table's single ``s`` value; a quasi-static Gaussian is the special case
of a tone at zero frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats

from .dynamics import (
    PsdTable,
    PulseSequence,
    QuantumState,
    QuasiStaticGaussian,
    RotatingFrame,
    drive,
    propagate_unitary,
)
from .spincore import KB_MHZ_PER_K, spin_operators

__all__ = [
    "CoherenceResult",
    "fit_coherence",
    "simulate_rabi",
    "simulate_ramsey",
    "simulate_cpmg",
    "PulsePattern",
    "free_evolution_pattern",
    "cpmg_pattern",
    "filter_weight",
    "coherence_from_psd",
    "ReadoutParams",
    "ReadoutResult",
    "spin_to_charge_readout",
    "qnd_nuclear_readout",
    "qnd_readout_sweep",
    "qnd_fidelity_exact",
]


@dataclass
class CoherenceResult:
    """Time trace of a protocol plus an optional decay fit.

    ``signal`` is dimensionless and bounded by 1 in magnitude up to Monte
    Carlo error: a population for Rabi traces, a coherence amplitude for
    Ramsey/CPMG.  ``fitted_time`` is the 1/e time of the fitted envelope
    in microseconds (``None`` when no fit was requested or possible).
    """

    times: np.ndarray
    signal: np.ndarray
    signal_err: np.ndarray | None = None
    fitted_time: float | None = None
    fit_model: str | None = None
    n_samples: int | None = None
    metadata: dict = field(default_factory=dict)


_FIT_MODELS = ("gaussian", "exponential", "stretched")


def fit_coherence(
    times: np.ndarray,
    signal: np.ndarray,
    model: str = "gaussian",
    oscillation_mhz: float = 0.0,
) -> tuple[float, float | None]:
    """Least-squares fit of a decay envelope to a coherence trace.

    Models: ``gaussian`` ``exp(-(t/T)^2)``, ``exponential`` ``exp(-t/T)``,
    ``stretched`` ``exp(-(t/T)^p)`` with the exponent free.  When
    ``oscillation_mhz`` is nonzero the envelope is multiplied by
    ``cos(2*pi*f*t)`` so fringed Ramsey traces can be fitted directly.
    Returns ``(T, p)`` with ``p = None`` for the fixed-exponent models.
    """
    if model not in _FIT_MODELS:
        raise ValueError(f"unknown fit model {model!r}; expected one of {_FIT_MODELS}")
    t = np.asarray(times, dtype=float)
    y = np.asarray(signal, dtype=float)
    if t.size < 2:
        raise ValueError("need at least two points to fit a decay time")

    def envelope(tt, t_c, p):
        with np.errstate(over="ignore"):
            return np.exp(-np.abs(tt / t_c) ** p)

    def target(tt, *params):
        t_c = params[0]
        p = params[1] if model == "stretched" else _FIXED_P[model]
        return np.cos(2 * np.pi * oscillation_mhz * tt) * envelope(tt, t_c, p)

    t_max = float(np.max(np.abs(t)))
    # Initial guess: first crossing of the 1/e level, else the grid span.
    below = np.nonzero(np.abs(y) < math.exp(-1))[0]
    t0 = float(np.abs(t[below[0]])) if below.size else t_max
    t0 = max(t0, 1e-12)
    if model == "stretched":
        p0, bounds = [t0, 2.0], ([1e-9 * t_max, 0.3], [1e6 * t_max, 6.0])
    else:
        p0, bounds = [t0], ([1e-9 * t_max], [1e6 * t_max])
    popt, _ = optimize.curve_fit(target, t, y, p0=p0, bounds=bounds, maxfev=20000)
    exponent = float(popt[1]) if model == "stretched" else None
    return float(popt[0]), exponent


_FIXED_P = {"gaussian": 2.0, "exponential": 1.0}


# ---------------------------------------------------------------------------
# Rabi


def simulate_rabi(
    transition_frequency_mhz: float,
    drive_frequency_mhz: float,
    amplitude_mhz: float,
    t_grid: np.ndarray,
) -> CoherenceResult:
    """Driven two-level population dynamics via rotating-frame propagation.

    ``amplitude_mhz`` is the transverse coupling ``gamma * B1`` acting
    through the spin-x operator, so an on-resonance drive flops the
    population at ``amplitude / 2``; with detuning ``delta`` the
    oscillation moves to the generalized frequency
    ``sqrt((amplitude/2)**2 + delta**2)`` with reduced contrast.  The
    returned signal is the flipped-state population on ``t_grid``.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.size == 0:
        raise ValueError("t_grid is empty")
    if np.any(t < 0):
        raise ValueError("t_grid times must be non-negative")

    ops = spin_operators(0.5)
    h0 = transition_frequency_mhz * ops.z
    frame = RotatingFrame(ops.z, drive_frequency_mhz)
    down = QuantumState(np.array([0.0, 1.0], dtype=complex))

    signal = np.empty(t.size)
    for k, t_k in enumerate(t):
        if t_k == 0.0:
            signal[k] = 0.0
            continue
        seq = PulseSequence(
            (
                drive(
                    ops.x,
                    duration=t_k,
                    frequency=drive_frequency_mhz,
                    amplitude=amplitude_mhz,
                ),
            )
        )
        # Resonant in the drive frame, so the segment is time independent
        # and a single step is exact regardless of dt_max.
        traj = propagate_unitary(h0, seq, down, frame=frame, dt_max=t_k)
        signal[k] = float(np.abs(traj.final_state()[0]) ** 2)

    detuning = transition_frequency_mhz - drive_frequency_mhz
    f_rabi = 0.0
    if amplitude_mhz != 0.0:
        omega0 = math.hypot(amplitude_mhz / 2.0, detuning)

        def rabi_model(tt, omega, contrast):
            return contrast * np.sin(np.pi * omega * tt) ** 2

        try:
            popt, _ = optimize.curve_fit(
                rabi_model,
                t,
                signal,
                p0=[omega0, (amplitude_mhz / 2.0 / omega0) ** 2],
                bounds=([0.0, 0.0], [np.inf, 1.0 + 1e-9]),
                maxfev=20000,
            )
            f_rabi = float(popt[0])
        except RuntimeError:
            f_rabi = omega0
    return CoherenceResult(
        times=t,
        signal=signal,
        fitted_time=None,
        fit_model=None,
        metadata={"rabi_frequency_mhz": f_rabi, "detuning_mhz": detuning},
    )


# ---------------------------------------------------------------------------
# Pulse patterns and filter functions


@dataclass(frozen=True)
class PulsePattern:
    """Instantaneous pi-pulse positions as fractions of the total time.

    The sequence starts and ends with free evolution; the toggling sign
    flips at every listed fraction.  An empty tuple is plain free
    induction (Ramsey).
    """

    pulse_fractions: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        prev = 0.0
        for f in self.pulse_fractions:
            if not 0.0 < f < 1.0:
                raise ValueError("pulse fractions must lie strictly inside (0, 1)")
            if f <= prev:
                raise ValueError("pulse fractions must be strictly increasing")
            prev = f

    @property
    def n_pulses(self) -> int:
        return len(self.pulse_fractions)

    def boundaries(self) -> np.ndarray:
        return np.concatenate(([0.0], self.pulse_fractions, [1.0]))


def free_evolution_pattern() -> PulsePattern:
    return PulsePattern(())


def cpmg_pattern(n_pulses: int) -> PulsePattern:
    """Pi pulses at odd multiples of half the inter-pulse spacing.

    With total time ``T = n*tau`` the pulses sit at ``(k - 1/2)*tau``;
    ``n_pulses = 1`` is a Hahn echo.
    """
    if n_pulses < 1:
        raise ValueError("n_pulses must be at least 1")
    return PulsePattern(tuple((k - 0.5) / n_pulses for k in range(1, n_pulses + 1)))


def _pattern_quadratures(
    pattern: PulsePattern, nu: np.ndarray, total_time: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Cos/sin quadratures of the toggling window, shape (n_t, n_nu).

    ``C + 1j*S`` is the finite-time transform ``Y(nu; t)`` of the +-1
    toggling function, with the zero-frequency limit (net signed time)
    handled exactly.
    """
    t = np.atleast_1d(np.asarray(total_time, dtype=float))
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    fb = pattern.boundaries()
    signs = (-1.0) ** np.arange(fb.size - 1)

    tau = t[:, None] * fb[None, :]  # (n_t, n_b)
    nu_safe = np.where(nu == 0.0, 1.0, nu)
    arg = 2.0 * np.pi * nu_safe[None, :, None] * tau[:, None, :]  # (n_t, n_nu, n_b)
    denom = 2.0 * np.pi * nu_safe
    c = np.einsum("j,tnj->tn", signs, np.diff(np.sin(arg), axis=2)) / denom
    s = -np.einsum("j,tnj->tn", signs, np.diff(np.cos(arg), axis=2)) / denom

    zero = nu == 0.0
    if np.any(zero):
        net = np.diff(tau, axis=1) @ signs  # (n_t,)
        c[:, zero] = net[:, None]
        s[:, zero] = 0.0
    return c, s


def filter_weight(
    pattern: PulsePattern, nu: np.ndarray, total_time: float
) -> np.ndarray:
    """Squared magnitude ``|Y(nu; t)|**2`` of the sequence filter.

    Units are microseconds squared.  For free evolution this is
    ``sin(pi nu t)**2 / (pi nu)**2``; for CPMG it peaks near the passband
    ``nu = n / (2 t)``, i.e. ``1 / (2 tau)``.
    """
    c, s = _pattern_quadratures(pattern, np.asarray(nu, dtype=float), float(total_time))
    return (c * c + s * s)[0]


def coherence_from_psd(
    psd: PsdTable, pattern: PulsePattern, total_time: float
) -> float:
    """Filter-function coherence ``W = exp(-chi)`` for Gaussian dephasing.

    ``chi`` is the quadrature-weighted overlap of the one-sided PSD with
    the pattern's filter, ``2 pi^2 sum_k S_k w_k |Y(nu_k; t)|^2``.  A
    single-row table is a tone of variance ``s[0]``.
    """
    if total_time < 0:
        raise ValueError("total_time must be non-negative")
    if total_time == 0:
        return 1.0
    w = psd.weights()
    y2 = filter_weight(pattern, psd.nu, total_time)
    chi = 2.0 * np.pi**2 * float(np.sum(psd.s * w * y2))
    return float(np.exp(-chi))


# ---------------------------------------------------------------------------
# Dephasing Monte Carlo


def _as_psd_table(noise) -> PsdTable | None:
    if noise is None:
        return None
    if isinstance(noise, QuasiStaticGaussian):
        return PsdTable(np.array([0.0]), np.array([noise.sigma**2]))
    if isinstance(noise, PsdTable):
        return noise
    raise TypeError(
        "noise must be None, QuasiStaticGaussian, or PsdTable; "
        f"got {type(noise).__name__}"
    )


def _dephasing_phases(
    table: PsdTable,
    pattern: PulsePattern,
    times: np.ndarray,
    n_samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Sampled toggled phase integrals, shape (n_t, n_samples).

    Synthesizes the Gaussian process as independent cos/sin tones on the
    table rows; the per-segment integrals are exact, so the sampled
    variance matches the filter-function ``chi`` identically.
    """
    c, s = _pattern_quadratures(pattern, table.nu, times)  # (n_t, n_nu)
    amp = np.sqrt(table.s * table.weights())  # (n_nu,)
    g = rng.standard_normal((table.nu.size, n_samples))
    h = rng.standard_normal((table.nu.size, n_samples))
    return c @ (amp[:, None] * g) + s @ (amp[:, None] * h)


def simulate_ramsey(
    detuning_mhz: float,
    noise,
    t_grid: np.ndarray,
    n_samples: int = 10_000,
    seed: int = 0,
) -> CoherenceResult:
    """Free-induction decay with instantaneous pi/2 pulses.

    The signal is ``<cos(2 pi (detuning + delta_nu) t)>`` over noise
    realizations.  Under quasi-static Gaussian noise of width ``sigma``
    the envelope is ``exp(-(t/T2*)^2)`` with ``T2* = sqrt(2)/(2 pi
    sigma)``; the fitted time and the corresponding inhomogeneous
    linewidth ``ln 2 / (pi T2*)`` are reported in the metadata.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.size == 0:
        raise ValueError("t_grid is empty")
    table = _as_psd_table(noise)
    pattern = free_evolution_pattern()

    fringe = np.cos(2.0 * np.pi * detuning_mhz * t)
    if table is None:
        result = CoherenceResult(times=t, signal=fringe, n_samples=0)
        result.metadata["detuning_mhz"] = detuning_mhz
        return result

    rng = np.random.default_rng(seed)
    phases = _dephasing_phases(table, pattern, t, n_samples, rng)
    samples = np.cos(2.0 * np.pi * (detuning_mhz * t[:, None] + phases))
    signal = samples.mean(axis=1)
    err = samples.std(axis=1, ddof=1) / math.sqrt(n_samples)

    fitted = None
    metadata: dict = {"detuning_mhz": detuning_mhz}
    try:
        fitted, _ = fit_coherence(t, signal, "gaussian", oscillation_mhz=detuning_mhz)
        metadata["t2_star_us"] = fitted
        metadata["linewidth_mhz"] = math.log(2.0) / (math.pi * fitted)
    except (RuntimeError, ValueError):
        pass
    return CoherenceResult(
        times=t,
        signal=signal,
        signal_err=err,
        fitted_time=fitted,
        fit_model="gaussian" if fitted is not None else None,
        n_samples=n_samples,
        metadata=metadata,
    )


def simulate_cpmg(
    n_pulses: int,
    tau_grid: np.ndarray,
    noise,
    n_samples: int = 10_000,
    seed: int = 0,
    fit_model: str = "gaussian",
) -> CoherenceResult:
    """Multipulse echo decay versus total time ``n_pulses * tau``.

    Pi pulses are instantaneous and sit at CPMG positions, so
    quasi-static noise is refocused exactly for every ``n_pulses >= 1``
    and the sequence filters noise in a passband around ``1/(2 tau)``.
    """
    if n_pulses < 1:
        raise ValueError("n_pulses must be at least 1")
    tau = np.asarray(tau_grid, dtype=float)
    if tau.size == 0:
        raise ValueError("tau_grid is empty")
    if np.any(tau <= 0):
        raise ValueError("tau values must be positive")
    total = n_pulses * tau
    table = _as_psd_table(noise)
    pattern = cpmg_pattern(n_pulses)

    if table is None:
        return CoherenceResult(times=total, signal=np.ones_like(total), n_samples=0)

    rng = np.random.default_rng(seed)
    phases = _dephasing_phases(table, pattern, total, n_samples, rng)
    samples = np.cos(2.0 * np.pi * phases)
    signal = samples.mean(axis=1)
    err = samples.std(axis=1, ddof=1) / math.sqrt(n_samples)

    fitted = exponent = None
    try:
        fitted, exponent = fit_coherence(total, signal, fit_model)
    except (RuntimeError, ValueError):
        pass
    metadata = {"n_pulses": n_pulses, "passband_mhz": 0.5 / float(np.max(tau))}
    if exponent is not None:
        metadata["stretch_exponent"] = exponent
    return CoherenceResult(
        times=total,
        signal=signal,
        signal_err=err,
        fitted_time=fitted,
        fit_model=fit_model if fitted is not None else None,
        n_samples=n_samples,
        metadata=metadata,
    )


# ---------------------------------------------------------------------------
# Spin-to-charge readout


@dataclass(frozen=True)
class ReadoutParams:
    """Energy-selective tunneling readout settings.

    The spin-up and spin-down electrochemical potentials straddle a
    reservoir Fermi level: ``mu_up - mu_down`` equals the Zeeman
    splitting, and ``fermi_offset_mhz`` moves the Fermi level away from
    the midpoint (positive raises it toward the up level).  Rates are
    gated by the Fermi occupation at the relevant potential.  The
    detector registers an ionized interval only if it lasts at least
    ``1/bandwidth``.
    """

    zeeman_mhz: float
    temperature_k: float
    rate_out_per_us: float
    rate_in_per_us: float
    bandwidth_mhz: float
    window_us: float
    fermi_offset_mhz: float = 0.0
    electron_fidelity_up: float = 1.0
    electron_fidelity_down: float = 1.0

    def __post_init__(self) -> None:
        if self.zeeman_mhz < 0:
            raise ValueError("zeeman_mhz must be non-negative")
        if self.temperature_k < 0:
            raise ValueError("temperature_k must be non-negative")
        for name in ("rate_out_per_us", "rate_in_per_us", "bandwidth_mhz"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.window_us <= 0:
            raise ValueError("window_us must be positive")
        for name in ("electron_fidelity_up", "electron_fidelity_down"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    def level_mhz(self, spin_up: bool) -> float:
        """Electrochemical potential of one spin species minus the Fermi level."""
        half = 0.5 * self.zeeman_mhz
        return (half if spin_up else -half) - self.fermi_offset_mhz


def _fermi_occupation(e_mhz: float, temperature_k: float) -> float:
    if temperature_k == 0.0:
        if e_mhz < 0.0:
            return 1.0
        return 0.5 if e_mhz == 0.0 else 0.0
    return float(special.expit(-e_mhz / (KB_MHZ_PER_K * temperature_k)))


@dataclass
class ReadoutResult:
    """Single-shot readout figures; the electron always ends spin-down."""

    fidelity_up: float | None
    fidelity_down: float | None
    visibility: float | None
    post_state: str
    n_shots: int


def _readout_blips(
    params: ReadoutParams, start_up: bool, n_shots: int, rng: np.random.Generator
) -> np.ndarray:
    """Boolean per shot: did any detectable ionized interval occur."""
    f_up = _fermi_occupation(params.level_mhz(True), params.temperature_k)
    f_down = _fermi_occupation(params.level_mhz(False), params.temperature_k)
    r_out = np.array(
        [
            params.rate_out_per_us * (1.0 - f_down),
            params.rate_out_per_us * (1.0 - f_up),
        ]
    )  # indexed by spin_up as int
    r_in_total = params.rate_in_per_us * (f_up + f_down)
    p_reload_up = f_up / (f_up + f_down) if (f_up + f_down) > 0 else 0.0
    window = params.window_us
    min_dwell = np.inf if params.bandwidth_mhz == 0 else 1.0 / params.bandwidth_mhz

    t = np.zeros(n_shots)
    spin_up = np.full(n_shots, start_up)
    ionized = np.zeros(n_shots, dtype=bool)
    detected = np.zeros(n_shots, dtype=bool)
    active = np.ones(n_shots, dtype=bool)

    while np.any(active):
        neutral = active & ~ionized
        if np.any(neutral):
            rates = r_out[spin_up[neutral].astype(int)]
            with np.errstate(divide="ignore"):
                dwell = rng.exponential(size=rates.size) / rates
            t_new = t[neutral] + dwell
            leaves = t_new < window
            t[neutral] = np.where(leaves, t_new, window)
            idx = np.flatnonzero(neutral)
            ionized[idx[leaves]] = True
            active[idx[~leaves]] = False

        ion = active & ionized
        if np.any(ion):
            if r_in_total > 0:
                dwell = rng.exponential(size=int(ion.sum())) / r_in_total
            else:
                dwell = np.full(int(ion.sum()), np.inf)
            exit_t = np.minimum(t[ion] + dwell, window)
            detected[ion] |= (exit_t - t[ion]) >= min_dwell
            reloaded = t[ion] + dwell < window
            idx = np.flatnonzero(ion)
            spin_up[idx] = np.where(
                reloaded, rng.random(idx.size) < p_reload_up, spin_up[idx]
            )
            t[ion] = exit_t
            ionized[idx[reloaded]] = False
            active[idx[~reloaded]] = False
    return detected


def spin_to_charge_readout(
    params: ReadoutParams,
    initial_spin: str = "both",
    n_shots: int = 10_000,
    seed: int = 0,
) -> ReadoutResult:
    """Monte Carlo single-shot readout via spin-dependent ionization.

    For each shot, tunnel-out and tunnel-in times are drawn from the
    Fermi-gated rates; a blip counts when the donor stays ionized at
    least ``1/bandwidth`` within the readout window.  ``fidelity_up`` is
    the detection probability for spin-up shots, ``fidelity_down`` the
    no-blip probability for spin-down shots, and the visibility is their
    sum minus one.  The reported post-readout state is always spin-down:
    the up electron leaves and the reservoir can only refill the lower
    level once readout ends.
    """
    if initial_spin not in ("up", "down", "both"):
        raise ValueError("initial_spin must be 'up', 'down', or 'both'")
    if n_shots < 1:
        raise ValueError("n_shots must be positive")
    rng = np.random.default_rng(seed)

    fidelity_up = fidelity_down = None
    if initial_spin in ("up", "both"):
        fidelity_up = float(np.mean(_readout_blips(params, True, n_shots, rng)))
    if initial_spin in ("down", "both"):
        fidelity_down = float(1.0 - np.mean(_readout_blips(params, False, n_shots, rng)))
    visibility = None
    if fidelity_up is not None and fidelity_down is not None:
        visibility = fidelity_up + fidelity_down - 1.0
    return ReadoutResult(
        fidelity_up=fidelity_up,
        fidelity_down=fidelity_down,
        visibility=visibility,
        post_state="down",
        n_shots=n_shots,
    )


# ---------------------------------------------------------------------------
# Repetitive QND nuclear readout


def _qnd_read_matrix(
    f_e: float,
    p_flip: float,
    n_cycles: int,
    n_shots: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Boolean (n_shots, n_cycles): each read agrees with the initial state.

    Each cycle reads the current nuclear state through an electron
    ancilla with per-shot fidelity ``f_e``, then the nucleus may flip
    with probability ``p_flip`` (read first, so a single cycle is exactly
    an ``f_e`` measurement).
    """
    flips = rng.random((n_shots, n_cycles)) < p_flip
    parity = np.zeros((n_shots, n_cycles), dtype=bool)
    if n_cycles > 1:
        parity[:, 1:] = np.cumsum(flips[:, :-1], axis=1) % 2 == 1
    errors = rng.random((n_shots, n_cycles)) >= f_e
    return parity == errors  # agree iff both flipped or neither


def _majority_credit(count_agree: np.ndarray, n: int) -> np.ndarray:
    """Per-shot correctness of a majority vote, ties worth 1/2.

    The half credit is the exact expectation over a fair tie-breaking
    coin conditioned on the read sequence, so means are unchanged and
    variance is reduced.
    """
    credit = (count_agree > n / 2).astype(float)
    credit[count_agree * 2 == n] = 0.5
    return credit


def qnd_nuclear_readout(
    f_e: float,
    p_flip: float,
    n_cycles: int,
    n_shots: int = 10_000,
    decision: str = "majority",
    threshold: int | None = None,
    seed: int = 0,
) -> float:
    """Monte Carlo fidelity of repeated nuclear readout.

    The nuclear state is read ``n_cycles`` times; ``decision`` turns the
    record into one estimate, either a majority vote (default, ties split
    fairly) or a count threshold.  The model is symmetric in the two
    nuclear states, so a single fidelity is returned.
    """
    if n_cycles < 1:
        raise ValueError("n_cycles must be at least 1")
    if not 0.0 <= p_flip <= 1.0:
        raise ValueError("p_flip must lie in [0, 1]")
    if not 0.0 <= f_e <= 1.0:
        raise ValueError("f_e must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    agree = _qnd_read_matrix(f_e, p_flip, n_cycles, n_shots, rng)
    count = agree.sum(axis=1)
    if decision == "majority":
        credit = _majority_credit(count, n_cycles)
    elif decision == "threshold":
        if threshold is None or not 0 <= threshold <= n_cycles:
            raise ValueError("threshold decision needs 0 <= threshold <= n_cycles")
        # Declare "up" when at least `threshold` reads say up.  The agree
        # count plays the role of the up count for an up nucleus and of
        # the down count for a down nucleus, so averaging the two input
        # states uses both tails of the same record.
        credit = 0.5 * (
            (count >= threshold).astype(float)
            + (count > n_cycles - threshold).astype(float)
        )
    else:
        raise ValueError("decision must be 'majority' or 'threshold'")
    return float(credit.mean())


def qnd_readout_sweep(
    f_e: float,
    p_flip: float,
    n_max: int,
    n_shots: int = 100_000,
    seed: int = 0,
    chunk: int = 20_000,
) -> np.ndarray:
    """Majority-vote fidelity for every cycle count 1..n_max at once.

    Reuses each simulated shot's read record for all prefixes, which
    makes the curve smooth in ``n`` and cheap to sweep.  Entry ``k`` of
    the returned array is the fidelity for ``k + 1`` cycles.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    rng = np.random.default_rng(seed)
    n_grid = np.arange(1, n_max + 1)
    total = np.zeros(n_max)
    done = 0
    while done < n_shots:
        size = min(chunk, n_shots - done)
        agree = _qnd_read_matrix(f_e, p_flip, n_max, size, rng)
        counts = np.cumsum(agree, axis=1)  # (size, n_max)
        credit = (counts > n_grid / 2).astype(float)
        credit[counts * 2 == n_grid] = 0.5
        total += credit.sum(axis=0)
        done += size
    return total / n_shots


def qnd_fidelity_exact(f_e: float, n_cycles: int, p_flip: float = 0.0) -> float:
    """Exact majority-vote fidelity by dynamic programming.

    Tracks the joint distribution of (nucleus flipped, agreeing-read
    count) over cycles; with ``p_flip = 0`` this reduces to the binomial
    majority tail with half-weighted ties.
    """
    if n_cycles < 1:
        raise ValueError("n_cycles must be at least 1")
    if not 0.0 <= p_flip <= 1.0:
        raise ValueError("p_flip must lie in [0, 1]")
    if p_flip == 0.0:
        n = n_cycles
        tail = float(stats.binom.sf(n // 2, n, f_e))
        tie = 0.5 * float(stats.binom.pmf(n // 2, n, f_e)) if n % 2 == 0 else 0.0
        return tail + tie
    # dist[p, m]: nucleus parity p, m agreeing reads so far.
    dist = np.zeros((2, n_cycles + 1))
    dist[0, 0] = 1.0
    p_agree = np.array([f_e, 1.0 - f_e])
    for _ in range(n_cycles):
        read = np.zeros_like(dist)
        read[:, 1:] = dist[:, :-1] * p_agree[:, None]
        read[:, :] += dist * (1.0 - p_agree)[:, None]
        dist = (1.0 - p_flip) * read + p_flip * read[::-1]
    m = np.arange(n_cycles + 1)
    weight = np.where(2 * m > n_cycles, 1.0, np.where(2 * m == n_cycles, 0.5, 0.0))
    return float(np.sum(dist.sum(axis=0) * weight))
