"""Donor spins as metrology devices: field sensitivity and strain response.

Sensitivities are computed in SI units (tesla per root hertz) from
coherence times given in microseconds and gyromagnetic ratios in MHz/T;
pretty-printing with nT/pT prefixes belongs to the presentation layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .spincore import BENCHMARKS, DONORS, GAMMA_E_MHZ_PER_T, DonorSpecies

__all__ = [
    "SensorSpec",
    "MagneticSensitivity",
    "dc_sensitivity",
    "ac_sensitivity",
    "magnetic_sensitivity",
    "sensor_from_benchmark",
    "STRAIN_LINEAR_LIMIT",
    "StrainResponse",
    "strain_shift",
    "min_detectable_strain",
]


@dataclass(frozen=True)
class SensorSpec:
    """Magnetometer built from one spin species.

    ``c_eff`` is the detection-efficiency factor multiplying the signal;
    single-shot donor readout operates near 1, so that is the default.
    """

    gamma_mhz_per_t: float
    t2_star_us: float
    t2_cpmg_us: float
    c_eff: float = 1.0

    def __post_init__(self) -> None:
        if self.gamma_mhz_per_t <= 0:
            raise ValueError("gamma_mhz_per_t must be positive")
        if self.t2_star_us <= 0 or self.t2_cpmg_us <= 0:
            raise ValueError("coherence times must be positive")
        if not 0 < self.c_eff <= 1:
            raise ValueError("c_eff must lie in (0, 1]")


@dataclass(frozen=True)
class MagneticSensitivity:
    eta_dc_t_sqrt_hz: float
    eta_ac_t_sqrt_hz: float


def dc_sensitivity(spec: SensorSpec) -> float:
    """Ramsey (dc) field sensitivity, T/sqrt(Hz).

    1 / (2 pi gamma C sqrt(T2*)) with gamma in Hz/T and T2* in seconds:
    the slope of a Ramsey fringe against field, divided into the
    projection noise accumulated per unit averaging time.
    """
    gamma_hz = spec.gamma_mhz_per_t * 1e6
    t2 = spec.t2_star_us * 1e-6
    return 1.0 / (2.0 * math.pi * gamma_hz * spec.c_eff * math.sqrt(t2))


def ac_sensitivity(spec: SensorSpec) -> float:
    """Dynamically decoupled (ac) sensitivity, T/sqrt(Hz).

    1 / (4 gamma C sqrt(T2_CPMG)): the echo train extends the phase
    accumulation window to the decoupled coherence time at the cost of
    the 2/pi duty factor of a square modulation.
    """
    gamma_hz = spec.gamma_mhz_per_t * 1e6
    t2 = spec.t2_cpmg_us * 1e-6
    return 1.0 / (4.0 * gamma_hz * spec.c_eff * math.sqrt(t2))


def magnetic_sensitivity(spec: SensorSpec) -> MagneticSensitivity:
    return MagneticSensitivity(dc_sensitivity(spec), ac_sensitivity(spec))


def sensor_from_benchmark(kind: str, c_eff: float = 1.0) -> SensorSpec:
    """Sensor spec for a demonstrated qubit flavour.

    ``kind`` is a key of ``BENCHMARKS``; the electron uses the electron
    gyromagnetic ratio, the nuclear flavours the 31P nuclear one.
    """
    if kind not in BENCHMARKS:
        raise ValueError(f"unknown benchmark {kind!r}; have {sorted(BENCHMARKS)}")
    bench = BENCHMARKS[kind]
    gamma = GAMMA_E_MHZ_PER_T if kind == "electron" else DONORS["31P"].gamma_n_mhz_per_t
    return SensorSpec(
        gamma_mhz_per_t=gamma,
        t2_star_us=bench.t2_star_ms * 1e3,
        t2_cpmg_us=bench.t2_cpmg_s * 1e6,
        c_eff=c_eff,
    )


# Above this strain magnitude the linear hyperfine response model is
# extrapolating; results carry a warning flag instead of failing.
STRAIN_LINEAR_LIMIT = 1e-3


@dataclass(frozen=True)
class StrainResponse:
    delta_a_mhz: float
    delta_nu_mhz: float
    strain: float
    regime: str
    beyond_linear_regime: bool


def _strain_coefficients(species: DonorSpecies, regime: str) -> tuple[float, float]:
    if species.strain_k is None:
        raise ValueError(f"no strain coefficient tabulated for {species.name}")
    if regime == "low":
        dnu_da = species.dnu_da_low
    elif regime == "high":
        dnu_da = species.dnu_da_high
    else:
        raise ValueError(f"regime must be 'low' or 'high', got {regime!r}")
    return species.strain_k, dnu_da


def strain_shift(species: DonorSpecies, strain: float, regime: str = "low") -> StrainResponse:
    """Hyperfine and transition-frequency shift of a strained donor.

    The hyperfine constant responds linearly, dA = K * strain * A, and
    the tracked transition moves by |dnu/dA| * dA, with the multiplier
    chosen for the low- or high-field regime.
    """
    k, dnu_da = _strain_coefficients(species, regime)
    delta_a = k * strain * species.hyperfine_mhz
    return StrainResponse(
        delta_a_mhz=delta_a,
        delta_nu_mhz=dnu_da * delta_a,
        strain=strain,
        regime=regime,
        beyond_linear_regime=abs(strain) >= STRAIN_LINEAR_LIMIT,
    )


def min_detectable_strain(
    species: DonorSpecies, linewidth_mhz: float, regime: str = "low"
) -> float:
    """Strain that moves the tracked transition by one linewidth."""
    if linewidth_mhz <= 0:
        raise ValueError("linewidth must be positive")
    k, dnu_da = _strain_coefficients(species, regime)
    return linewidth_mhz / (dnu_da * k * species.hyperfine_mhz)
