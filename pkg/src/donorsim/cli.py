"""Command-line front end: every simulation as a subcommand.

Each subcommand validates its flags, runs the corresponding library
call, writes plot-ready data files under ``--output_path`` in the chosen
``--format``, and prints a one-line JSON summary to stdout.  The summary
echoes the fully resolved configuration, so re-running with exactly
those values reproduces the outputs byte for byte.

Conventions:

* exit 0 on success, 2 for argument problems (the message names the
  offending flag), 1 for numerical failures inside a computation;
* ``--config file.json`` supplies a flat ``{"flag": value}`` object;
  explicit flags override it, unknown keys are rejected;
* all Monte Carlo draws descend from ``--seed``; worker threads
  (``--threads`` or ``DONORSIM_THREADS``) never change results, only
  wall time, because parallel work is split into fixed chunks with
  per-chunk seed streams.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import cavity as cav_mod
from . import chaos, implantation, multiqubit, ner, protocols, sensing
from .dynamics import PsdTable, QuasiStaticGaussian
from .reporting import si_magnetic_field, to_json, write_csv, write_json
from .spincore import (
    DONORS,
    GAMMA_E_MHZ_PER_T,
    QuadrupoleParams,
    SpinSystem,
    donor_lookup,
    neutral_hamiltonian,
    ionized_hamiltonian,
    spin_operators,
    transition_spectrum,
)

__all__ = ["main"]


class CliError(Exception):
    """Argument-level problem; message names the offending flag."""


@dataclass(frozen=True)
class _Opt:
    name: str
    type: type | None
    default: Any
    help: str
    choices: tuple | None = None
    flag: bool = False
    required: bool = False


@dataclass(frozen=True)
class _Command:
    name: str
    summary: str
    options: tuple[_Opt, ...]
    handler: Callable[[dict, "_Writer", int], dict]


_COMMON_OPTS: tuple[_Opt, ...] = (
    _Opt("seed", int, 0, "base seed for all random draws"),
    _Opt("output_path", str, ".", "directory for data files"),
    _Opt("format", str, "csv", "data file format", choices=("csv", "json")),
    _Opt("threads", int, None, "worker thread cap (default: all cores)"),
    _Opt("config", str, None, "flat JSON config file; flags override it"),
)


class _Writer:
    """Writes tables under the output directory in the chosen format."""

    def __init__(self, directory: Path, fmt: str) -> None:
        self.directory = directory
        self.fmt = fmt
        self.paths: list[str] = []

    def table(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
        rows = [list(r) for r in rows]
        if self.fmt == "csv":
            path = write_csv(self.directory / f"{name}.csv", header, rows)
        else:
            path = write_json(
                self.directory / f"{name}.json",
                [dict(zip(header, row)) for row in rows],
            )
        self.paths.append(str(path))
        return path


def _fail(flag: str, problem: Any) -> CliError:
    return CliError(f"--{flag}: {problem}")


def _donor(cfg: dict, key: str = "donor"):
    try:
        return donor_lookup(cfg[key])
    except ValueError as exc:
        raise _fail(key, exc) from None


def _positive(cfg: dict, key: str, strict: bool = True) -> float:
    value = cfg[key]
    if value is None:
        raise _fail(key, "value required")
    if strict and not value > 0:
        raise _fail(key, f"must be positive, got {value}")
    if not strict and value < 0:
        raise _fail(key, f"must be non-negative, got {value}")
    return value


# ---------------------------------------------------------------------------
# Handlers


def _cmd_spectrum(cfg: dict, out: _Writer, threads: int) -> dict:
    species = _donor(cfg)
    b0 = _positive(cfg, "b0", strict=False)
    threshold = _positive(cfg, "threshold")
    quad = QuadrupoleParams(f_q=cfg["fq"], eta=cfg["eta"]) if cfg["fq"] else None
    if cfg["ionized"]:
        h = ionized_hamiltonian(species, b0, quad=quad)
        drive_op = spin_operators(species.nuclear_spin).x
        label_op = spin_operators(species.nuclear_spin).z
    else:
        h = neutral_hamiltonian(species, b0, quad=quad)
        system = SpinSystem((0.5, species.nuclear_spin), ("electron", "nucleus"))
        parts = {
            "electron": system.operators(0).x,
            "nuclear": system.operators(1).x,
            "both": system.operators(0).x + system.operators(1).x,
        }
        drive_op = parts[cfg["drive"]]
        label_op = system.operators(0).z + system.operators(1).z
    lines = transition_spectrum(h, drive_op, threshold=threshold, label_op=label_op)
    out.table(
        "spectrum",
        ["frequency_mhz", "intensity", "level_i", "level_f", "delta_m"],
        [(l.frequency, l.intensity, l.level_i, l.level_f, l.delta_m) for l in lines],
    )
    return {
        "n_lines": len(lines),
        "frequencies_mhz": [l.frequency for l in lines],
    }


def _cmd_rabi(cfg: dict, out: _Writer, threads: int) -> dict:
    f0 = _positive(cfg, "frequency")
    amp = _positive(cfg, "amplitude")
    f_drive = cfg["drive_frequency"] if cfg["drive_frequency"] is not None else f0
    t_max = cfg["tmax"] if cfg["tmax"] is not None else 2.0 / amp
    n = int(_positive(cfg, "points"))
    result = protocols.simulate_rabi(f0, f_drive, amp, np.linspace(0.0, t_max, n))
    out.table(
        "rabi",
        ["time_us", "population"],
        list(zip(result.times, result.signal)),
    )
    return dict(result.metadata)


def _cmd_ramsey(cfg: dict, out: _Writer, threads: int) -> dict:
    t2 = _positive(cfg, "t2_star")
    t_max = cfg["tmax"] if cfg["tmax"] is not None else 2.0 * t2
    n = int(_positive(cfg, "points"))
    noise = QuasiStaticGaussian(math.sqrt(2.0) / (2.0 * math.pi * t2))
    result = protocols.simulate_ramsey(
        cfg["detuning"],
        noise,
        np.linspace(0.0, t_max, n),
        n_samples=int(_positive(cfg, "samples")),
        seed=cfg["seed"],
    )
    err = result.signal_err if result.signal_err is not None else [None] * len(result.times)
    out.table(
        "ramsey",
        ["time_us", "signal", "signal_err"],
        list(zip(result.times, result.signal, err)),
    )
    return {"fitted_t2_star_us": result.fitted_time, **result.metadata}


def _cmd_cpmg(cfg: dict, out: _Writer, threads: int) -> dict:
    n_pulses = int(_positive(cfg, "n_pulses"))
    tau_max = _positive(cfg, "tau_max")
    n = int(_positive(cfg, "points"))
    if cfg["tone_freq"] is not None:
        noise: Any = PsdTable([cfg["tone_freq"]], [cfg["tone_power"]])
    else:
        noise = QuasiStaticGaussian(_positive(cfg, "sigma", strict=False))
    tau_grid = np.linspace(tau_max / n, tau_max, n)
    result = protocols.simulate_cpmg(
        n_pulses,
        tau_grid,
        noise,
        n_samples=int(_positive(cfg, "samples")),
        seed=cfg["seed"],
        fit_model=cfg["fit_model"],
    )
    out.table(
        "cpmg",
        ["tau_us", "total_time_us", "signal"],
        list(zip(tau_grid, result.times, result.signal)),
    )
    return {"fitted_t2_us": result.fitted_time, **result.metadata}


def _cmd_readout(cfg: dict, out: _Writer, threads: int) -> dict:
    params = protocols.ReadoutParams(
        zeeman_mhz=_positive(cfg, "zeeman"),
        temperature_k=_positive(cfg, "temperature", strict=False),
        rate_out_per_us=_positive(cfg, "rate_out", strict=False),
        rate_in_per_us=_positive(cfg, "rate_in", strict=False),
        bandwidth_mhz=_positive(cfg, "bandwidth"),
        window_us=_positive(cfg, "window"),
        fermi_offset_mhz=cfg["offset"],
    )
    result = protocols.spin_to_charge_readout(
        params, n_shots=int(_positive(cfg, "shots")), seed=cfg["seed"]
    )
    rows = [
        (
            result.fidelity_up,
            result.fidelity_down,
            result.visibility,
            result.post_state,
            result.n_shots,
        )
    ]
    out.table(
        "readout",
        ["fidelity_up", "fidelity_down", "visibility", "post_state", "n_shots"],
        rows,
    )
    return {
        "fidelity_up": result.fidelity_up,
        "fidelity_down": result.fidelity_down,
        "visibility": result.visibility,
    }


def _cmd_qnd(cfg: dict, out: _Writer, threads: int) -> dict:
    f_e = cfg["fe"]
    if not 0.5 < f_e <= 1.0:
        raise _fail("fe", f"electron fidelity must lie in (0.5, 1], got {f_e}")
    p_flip = cfg["pflip"]
    if not 0.0 <= p_flip < 0.5:
        raise _fail("pflip", f"flip probability must lie in [0, 0.5), got {p_flip}")
    n_max = int(_positive(cfg, "n_max"))
    curve = protocols.qnd_readout_sweep(
        f_e, p_flip, n_max, n_shots=int(_positive(cfg, "shots")), seed=cfg["seed"]
    )
    exact = [protocols.qnd_fidelity_exact(f_e, n, p_flip) for n in range(1, n_max + 1)]
    out.table(
        "qnd",
        ["n_cycles", "fidelity_mc", "fidelity_exact"],
        [(k + 1, curve[k], exact[k]) for k in range(n_max)],
    )
    best = int(np.argmax(exact))
    return {
        "best_n_cycles": best + 1,
        "best_fidelity_exact": exact[best],
        "best_fidelity_mc": float(curve[best]),
    }


def _cmd_crot(cfg: dict, out: _Writer, threads: int) -> dict:
    species = _donor(cfg)
    params = multiqubit.TwoDonorParams(
        species1=species,
        species2=species,
        j_mhz=_positive(cfg, "j", strict=False),
        b0_t=_positive(cfg, "b0"),
        a1_mhz=cfg["a1"],
        a2_mhz=cfg["a2"],
    )
    threshold = _positive(cfg, "threshold")
    lines = multiqubit.crot_spectrum(params, threshold=threshold)
    out.table(
        "crot_spectrum",
        ["frequency_mhz", "intensity", "label", "delta_m"],
        [(l.frequency, l.intensity, l.label, l.delta_m) for l in lines],
    )
    conditional = [l for l in lines if l.label and l.label.startswith("conditional")]
    results: dict[str, Any] = {
        "n_lines": len(lines),
        "n_conditional": len(conditional),
    }
    if conditional:
        idx = int(cfg["line_index"])
        if not 0 <= idx < len(conditional):
            raise _fail("line_index", f"have {len(conditional)} conditional lines")
        gate = multiqubit.crot_gate(
            params,
            conditional[idx],
            rabi_mhz=_positive(cfg, "rabi"),
            duration_us=cfg["duration"],
            threshold=threshold,
        )
        results.update(
            {
                "gate_fidelity": gate.fidelity,
                "gate_leakage": gate.leakage,
                "gate_duration_us": gate.duration_us,
                "line_frequency_mhz": gate.line.frequency,
                "target_qubit": gate.target_qubit,
                "control_state": gate.control_state,
            }
        )
    return results


def _cmd_flipflop(cfg: dict, out: _Writer, threads: int) -> dict:
    species = _donor(cfg)
    a_eff = cfg["aeff"] if cfg["aeff"] is not None else species.hyperfine_mhz
    params = multiqubit.FlipFlopParams(
        species=species,
        a_eff_mhz=a_eff,
        b0_t=_positive(cfg, "b0", strict=False),
        da_de_mhz_per_v_m=cfg["da_de"],
        r_nm=_positive(cfg, "r"),
        g_ref_mhz=cfg["g_ref"],
        r_ref_nm=_positive(cfg, "r_ref"),
    )
    splitting = multiqubit.flipflop_splitting(params)
    dipole = multiqubit.flipflop_dipole_coupling(
        params.r_nm, params.g_ref_mhz, params.r_ref_nm
    )
    results: dict[str, Any] = {
        "splitting_mhz": splitting,
        "dipole_coupling_mhz": dipole,
    }
    if cfg["da_de"] is not None and cfg["eac"] is not None:
        edsr = multiqubit.edsr_rabi(params, cfg["eac"])
        results["edsr_rabi_mhz"] = edsr.f_rabi_mhz
        results["edsr_pi_time_us"] = edsr.pi_time_us
    out.table(
        "flipflop",
        ["quantity", "value"],
        [(k, v) for k, v in results.items()],
    )
    return results


def _cmd_ner(cfg: dict, out: _Writer, threads: int) -> dict:
    species = _donor(cfg)
    if species.nuclear_spin <= 0.5:
        raise _fail("donor", f"{species.name} has no quadrupole spectrum (I = 1/2)")
    amp = _positive(cfg, "amplitude")
    maker = ner.NerDrive.xz if cfg["drive"] == "xz" else ner.NerDrive.x2_minus_y2
    sim = ner.ner_spectrum_sim(
        species,
        _positive(cfg, "b0"),
        cfg["fq"],
        maker(amp, 0.0),
        t2n_star_us=_positive(cfg, "t2n_star"),
        threshold=cfg["threshold"],
        n_rabi_points=int(_positive(cfg, "rabi_points")),
        n_ramsey_samples=int(_positive(cfg, "ramsey_samples")),
        seed=cfg["seed"],
    )
    rows = []
    for line, trace in zip(sim.spectrum, sim.rabi_traces):
        rows.append(
            (
                line.frequency,
                line.intensity,
                line.delta_m,
                trace.metadata.get("matrix_element_mhz"),
                trace.metadata.get("rabi_frequency_mhz"),
            )
        )
    out.table(
        "ner_lines",
        ["frequency_mhz", "intensity", "delta_m", "matrix_element_mhz", "rabi_mhz"],
        rows,
    )
    out.table(
        "ner_ramsey",
        ["time_us", "signal"],
        list(zip(sim.ramsey.times, sim.ramsey.signal)),
    )
    return {
        "n_lines": len(sim.spectrum),
        "nu_q_mhz": sim.nu_q_mhz,
        "fitted_t2n_star_us": sim.ramsey.fitted_time,
    }


def _top_params(cfg: dict) -> chaos.TopParams:
    try:
        return chaos.TopParams(
            c1_mhz=cfg["c1"],
            c2_mhz=cfg["c2"],
            cd_mhz=cfg["cd"],
            nu_mhz=cfg["nu"],
            l_norm=cfg.get("lnorm", 1.0),
        )
    except ValueError as exc:
        raise _fail("nu", exc) from None


def _cmd_chaos_classical(cfg: dict, out: _Writer, threads: int) -> dict:
    params = _top_params(cfg)
    l0 = chaos.angles_to_direction(cfg["theta"], cfg["phi"])
    n_periods = int(_positive(cfg, "periods"))
    steps = int(_positive(cfg, "steps"))
    traj = chaos.classical_trajectory(params, l0, n_periods, steps)
    out.table(
        "strobes",
        ["period", "time_us", "lx", "ly", "lz"],
        [
            (k, traj.strobe_times[k], *traj.strobes[k])
            for k in range(traj.strobes.shape[0])
        ],
    )
    norms = np.linalg.norm(traj.points, axis=1)
    results: dict[str, Any] = {
        "norm_drift": float(np.max(np.abs(norms - params.l_norm))),
    }
    if cfg["lyapunov"]:
        results["lyapunov_per_us"] = chaos.lyapunov_exponent(
            params, l0, n_periods=n_periods, steps_per_period=steps
        )
    return results


def _cmd_chaos_quantum(cfg: dict, out: _Writer, threads: int) -> dict:
    spin = _positive(cfg, "spin")
    params = _top_params(cfg).with_l_norm(spin)
    state0 = chaos.spin_coherent_state(spin, cfg["theta"], cfg["phi"])
    strobo = chaos.quantum_stroboscopic(
        params,
        spin,
        state0,
        int(_positive(cfg, "periods")),
        dephasing_rate_per_us=_positive(cfg, "dephasing", strict=False),
        steps_per_period=int(_positive(cfg, "steps")),
    )
    ops = spin_operators(spin)
    rows = []
    for k in range(strobo.times.size):
        rho = strobo.states[k]
        rows.append(
            (
                k,
                strobo.times[k],
                strobo.purities[k],
                float(np.trace(rho @ ops.x).real),
                float(np.trace(rho @ ops.y).real),
                float(np.trace(rho @ ops.z).real),
            )
        )
    out.table("stroboscopic", ["period", "time_us", "purity", "ix", "iy", "iz"], rows)
    return {"final_purity": float(strobo.purities[-1])}


def _cmd_purity_map(cfg: dict, out: _Writer, threads: int) -> dict:
    spin = _positive(cfg, "spin")
    params = _top_params(cfg).with_l_norm(spin)
    n_theta = int(_positive(cfg, "n_theta"))
    n_phi = int(_positive(cfg, "n_phi"))
    result = chaos.purity_map(
        params,
        spin,
        np.linspace(0.0, math.pi, n_theta),
        np.linspace(0.0, 2.0 * math.pi, n_phi, endpoint=False),
        int(_positive(cfg, "periods")),
        dephasing_rate_per_us=_positive(cfg, "dephasing", strict=False),
        steps_per_period=int(_positive(cfg, "steps")),
    )
    rows = [
        (result.theta[i], result.phi[j], result.purity[i, j])
        for i in range(n_theta)
        for j in range(n_phi)
    ]
    out.table("purity_map", ["theta", "phi", "purity"], rows)
    return {
        "min_purity": float(result.purity.min()),
        "max_purity": float(result.purity.max()),
        "mean_purity": float(result.purity.mean()),
    }


def _cmd_sense(cfg: dict, out: _Writer, threads: int) -> dict:
    targets = ["electron", "31P", "31P+"] if cfg["target"] == "all" else [cfg["target"]]
    c_eff = cfg["c_eff"]
    rows = []
    results = {}

    def one(target: str):
        spec = sensing.sensor_from_benchmark(target, c_eff=c_eff)
        eta = sensing.magnetic_sensitivity(spec)
        return spec, eta

    with ThreadPoolExecutor(max_workers=threads) as pool:
        for target, (spec, eta) in zip(targets, pool.map(one, targets)):
            rows.append(
                (
                    target,
                    spec.gamma_mhz_per_t,
                    spec.t2_star_us,
                    spec.t2_cpmg_us,
                    eta.eta_dc_t_sqrt_hz,
                    eta.eta_ac_t_sqrt_hz,
                    si_magnetic_field(eta.eta_dc_t_sqrt_hz, "/sqrt(Hz)"),
                    si_magnetic_field(eta.eta_ac_t_sqrt_hz, "/sqrt(Hz)"),
                )
            )
            results[target] = {
                "eta_dc_t_sqrt_hz": eta.eta_dc_t_sqrt_hz,
                "eta_ac_t_sqrt_hz": eta.eta_ac_t_sqrt_hz,
            }
    out.table(
        "sensitivity",
        [
            "target",
            "gamma_mhz_per_t",
            "t2_star_us",
            "t2_cpmg_us",
            "eta_dc_t_sqrt_hz",
            "eta_ac_t_sqrt_hz",
            "eta_dc_pretty",
            "eta_ac_pretty",
        ],
        rows,
    )
    return results


def _cmd_strain(cfg: dict, out: _Writer, threads: int) -> dict:
    strain = cfg["strain"]
    linewidth = _positive(cfg, "linewidth")
    rows = []
    for name, species in DONORS.items():
        if species.strain_k is None:
            continue
        for regime in ("low", "high"):
            shift = sensing.strain_shift(species, strain, regime)
            rows.append(
                (
                    name,
                    regime,
                    shift.delta_a_mhz,
                    shift.delta_nu_mhz,
                    sensing.min_detectable_strain(species, linewidth, regime),
                    shift.beyond_linear_regime,
                )
            )
    out.table(
        "strain",
        ["donor", "regime", "delta_a_mhz", "delta_nu_mhz", "min_strain", "beyond_linear"],
        rows,
    )
    species = _donor(cfg)
    if species.strain_k is None:
        raise _fail("donor", f"no strain coefficient tabulated for {species.name}")
    shift = sensing.strain_shift(species, strain, cfg["regime"])
    return {
        "delta_a_mhz": shift.delta_a_mhz,
        "delta_nu_mhz": shift.delta_nu_mhz,
        "min_detectable_strain": sensing.min_detectable_strain(
            species, linewidth, cfg["regime"]
        ),
        "beyond_linear_regime": shift.beyond_linear_regime,
    }


def _cavity_params(cfg: dict) -> cav_mod.CavityParams:
    try:
        return cav_mod.CavityParams(
            f_c_mhz=cfg["fc"], kappa_mhz=cfg["kappa"], q=cfg["q"]
        )
    except ValueError as exc:
        raise _fail("kappa", exc) from None


def _cmd_cavity(cfg: dict, out: _Writer, threads: int) -> dict:
    cavity = _cavity_params(cfg)
    try:
        ens = cav_mod.EnsembleParams(
            n_spins=int(cfg["n"]),
            g0_mhz=cfg["g0"],
            gamma_mhz=cfg["gamma"],
            distribution=cfg["distribution"],
        )
        coop = cav_mod.cooperativity(cavity, ens)
        n_star = cav_mod.spins_for_cooperativity(cavity, ens.g0_mhz, ens.gamma_mhz)
    except ValueError as exc:
        raise _fail("n", exc) from None
    purcell = cav_mod.purcell_rate(ens.g0_mhz, cavity.kappa, cfg["delta"])
    modes = cav_mod.vacuum_rabi_splitting(cavity, ens)
    results = {
        "cooperativity": coop.c,
        "g_ens_mhz": coop.g_ens_mhz,
        "n_for_unit_cooperativity": n_star,
        "purcell_mhz": purcell,
        "mode_splitting_mhz": modes.splitting_mhz,
        "f_lower_mhz": modes.f_lower_mhz,
        "f_upper_mhz": modes.f_upper_mhz,
    }
    out.table("cavity", ["quantity", "value"], [(k, v) for k, v in results.items()])
    return results


def _cmd_storage(cfg: dict, out: _Writer, threads: int) -> dict:
    cavity = _cavity_params(cfg)
    try:
        ens = cav_mod.EnsembleParams(
            n_spins=int(cfg["n"]),
            g0_mhz=cfg["g0"],
            gamma_mhz=cfg["gamma"],
            distribution=cfg["distribution"],
        )
        pulse = cav_mod.InputPulse(cfg["pulse"], cfg["duration"])
    except ValueError as exc:
        raise _fail("pulse", exc) from None
    result = cav_mod.photon_storage_sim(
        cavity,
        ens,
        pulse,
        kappa_ext_mhz=cfg["kappa_ext"],
        m_groups=int(_positive(cfg, "groups")),
        n_times=int(_positive(cfg, "times")),
    )
    out.table(
        "storage",
        [
            "time_us",
            "cavity_population",
            "spin_population",
            "reflected_energy",
            "internal_loss",
            "input_energy",
        ],
        list(
            zip(
                result.times,
                result.cavity_population,
                result.spin_population,
                result.reflected_energy,
                result.internal_loss,
                result.input_energy,
            )
        ),
    )
    return {
        "absorbed_fraction": result.absorbed_fraction,
        "reflected_fraction": result.reflected_fraction,
        "cavity_fraction": result.cavity_fraction,
        "loss_fraction": result.loss_fraction,
        "energy_balance_error": result.energy_balance_error,
        "kappa_ext_mhz": result.kappa_ext_mhz,
    }


def _cmd_implant(cfg: dict, out: _Writer, threads: int) -> dict:
    try:
        ion = implantation.ion_lookup(cfg["ion"])
    except ValueError as exc:
        raise _fail("ion", exc) from None
    try:
        det = implantation.DetectorSpec(
            w_pair_ev=cfg["w_pair"],
            threshold_pairs=cfg["threshold"],
            noise_sigma_pairs=cfg["noise_sigma"],
        )
    except ValueError as exc:
        raise _fail("threshold", exc) from None
    spread = _positive(cfg, "spread", strict=False)
    n_ions = int(_positive(cfg, "ions"))

    # Fixed 16-way chunking: the split and each chunk's seed stream
    # depend only on --seed, so thread count cannot change the samples.
    n_chunks = 16
    mean = implantation.eh_pair_signal(ion.ionization_kev, det.w_pair_ev)
    sizes = [n_ions // n_chunks + (1 if k < n_ions % n_chunks else 0) for k in range(n_chunks)]

    def draw(k: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence((cfg["seed"], k)))
        pulses = rng.normal(mean, spread * mean, size=sizes[k])
        return pulses + rng.normal(0.0, det.noise_sigma, size=sizes[k])

    with ThreadPoolExecutor(max_workers=threads) as pool:
        pulses = np.concatenate(list(pool.map(draw, range(n_chunks))))
    detected = pulses > det.threshold_pairs
    counts, edges = np.histogram(pulses, bins=int(_positive(cfg, "bins")))
    out.table(
        "pulse_heights",
        ["bin_left_pairs", "bin_right_pairs", "count"],
        [(edges[i], edges[i + 1], int(counts[i])) for i in range(counts.size)],
    )
    exact = implantation.detection_probability_exact(ion, det, spread)
    return {
        "detection_prob_mc": float(np.mean(detected)),
        "detection_prob_exact": exact,
        "mean_pairs": mean,
        "placement_sigma_nm": implantation.placement_spread(
            ion, cfg["aperture"], cfg["stage"]
        ),
    }


def _cmd_yield(cfg: dict, out: _Writer, threads: int) -> dict:
    n_sites = int(_positive(cfg, "sites"))
    f = cfg["false_negative"]
    try:
        report = implantation.array_yield(n_sites, f)
    except ValueError as exc:
        raise _fail("false_negative", exc) from None
    results = {
        "p_all_correct": report.p_all_correct,
        "expected_exposures_per_site": report.expected_exposures_per_site,
        "expected_exposures_total": report.expected_exposures_per_site * n_sites,
    }
    out.table("yield", ["quantity", "value"], [(k, v) for k, v in results.items()])
    return results


# ---------------------------------------------------------------------------
# Command table


def _commands() -> dict[str, _Command]:
    cmds = [
        _Command(
            "spectrum",
            "static transition spectrum of one donor",
            (
                _Opt("donor", str, "31P", "donor species"),
                _Opt("b0", float, 1.0, "static field (T)"),
                _Opt("ionized", None, False, "bare nucleus instead of neutral donor", flag=True),
                _Opt("drive", str, "electron", "transverse drive target (neutral only)",
                     choices=("electron", "nuclear", "both")),
                _Opt("fq", float, 0.0, "quadrupole coupling f_q (MHz)"),
                _Opt("eta", float, 0.0, "quadrupole asymmetry"),
                _Opt("threshold", float, 1e-3, "intensity cutoff"),
            ),
            _cmd_spectrum,
        ),
        _Command(
            "rabi",
            "driven two-level oscillation on one transition",
            (
                _Opt("frequency", float, None, "transition frequency (MHz)", required=True),
                _Opt("amplitude", float, None, "drive amplitude (MHz)", required=True),
                _Opt("drive_frequency", float, None, "drive carrier (MHz, default resonant)"),
                _Opt("tmax", float, None, "trace length (us, default two flops)"),
                _Opt("points", int, 201, "trace points"),
            ),
            _cmd_rabi,
        ),
        _Command(
            "ramsey",
            "free-induction decay under quasi-static detuning noise",
            (
                _Opt("detuning", float, 0.1, "deliberate detuning (MHz)"),
                _Opt("t2_star", float, 20.0, "target T2* (us) setting the noise width"),
                _Opt("tmax", float, None, "trace length (us, default 2 T2*)"),
                _Opt("points", int, 101, "trace points"),
                _Opt("samples", int, 10000, "Monte Carlo samples"),
            ),
            _cmd_ramsey,
        ),
        _Command(
            "cpmg",
            "multipulse decoupling decay versus inter-pulse spacing",
            (
                _Opt("n_pulses", int, 8, "number of pi pulses"),
                _Opt("sigma", float, 0.05, "quasi-static noise width (MHz)"),
                _Opt("tone_freq", float, None, "replace noise by one tone at this frequency (MHz)"),
                _Opt("tone_power", float, 1e-4, "tone variance (MHz^2)"),
                _Opt("tau_max", float, 50.0, "largest inter-pulse spacing (us)"),
                _Opt("points", int, 81, "grid points"),
                _Opt("samples", int, 5000, "Monte Carlo samples"),
                _Opt("fit_model", str, "gaussian", "decay fit model",
                     choices=("gaussian", "exponential", "stretched")),
            ),
            _cmd_cpmg,
        ),
        _Command(
            "readout",
            "energy-selective spin-to-charge readout fidelity",
            (
                _Opt("zeeman", float, 28000.0, "electron Zeeman splitting (MHz)"),
                _Opt("temperature", float, 0.05, "electron temperature (K)"),
                _Opt("rate_out", float, 0.2, "ionization attempt rate (1/us)"),
                _Opt("rate_in", float, 0.02, "neutralization attempt rate (1/us)"),
                _Opt("bandwidth", float, 0.2, "charge-detector bandwidth (MHz)"),
                _Opt("window", float, 300.0, "readout window (us)"),
                _Opt("offset", float, 0.0, "Fermi-level offset from midgap (MHz)"),
                _Opt("shots", int, 20000, "Monte Carlo shots per initial state"),
            ),
            _cmd_readout,
        ),
        _Command(
            "qnd",
            "repetitive nuclear readout fidelity versus cycle count",
            (
                _Opt("fe", float, 0.92, "single-cycle electron readout fidelity"),
                _Opt("pflip", float, 1e-4, "nuclear flip probability per cycle"),
                _Opt("n_max", int, 200, "largest cycle count"),
                _Opt("shots", int, 100000, "Monte Carlo shots"),
            ),
            _cmd_qnd,
        ),
        _Command(
            "crot",
            "exchange-coupled pair spectrum and conditional-rotation gate",
            (
                _Opt("donor", str, "31P", "donor species (both sites)"),
                _Opt("a1", float, None, "site-1 hyperfine (MHz, default species value)"),
                _Opt("a2", float, None, "site-2 hyperfine (MHz, default species value)"),
                _Opt("j", float, 32.06, "exchange coupling (MHz)"),
                _Opt("b0", float, 1.4, "static field (T)"),
                _Opt("rabi", float, 0.2, "gate Rabi frequency (MHz)"),
                _Opt("duration", float, None, "gate duration (us, default one pi pulse)"),
                _Opt("line_index", int, 0, "which conditional line drives the gate"),
                _Opt("threshold", float, 1e-3, "spectrum intensity cutoff"),
            ),
            _cmd_crot,
        ),
        _Command(
            "flipflop",
            "electron-nuclear flip-flop qubit figures",
            (
                _Opt("donor", str, "31P", "donor species"),
                _Opt("b0", float, 0.4, "static field (T)"),
                _Opt("aeff", float, None, "effective hyperfine (MHz, default species value)"),
                _Opt("da_de", float, None, "hyperfine Stark slope (MHz per V/m)"),
                _Opt("eac", float, None, "drive field amplitude (V/m)"),
                _Opt("r", float, 200.0, "pair separation (nm)"),
                _Opt("g_ref", float, 10.0, "dipole coupling at the reference separation (MHz)"),
                _Opt("r_ref", float, 200.0, "reference separation (nm)"),
            ),
            _cmd_flipflop,
        ),
        _Command(
            "ner",
            "electrically driven nuclear resonance spectrum",
            (
                _Opt("donor", str, "123Sb", "high-spin donor species"),
                _Opt("b0", float, 1.0, "static field (T)"),
                _Opt("fq", float, 0.011, "quadrupole coupling f_q (MHz)"),
                _Opt("drive", str, "xz", "quadratic drive tensor",
                     choices=("xz", "x2_minus_y2")),
                _Opt("amplitude", float, 0.01, "drive strength (MHz)"),
                _Opt("t2n_star", float, 92000.0, "nuclear T2* (us) for the Ramsey trace"),
                _Opt("threshold", float, 1e-6, "relative intensity cutoff"),
                _Opt("rabi_points", int, 120, "points per Rabi trace"),
                _Opt("ramsey_samples", int, 2000, "Ramsey Monte Carlo samples"),
            ),
            _cmd_ner,
        ),
        _Command(
            "chaos-classical",
            "driven-top trajectory, Poincare strobes, optional Lyapunov",
            (
                _Opt("c1", float, chaos.DEFAULT_TOP.c1_mhz, "linear z coefficient (MHz)"),
                _Opt("c2", float, chaos.DEFAULT_TOP.c2_mhz, "quadratic x coefficient (MHz)"),
                _Opt("cd", float, chaos.DEFAULT_TOP.cd_mhz, "drive amplitude (MHz)"),
                _Opt("nu", float, chaos.DEFAULT_TOP.nu_mhz, "drive frequency (MHz)"),
                _Opt("lnorm", float, chaos.DEFAULT_TOP.l_norm, "angular momentum length"),
                _Opt("theta", float, chaos.CHAOTIC_POINT[0], "launch polar angle"),
                _Opt("phi", float, chaos.CHAOTIC_POINT[1], "launch azimuth"),
                _Opt("periods", int, 200, "drive periods"),
                _Opt("steps", int, 256, "integrator steps per period"),
                _Opt("lyapunov", None, False, "also estimate the Lyapunov exponent", flag=True),
            ),
            _cmd_chaos_classical,
        ),
        _Command(
            "chaos-quantum",
            "stroboscopic quantum evolution of the driven top",
            (
                _Opt("c1", float, chaos.DEFAULT_TOP.c1_mhz, "linear z coefficient (MHz)"),
                _Opt("c2", float, chaos.DEFAULT_TOP.c2_mhz, "quadratic x coefficient (MHz)"),
                _Opt("cd", float, chaos.DEFAULT_TOP.cd_mhz, "drive amplitude (MHz)"),
                _Opt("nu", float, chaos.DEFAULT_TOP.nu_mhz, "drive frequency (MHz)"),
                _Opt("spin", float, 4.5, "spin quantum number"),
                _Opt("theta", float, chaos.CHAOTIC_POINT[0], "coherent-state polar angle"),
                _Opt("phi", float, chaos.CHAOTIC_POINT[1], "coherent-state azimuth"),
                _Opt("periods", int, 100, "drive periods"),
                _Opt("dephasing", float, 0.0, "Iz dephasing rate (1/us)"),
                _Opt("steps", int, 1024, "propagator steps per period"),
            ),
            _cmd_chaos_quantum,
        ),
        _Command(
            "purity-map",
            "final purity over a grid of spin-coherent launch points",
            (
                _Opt("c1", float, chaos.DEFAULT_TOP.c1_mhz, "linear z coefficient (MHz)"),
                _Opt("c2", float, chaos.DEFAULT_TOP.c2_mhz, "quadratic x coefficient (MHz)"),
                _Opt("cd", float, chaos.DEFAULT_TOP.cd_mhz, "drive amplitude (MHz)"),
                _Opt("nu", float, chaos.DEFAULT_TOP.nu_mhz, "drive frequency (MHz)"),
                _Opt("spin", float, 4.5, "spin quantum number"),
                _Opt("n_theta", int, 25, "polar grid points"),
                _Opt("n_phi", int, 25, "azimuthal grid points"),
                _Opt("periods", int, 20, "drive periods"),
                _Opt("dephasing", float, 0.01, "Iz dephasing rate (1/us)"),
                _Opt("steps", int, 256, "propagator steps per period"),
            ),
            _cmd_purity_map,
        ),
        _Command(
            "sense",
            "dc and ac magnetic field sensitivity of benchmark qubits",
            (
                _Opt("target", str, "all", "which qubit flavour",
                     choices=("electron", "31P", "31P+", "all")),
                _Opt("c_eff", float, 1.0, "detection efficiency factor"),
            ),
            _cmd_sense,
        ),
        _Command(
            "strain",
            "hyperfine strain response across the donor registry",
            (
                _Opt("donor", str, "31P", "donor highlighted in the summary"),
                _Opt("strain", float, 1e-4, "applied strain"),
                _Opt("regime", str, "low", "field regime", choices=("low", "high")),
                _Opt("linewidth", float, 2e-3, "detection linewidth (MHz)"),
            ),
            _cmd_strain,
        ),
        _Command(
            "cavity",
            "ensemble-resonator coupling figures of merit",
            (
                _Opt("fc", float, 7400.0, "cavity frequency (MHz)"),
                _Opt("kappa", float, None, "cavity linewidth (MHz)"),
                _Opt("q", float, 1e6, "quality factor (used when kappa is unset)"),
                _Opt("n", int, 1000000, "spin count"),
                _Opt("g0", float, 0.003, "single-spin coupling (MHz)"),
                _Opt("gamma", float, 0.0018, "spin line HWHM (MHz)"),
                _Opt("delta", float, 0.0, "spin-cavity detuning for the Purcell rate (MHz)"),
                _Opt("distribution", str, "gaussian", "spin lineshape",
                     choices=("gaussian", "lorentzian")),
            ),
            _cmd_cavity,
        ),
        _Command(
            "storage",
            "time-domain photon absorption by a broadened ensemble",
            (
                _Opt("fc", float, 7400.0, "cavity frequency (MHz)"),
                _Opt("kappa", float, 0.001, "internal cavity linewidth (MHz)"),
                _Opt("q", float, None, "quality factor (alternative to kappa)"),
                _Opt("n", int, 111000, "spin count"),
                _Opt("g0", float, 0.003, "single-spin coupling (MHz)"),
                _Opt("gamma", float, 0.5, "spin line HWHM (MHz)"),
                _Opt("distribution", str, "gaussian", "spin lineshape",
                     choices=("gaussian", "lorentzian")),
                _Opt("kappa_ext", float, None, "port coupling (MHz, default matched)"),
                _Opt("pulse", str, "gaussian", "input envelope", choices=("gaussian", "square")),
                _Opt("duration", float, 8.0, "pulse window (us)"),
                _Opt("groups", int, 201, "detuning groups"),
                _Opt("times", int, 801, "trace points"),
            ),
            _cmd_storage,
        ),
        _Command(
            "implant",
            "single-ion detection Monte Carlo and placement spread",
            (
                _Opt("ion", str, "31P", "implanted ion species"),
                _Opt("w_pair", float, 3.67, "pair-creation energy (eV)"),
                _Opt("threshold", float, 110.0, "detection threshold (pairs)"),
                _Opt("noise_sigma", float, None, "detector noise sigma (pairs, default threshold/5)"),
                _Opt("spread", float, 0.1, "relative signal spread per ion"),
                _Opt("ions", int, 10000, "Monte Carlo ions"),
                _Opt("bins", int, 60, "histogram bins"),
                _Opt("aperture", float, 10.0, "nanostencil aperture diameter (nm)"),
                _Opt("stage", float, 2.0, "stage positioning sigma (nm)"),
            ),
            _cmd_implant,
        ),
        _Command(
            "yield",
            "detect-until-hit array construction statistics",
            (
                _Opt("sites", int, 100, "array sites"),
                _Opt("false_negative", float, 0.05, "missed-detection probability"),
            ),
            _cmd_yield,
        ),
    ]
    return {c.name: c for c in cmds}


_COMMANDS = _commands()


# ---------------------------------------------------------------------------
# Parsing and dispatch


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="donorsim",
        description="Donor-spin simulations with plot-ready CSV/JSON output.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")
    for cmd in _COMMANDS.values():
        p = sub.add_parser(cmd.name, help=cmd.summary, description=cmd.summary)
        for opt in cmd.options + _COMMON_OPTS:
            flag = f"--{opt.name}"
            if opt.flag:
                p.add_argument(flag, action="store_true", default=argparse.SUPPRESS,
                               help=opt.help)
            else:
                p.add_argument(flag, type=opt.type, choices=opt.choices,
                               default=argparse.SUPPRESS, help=opt.help)
    return parser


def _coerce(opt: _Opt, value: Any) -> Any:
    """Validate one config-file value against its option declaration."""
    if opt.flag:
        if not isinstance(value, bool):
            raise _fail("config", f"key {opt.name!r} expects true/false")
        return value
    if value is None:
        return None
    if opt.type is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        value = float(value)
    elif opt.type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise _fail("config", f"key {opt.name!r} expects an integer")
    elif not isinstance(value, opt.type):
        raise _fail("config", f"key {opt.name!r} expects {opt.type.__name__}")
    if opt.choices is not None and value not in opt.choices:
        raise _fail("config", f"key {opt.name!r} must be one of {list(opt.choices)}")
    return value


def _resolve_config(cmd: _Command, namespace: argparse.Namespace) -> dict:
    opts = {o.name: o for o in cmd.options + _COMMON_OPTS}
    resolved = {name: o.default for name, o in opts.items()}
    explicit = {k: v for k, v in vars(namespace).items() if k != "command"}

    config_path = explicit.get("config", None)
    if config_path is not None:
        try:
            payload = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise _fail("config", exc) from None
        except json.JSONDecodeError as exc:
            raise _fail("config", f"invalid JSON: {exc}") from None
        if not isinstance(payload, dict):
            raise _fail("config", "top level must be a JSON object")
        for key, value in payload.items():
            if key == "config" or key not in opts:
                raise _fail("config", f"unknown key {key!r} for subcommand {cmd.name}")
            resolved[key] = _coerce(opts[key], value)

    resolved.update(explicit)
    for opt in cmd.options:
        if opt.required and resolved[opt.name] is None:
            raise _fail(opt.name, "value required")
    return resolved


def _resolve_threads(cfg: dict) -> int:
    threads = cfg.get("threads")
    if threads is None:
        env = os.environ.get("DONORSIM_THREADS", "")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise CliError(f"DONORSIM_THREADS: not an integer: {env!r}") from None
    if threads is None:
        threads = os.cpu_count() or 1
    if threads < 1:
        raise _fail("threads", f"must be at least 1, got {threads}")
    return threads


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = _build_parser()
    try:
        namespace = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    cmd = _COMMANDS[namespace.command]

    try:
        cfg = _resolve_config(cmd, namespace)
        threads = _resolve_threads(cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        out_dir = Path(cfg["output_path"])
        out_dir.mkdir(parents=True, exist_ok=True)
        writer = _Writer(out_dir, cfg["format"])
        results = cmd.handler(cfg, writer, threads)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    # threads is wall-time-only and config is consumed here, so neither
    # belongs in the reproducibility echo.
    echo = {k: v for k, v in cfg.items() if k not in ("config", "threads")}
    summary = {
        "command": cmd.name,
        "config": echo,
        "outputs": sorted(writer.paths),
        "results": results,
    }
    print(to_json(summary, compact=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
