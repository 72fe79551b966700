"""Acceptance suite: twelve release gates, one test per criterion.

Each test prints a single ``criterion NN PASS`` line once its
assertions hold, so ``pytest -v tests/test_acceptance.py`` reads as a
checklist.  Tolerances are stated inline; the chaos criterion is the
slow one (tens of seconds), everything else is near-instant.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest

import donorsim
from donorsim import (
    BENCHMARKS,
    CHAOTIC_POINT,
    DEFAULT_TOP,
    DONORS,
    GAMMA_E_MHZ_PER_T,
    ION_TABLE,
    CavityParams,
    DetectorSpec,
    EnsembleParams,
    InputPulse,
    IonSpec,
    NerDrive,
    TopParams,
    TwoDonorParams,
    ac_sensitivity,
    breit_rabi_levels,
    classical_trajectory,
    cooperativity,
    crot_gate,
    crot_spectrum,
    dc_sensitivity,
    detection_probability_exact,
    esr_frequencies,
    ion_detection_mc,
    lyapunov_exponent,
    lyapunov_map,
    min_detectable_strain,
    neutral_hamiltonian,
    ner_matrix_element,
    ner_spectrum_sim,
    photon_storage_sim,
    placement_spread,
    purcell_rate,
    purity_map,
    qnd_fidelity_exact,
    quadrupole_line_shifts,
    sensor_from_benchmark,
    simulate_cpmg,
    simulate_ramsey,
    spins_for_cooperativity,
    strain_shift,
)
from donorsim.chaos import angles_to_direction
from donorsim.cli import main
from donorsim.dynamics import PsdTable, QuasiStaticGaussian
from donorsim.implantation import ion_table_from_json, ion_table_to_json
from donorsim.protocols import coherence_from_psd, cpmg_pattern, filter_weight
from donorsim.reporting import to_json
from donorsim.spincore import Benchmarks, registry_from_json, registry_to_json


def _announce(n: int, text: str) -> None:
    print(f"criterion {n:02d} PASS: {text}")


def test_criterion_01_registry_round_trip():
    """Species, benchmark, and implant tables survive JSON exactly."""
    assert registry_from_json(registry_to_json()) == DONORS
    rebuilt = {
        name: Benchmarks(**fields)
        for name, fields in json.loads(to_json(BENCHMARKS)).items()
    }
    assert rebuilt == BENCHMARKS
    assert ion_table_from_json(ion_table_to_json()) == ION_TABLE

    # Spot anchors pin the registries to the published numbers.
    assert DONORS["31P"].hyperfine_mhz == 117.53
    assert DONORS["209Bi"].nuclear_spin == 4.5
    assert DONORS["209Bi"].hyperfine_mhz == 1475.4
    assert DONORS["121Sb"].quadrupole_moment_range == (-0.36, -0.54)
    assert BENCHMARKS["electron"].t2_cpmg_s == 0.55
    assert BENCHMARKS["31P+"].t2_star_ms == 600.0
    assert [ion.eh_pairs for ion in ION_TABLE.values()] == [950, 1100, 870, 760]
    _announce(1, "tables round-trip through JSON unchanged")


def test_criterion_02_esr_spectrum_and_level_oracle():
    """Two 31P ESR lines near gamma_e B0 -+ A/2; closed-form levels
    match diagonalization to 1e-9 MHz."""
    species = DONORS["31P"]
    lines = esr_frequencies(species, 1.0)
    assert lines.size == 2
    first_order = np.sort(
        [GAMMA_E_MHZ_PER_T - species.hyperfine_mhz / 2,
         GAMMA_E_MHZ_PER_T + species.hyperfine_mhz / 2]
    )
    assert np.max(np.abs(lines - first_order)) < 0.3

    exact = np.sort(np.linalg.eigvalsh(neutral_hamiltonian(species, 1.0)))
    closed = breit_rabi_levels(species, 1.0)
    assert np.max(np.abs(exact - closed)) < 1e-9
    _announce(2, "31P ESR doublet and closed-form level cross-check")


def test_criterion_03_magnetometer_sensitivities():
    """Four benchmark sensitivities within 25% of the rounded published
    values and exactly equal to their own closed forms."""
    published = {
        ("electron", "dc"): 0.3e-9,
        ("electron", "ac"): 10e-12,
        ("31P+", "dc"): 10e-9,
        ("31P+", "ac"): 2e-9,
    }
    for (kind, mode), reported in published.items():
        spec = sensor_from_benchmark(kind)
        gamma_hz = spec.gamma_mhz_per_t * 1e6
        if mode == "dc":
            eta = dc_sensitivity(spec)
            closed = 1.0 / (2.0 * math.pi * gamma_hz * math.sqrt(spec.t2_star_us * 1e-6))
        else:
            eta = ac_sensitivity(spec)
            closed = 1.0 / (4.0 * gamma_hz * math.sqrt(spec.t2_cpmg_us * 1e-6))
        assert math.isclose(eta, closed, rel_tol=1e-12)
        assert abs(eta - reported) / reported < 0.25
    _announce(3, "dc/ac sensitivities match published magnitudes")


def test_criterion_04_strain_response():
    """31P shifts at 1e-4 strain and the Bi resolution floor."""
    resp = strain_shift(DONORS["31P"], 1e-4, regime="high")
    assert 0.9 <= resp.delta_a_mhz <= 1.0
    assert 0.45 <= resp.delta_nu_mhz <= 0.5
    floor = min_detectable_strain(DONORS["209Bi"], 0.002, regime="low")
    assert 1.0e-8 <= floor <= 2.0e-8
    _announce(4, "hyperfine strain shifts and Bi detection floor")


def test_criterion_05_crot_spectrum_and_gate():
    """Six-line exchange spectrum with J-split conditional pairs and a
    high-fidelity conditional pi rotation."""
    params = TwoDonorParams(
        species1=DONORS["31P"], species2=DONORS["31P"], j_mhz=32.06, b0_t=1.4
    )
    lines = crot_spectrum(params)
    assert len(lines) == 6

    conditional = sorted(
        (l for l in lines if l.label and l.label.startswith("conditional")),
        key=lambda l: l.frequency,
    )
    assert len(conditional) == 4
    for low, high in ((conditional[0], conditional[1]), (conditional[2], conditional[3])):
        split = high.frequency - low.frequency
        assert abs(split - 32.06) / 32.06 < 0.01

    gate = crot_gate(params, conditional[0], rabi_mhz=0.2)
    assert gate.fidelity > 0.99
    _announce(5, "six CROT lines, J-split pairs, pi fidelity > 0.99")


def test_criterion_06_ner_selection_rules():
    """Central transition dark, 6 of 7 quadrupole lines, comb spacing
    6 f_q, and delta-m = 2 lines only under the quadratic +-2 drive."""
    assert ner_matrix_element(3.5, 0.5, -0.5, "xz_sym") < 1e-14

    species = DONORS["123Sb"]
    f_q = 0.011
    comb = np.sort(
        [l.frequency for l in
         quadrupole_line_shifts(3.5, f_q, species.gamma_n_mhz_per_t, 1.0)]
    )
    assert comb.size == 7
    assert np.max(np.abs(np.diff(comb) - 6.0 * f_q)) < 1e-10

    sim = ner_spectrum_sim(
        species, 1.0, f_q, NerDrive.xz(0.001, 0.0),
        t2n_star_us=92_000.0, n_ramsey_samples=500,
    )
    observed = np.sort([line.frequency for line in sim.spectrum])
    assert observed.size == 6
    assert all(abs(line.delta_m) == 1 for line in sim.spectrum)
    # The six observed lines are the comb minus its central tooth.
    expected = np.delete(comb, 3)
    assert np.max(np.abs(observed - expected)) < 1e-9

    quadratic = ner_spectrum_sim(
        species, 1.0, f_q, NerDrive.x2_minus_y2(0.001, 0.0),
        t2n_star_us=92_000.0, n_ramsey_samples=500,
    )
    assert all(abs(line.delta_m) == 2 for line in quadratic.spectrum)
    _announce(6, "NER comb, dark center, and delta-m selection rules")


def test_criterion_07_coherence_protocols():
    """Ramsey envelope within 3 MC standard errors, perfect Hahn
    refocusing of quasi-static noise, CPMG passband position, and MC
    agreement with the filter-function oracle within 5%."""
    t2_star = 20.0
    sigma = math.sqrt(2.0) / (2.0 * math.pi * t2_star)
    times = np.linspace(0.0, 40.0, 31)
    ramsey = simulate_ramsey(
        0.0, QuasiStaticGaussian(sigma), times, n_samples=10_000, seed=0
    )
    envelope = np.exp(-((times / t2_star) ** 2))
    err = np.asarray(ramsey.signal_err)
    assert np.all(np.abs(ramsey.signal - envelope) <= 3.0 * err + 1e-12)

    echo = simulate_cpmg(
        1, np.linspace(1.0, 20.0, 8), QuasiStaticGaussian(1.0),
        n_samples=2000, seed=0,
    )
    assert np.min(echo.signal) > 0.999

    n, tau = 8, 5.0
    nu = np.arange(0.002, 0.4, 0.002)
    response = filter_weight(cpmg_pattern(n), nu, n * tau)
    peak = nu[np.argmax(response)]
    assert abs(peak - 1.0 / (2.0 * tau)) <= nu[1] - nu[0] + 1e-12

    grid = np.linspace(0.0, 3.0, 201)[1:]
    table = PsdTable(grid, 2e-4 / (1.0 + (grid / 0.3) ** 2))
    tau_grid = np.linspace(1.0, 12.0, 10)
    mc = simulate_cpmg(4, tau_grid, table, n_samples=4000, seed=1)
    for tau_k, w_mc in zip(tau_grid, mc.signal):
        w_ff = coherence_from_psd(table, cpmg_pattern(4), 4.0 * tau_k)
        if w_ff > 0.1:
            assert abs(w_mc - w_ff) / w_ff < 0.05
    _announce(7, "Ramsey/Hahn/CPMG against analytic coherence oracles")


def test_criterion_08_qnd_readout_gain():
    """Repetition lifts a 0.92 electron readout above 99.8% nuclear
    fidelity, with an interior optimum in the cycle count."""
    curve = [qnd_fidelity_exact(0.92, n, p_flip=1e-4) for n in range(1, 201)]
    best = int(np.argmax(curve))
    assert curve[best] > 0.998
    assert 0 < best < 199
    assert curve[best] > curve[0]
    assert curve[best] > curve[-1]
    _announce(8, f"QND fidelity {curve[best]:.4f} at {best + 1} cycles")


def test_criterion_09_chaos_map():
    """Classical conservation, integrable strobes, a positive Lyapunov
    exponent, and the purity contrast between chaotic and regular
    regions of the shipped configuration."""
    l0 = DEFAULT_TOP.l_norm * angles_to_direction(*CHAOTIC_POINT)
    traj = classical_trajectory(DEFAULT_TOP, l0, 1000, 128)
    drift = np.max(np.abs(np.linalg.norm(traj.points, axis=1) - DEFAULT_TOP.l_norm))
    assert drift < 1e-9

    integrable = TopParams(c1_mhz=1.0, c2_mhz=0.0, cd_mhz=0.0, nu_mhz=1.0, l_norm=4.5)
    strobes = classical_trajectory(
        integrable, 4.5 * angles_to_direction(1.1, 0.3), 400, 256
    ).strobes
    radii = np.hypot(strobes[:, 0], strobes[:, 1])
    assert radii.max() - radii.min() < 1e-6

    assert lyapunov_exponent(DEFAULT_TOP, l0, n_periods=100) > 0.0

    theta = np.linspace(0.0, math.pi, 25)
    phi = np.linspace(0.0, 2.0 * math.pi, 25, endpoint=False)
    exponents = lyapunov_map(DEFAULT_TOP, theta, phi, n_periods=250, steps_per_period=128)
    purities = purity_map(
        DEFAULT_TOP.with_l_norm(4.5), 4.5, theta, phi, 20,
        dephasing_rate_per_us=0.01, steps_per_period=256,
    ).purity
    chaotic = exponents > 0.3
    regular = exponents < 0.05
    assert chaotic.sum() > 50 and regular.sum() > 50
    mean_chaotic = purities[chaotic].mean()
    mean_regular = purities[regular].mean()
    assert mean_chaotic < 0.95 * mean_regular
    _announce(9, f"purity {mean_chaotic:.3f} chaotic vs {mean_regular:.3f} regular")


def test_criterion_10_cavity_figures():
    """Cooperativity crossing at two spins, the exact resonant Purcell
    identity, and matched photon storage with a closed energy budget."""
    cav = CavityParams(f_c_mhz=7400.0, kappa_mhz=0.0074)
    assert math.ceil(0.0074 * 0.0018 / 0.003**2) == 2
    assert spins_for_cooperativity(cav, 0.003, 0.0018) == 2
    assert cooperativity(cav, EnsembleParams(1, 0.003, 0.0018)).c < 1.0
    assert cooperativity(cav, EnsembleParams(2, 0.003, 0.0018)).c > 1.0

    rate = purcell_rate(0.003, 0.0074)
    assert math.isclose(rate, 4.0 * 0.003**2 / 0.0074, rel_tol=1e-12)

    storage = photon_storage_sim(
        CavityParams(f_c_mhz=7400.0, kappa_mhz=0.01),
        EnsembleParams(n_spins=111_000, g0_mhz=0.003, gamma_mhz=0.5),
        InputPulse("gaussian", 10.0),
    )
    assert storage.energy_balance_error < 1e-6
    assert storage.absorbed_fraction > 0.9
    _announce(10, f"C crossing at N=2, stored fraction {storage.absorbed_fraction:.3f}")


def test_criterion_11_implantation_statistics():
    """Fitted pair energy reproduces the table, the threshold converts
    to ~110 pairs, MC matches the Gaussian tail, and heavy ions place
    more tightly."""
    from donorsim import eh_pair_signal, fit_pair_energy

    w = fit_pair_energy()
    for ion in ION_TABLE.values():
        predicted = eh_pair_signal(ion.ionization_kev, w)
        assert abs(predicted - ion.eh_pairs) / ion.eh_pairs < 0.03
    assert 109.0 <= eh_pair_signal(0.4, w) <= 110.0

    det = DetectorSpec()
    marginal = IonSpec("31P", 14.0, 0.45, 950, 10.0)
    exact = detection_probability_exact(marginal, det)
    mc = ion_detection_mc(marginal, det, n_ions=20_000, seed=7)
    se = math.sqrt(exact * (1.0 - exact) / 20_000)
    assert abs(mc.detection_prob - exact) < 3.0 * se

    assert placement_spread(ION_TABLE["209Bi"], 10.0, 2.0) < placement_spread(
        ION_TABLE["31P"], 10.0, 2.0
    )
    _announce(11, "pair-energy fit, threshold conversion, MC tail, straggle order")


# Trimmed flags keep criterion 12 fast while still running every
# subcommand end to end.
_DETERMINISM_ARGS = {
    "spectrum": [],
    "rabi": ["--frequency", "100.0", "--amplitude", "1.4", "--points", "41"],
    "ramsey": ["--samples", "300", "--points", "31"],
    "cpmg": ["--samples", "200", "--points", "9", "--n_pulses", "4"],
    "readout": ["--shots", "2000"],
    "qnd": ["--n_max", "25", "--shots", "3000"],
    "crot": [],
    "flipflop": [],
    "ner": ["--rabi_points", "40", "--ramsey_samples", "300"],
    "chaos-classical": ["--periods", "20", "--steps", "128"],
    "chaos-quantum": ["--spin", "2.0", "--periods", "5", "--steps", "128"],
    "purity-map": ["--spin", "1.0", "--n_theta", "3", "--n_phi", "3",
                   "--periods", "2", "--steps", "64"],
    "sense": [],
    "strain": [],
    "cavity": [],
    "storage": ["--groups", "51", "--times", "101"],
    "implant": ["--ions", "4000"],
    "yield": [],
}


def _run_tree(root: Path, threads: int, capsys) -> dict[str, bytes]:
    files: dict[str, bytes] = {}
    for command, extra in _DETERMINISM_ARGS.items():
        out_dir = root / command
        code = main(
            [command, *extra, "--seed", "1", "--threads", str(threads),
             "--output_path", str(out_dir)]
        )
        capsys.readouterr()
        assert code == 0, f"{command} failed"
        for path in sorted(out_dir.iterdir()):
            files[f"{command}/{path.name}"] = path.read_bytes()
    return files


def test_criterion_12_determinism(tmp_path, capsys):
    """Byte-identical outputs across reruns and across 1 vs 4 threads
    for every subcommand."""
    from donorsim.cli import _COMMANDS

    assert set(_DETERMINISM_ARGS) == set(_COMMANDS)
    first = _run_tree(tmp_path / "run1", threads=1, capsys=capsys)
    second = _run_tree(tmp_path / "run2", threads=1, capsys=capsys)
    threaded = _run_tree(tmp_path / "run4", threads=4, capsys=capsys)
    assert first.keys() == second.keys() == threaded.keys()
    for name in first:
        assert first[name] == second[name], f"{name} differs between runs"
        assert first[name] == threaded[name], f"{name} differs across threads"
    _announce(12, f"{len(first)} output files byte-stable across runs and threads")
