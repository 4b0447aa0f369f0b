"""Acceptance criteria 1-10, one test each.

Each test stores its measured numbers with ``record_property("detail", ...)``;
the conftest hook prints one PASS/FAIL line per criterion after the run.
Tolerances are the contract values and are not relaxed.
"""

import itertools
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest

from qfmcw.bench import phase_averaged
from qfmcw.estimation import RecordSampler, run_monte_carlo, sample_record, simulate_two_segment
from qfmcw.fisher import cfi_general, qfi_general
from qfmcw.fmcw import FALLING, RISING, DiscreteGrid, ModulationProfile, TargetTruth, beat_params, invert_beats
from qfmcw.gaussian import check_physicality
from qfmcw.protocols import (
    ChannelModel,
    SfgParams,
    SourceParams,
    SviParams,
    apply_sfg,
    apply_svi,
    build_coherent_scenario,
    build_tmsv_qhd_scenario,
)

N = E = 1e-3
THETA = (2 * np.pi * 40.3, 0.7)


def db(x):
    return 10 * np.log10(x)


def coh(n_th, n=N, eps=E):
    return build_coherent_scenario(SourceParams("coherent", n), ChannelModel(eps, n_th))


def tmsv(n_th, n=N, eps=E):
    return build_tmsv_qhd_scenario(SourceParams("tmsv", n), ChannelModel(eps, n_th))


def sfg(n_th, eps_s, n=N, eps=E, exact_cov=False):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return apply_sfg(SourceParams("tmsv", n), ChannelModel(eps, n_th), SfgParams(eps_s, exact_cov))


def FQ(fam):
    return phase_averaged(qfi_general, fam)


def FC(fam):
    return phase_averaged(cfi_general, fam)


def test_criterion_01_closed_form_agreement(record_property):
    t = 0.37
    start = time.perf_counter()
    worst_exact = worst_sfg = worst_full_cov = 0.0
    for eps, n_th, n in itertools.product((1e-4, 1e-3, 1e-2), (0.0, 1.0, 10.0, 100.0), (1e-4, 1e-3, 1e-2)):
        ref_coh = 4 * t**2 * n * eps / (1 + 2 * n_th * (1 - eps))
        ref_tmsv = 4 * n * (1 + n) * t**2 * eps / (1 + n * (1 - eps) + n_th * (1 + 2 * n) * (1 - eps))
        got_coh = qfi_general(coh(n_th, n, eps), THETA, t)
        got_tmsv = qfi_general(tmsv(n_th, n, eps), THETA, t)
        worst_exact = max(worst_exact, abs(got_coh / ref_coh - 1), abs(got_tmsv / ref_tmsv - 1))
        if n * eps <= 1e-5:
            ref_sfg = 8 * t**2 * n * eps / (1 + 2 * n_th)
            got_sfg = qfi_general(sfg(n_th, 1.0, n, eps), THETA, t)
            worst_sfg = max(worst_sfg, abs(got_sfg / ref_sfg - 1))
            # the optional full output covariance adds O(n eps) information; reported only
            got_full = qfi_general(sfg(n_th, 1.0, n, eps, exact_cov=True), THETA, t)
            worst_full_cov = max(worst_full_cov, abs(got_full / ref_sfg - 1))
    elapsed = time.perf_counter() - start
    record_property("detail", f"coh/tmsv rel err {worst_exact:.2e} (<=1e-6), sfg {worst_sfg:.2e} (<=1e-4; full-covariance variant {worst_full_cov:.1e}), {elapsed:.2f}s (<10s)")
    assert worst_exact <= 1e-6
    assert worst_sfg <= 1e-4
    assert elapsed < 10


def test_criterion_02_tmsv_qfi_gain(record_property):
    strong = db(FQ(tmsv(1e3)) / FQ(coh(1e3)))
    weak = db(FQ(tmsv(1e-3)) / FQ(coh(1e-3)))
    record_property("detail", f"n_th=1e3: {strong:.4f} dB (3.01+-0.05), n_th=1e-3: {weak:.4f} dB (0+-0.05)")
    assert strong == pytest.approx(3.01, abs=0.05)
    assert weak == pytest.approx(0.0, abs=0.05)


def test_criterion_03_sfg_qfi_gain(record_property):
    gains = {n_th: db(FQ(sfg(n_th, 1.0)) / FQ(coh(n_th))) for n_th in (1e-3, 1.0, 1e3)}
    record_property("detail", "dB " + ", ".join(f"n_th={k:g}: {v:.4f}" for k, v in gains.items()) + " (3.01+-0.05)")
    for v in gains.values():
        assert v == pytest.approx(3.01, abs=0.05)


def test_criterion_04_sfg_heterodyne_gain(record_property):
    weak = db(FC(sfg(1e-3, 10.0)) / FC(coh(1e-3)))
    strong = db(FC(sfg(1e3, 10.0)) / FC(coh(1e3)))
    record_property("detail", f"n_th=1e-3: {weak:.4f} dB (6.02+-0.1), n_th=1e3: {strong:.4f} dB (3.01+-0.1)")
    assert weak == pytest.approx(6.02, abs=0.1)
    assert strong == pytest.approx(3.01, abs=0.1)


def test_criterion_05_svi_recovery(record_property):
    r_prime = np.log(10.0 / 0.1)
    svi = apply_svi(sfg(1e-3, 0.1), SviParams(r_prime))
    gain = db(FC(svi) / FC(coh(1e-3)))
    record_property("detail", f"{gain:.4f} dB (3.01+-0.1)")
    assert gain == pytest.approx(3.01, abs=0.1)


def test_criterion_06_heterodyne_optimality_limits(record_property):
    sfg_ratios = [FC(sfg(n_th, 100.0)) / FQ(sfg(n_th, 100.0)) for n_th in (0.0, 100.0)]
    coh_ratio = FC(coh(1e3)) / FQ(coh(1e3))
    record_property("detail", f"SFG CFI/QFI {sfg_ratios[0]:.5f}, {sfg_ratios[1]:.5f}; coherent {coh_ratio:.5f} (1+-0.01)")
    for r in sfg_ratios + [coh_ratio]:
        assert r == pytest.approx(1.0, abs=0.01)


def test_criterion_07_heterodyne_equality(record_property):
    devs = {n_th: FC(tmsv(n_th)) / FC(coh(n_th)) - 1 for n_th in (1e-3, 1.0, 1e3)}
    record_property("detail", "ratio-1 " + ", ".join(f"n_th={k:g}: {v:.2e}" for k, v in devs.items()) + " (<=0.02)")
    for v in devs.values():
        assert abs(v) <= 0.02


def test_criterion_08_crb_attainment(record_property):
    # configuration fixed before the first run; N_S = n (j_B + 1) = 1e4
    grid = DiscreteGrid(1024, 1.0)
    fam = build_coherent_scenario(SourceParams("coherent", 1e4 / 1025), ChannelModel(1.0, 0.0))
    start = time.perf_counter()
    rep = run_monte_carlo(fam, THETA, grid, 1000, 2024)
    elapsed = time.perf_counter() - start
    rel_se = rep.variance_stderr / rep.variance
    record_property(
        "detail",
        f"efficiency {rep.efficiency:.4f} +- {rep.efficiency * rel_se:.4f} (window [1.0, 1.5]); "
        f"known-phase origin {rep.efficiency_known_phase:.3f}; N_S={rep.n_signal_photons:.0f}; "
        f"{rep.n_flagged} flagged; {elapsed:.1f}s (<120s)",
    )
    assert rep.n_signal_photons == pytest.approx(1e4)
    assert elapsed < 120
    assert 1.0 <= rep.efficiency <= 1.5


def test_criterion_09_end_to_end_and_quantum_bound(record_property):
    profile = ModulationProfile(2 * np.pi * 10e9, 2 * np.pi * 1e6, 1e-3)
    full = DiscreteGrid(2048, 1e-3)
    res = simulate_two_segment(coh(0.0, 10.0, 1.0), profile, full, TargetTruth(1200.0, 30.0), 100, 5, noiseless=True)
    tau_err, v_err = res.max_relative_error()

    grid = DiscreteGrid(1024, 1.0)
    n = 1e4 / 1025
    families = {
        "coherent": coh(0.0, n, 1.0),
        "tmsv": tmsv(0.0, 1.0, 1.0),
        "sfg": sfg(0.0, 1.0, n, 1.0),
        "svi": apply_svi(sfg(0.0, 1.0, n, 1.0), SviParams(1.0)),
    }
    ratios, ok = {}, {}
    for label, fam in families.items():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = run_monte_carlo(fam, THETA, grid, 300, 99)
        ratios[label] = rep.variance * rep.fisher_qfi
        ok[label] = rep.dominates_quantum_bound(3.0)
    record_property(
        "detail",
        f"noiseless tau {tau_err:.1e}, v {v_err:.1e} (<=1e-9); var*F_Q "
        + ", ".join(f"{k} {v:.2f}" for k, v in ratios.items()),
    )
    assert tau_err <= 1e-9 and v_err <= 1e-9
    assert all(ok.values())


def test_criterion_10_invariants(record_property):
    rng = np.random.default_rng(2024)
    # physicality of every physical-state family and CFI <= QFI on a parameter grid
    worst_cfi_excess = -np.inf
    for eps, n_th, n in itertools.product((1e-3, 0.3, 1.0), (0.0, 1.0, 1e3), (1e-3, 0.5)):
        for fam in (coh(n_th, n, eps), tmsv(n_th, n, eps), sfg(n_th, 2.0, n, eps)):
            for phi in (0.0, 1.3, 4.0):
                if fam.ideal_is_state:
                    assert check_physicality(fam.state(THETA[0], phi, 0.2, "ideal")).is_physical
                excess = cfi_general(fam, (THETA[0], phi), 0.2) / qfi_general(fam, (THETA[0], phi), 0.2) - 1
                worst_cfi_excess = max(worst_cfi_excess, excess)
    assert worst_cfi_excess <= 1e-9

    # FMCW round trip
    prof = ModulationProfile(2 * np.pi * 10e9, 2 * np.pi * 1e6, 1e-3)
    worst_rt = 0.0
    for _ in range(1000):
        tau = rng.uniform(1e-8, prof.T_m / 100 * 0.999)
        wd = rng.uniform(-0.99, 0.99) * prof.chirp_rate * tau
        inv = invert_beats(-beat_params(tau, wd, prof, RISING).omega_l, beat_params(tau, wd, prof, FALLING).omega_l, prof, signed=True)
        worst_rt = max(worst_rt, abs(inv.tau / tau - 1))
    assert worst_rt <= 1e-10

    # seeded reruns, in process and across processes
    grid = DiscreteGrid(1024, 1.0)
    fam = tmsv(0.5, 0.5, 0.5)
    assert sample_record(fam, THETA, grid, 3, 9).iq.tobytes() == sample_record(fam, THETA, grid, 3, 9).iq.tobytes()
    c = coh(0.0, 1.0, 1.0)
    assert run_monte_carlo(c, THETA, grid, 100, 4) == run_monte_carlo(c, THETA, grid, 100, 4)
    code = (
        "import numpy as np;from qfmcw.estimation import sample_record;from qfmcw.fmcw import DiscreteGrid;"
        "from qfmcw.protocols import *;"
        "f=build_tmsv_qhd_scenario(SourceParams('tmsv',0.5),ChannelModel(0.5,0.5));"
        f"print(sample_record(f,{THETA!r},DiscreteGrid(1024,1.0),3,9).iq.tobytes().hex())"
    )
    child = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True)
    assert child.stdout.strip() == sample_record(fam, THETA, grid, 3, 9).iq.tobytes().hex()
    assert RecordSampler(fam, THETA, grid).draw(3, 9) == sample_record(fam, THETA, grid, 3, 9)

    record_property(
        "detail",
        f"physical states ok; max CFI/QFI-1 {worst_cfi_excess:.1e} (<=0); round trip {worst_rt:.1e} (<=1e-10); reruns bit-identical",
    )
