import warnings

import numpy as np
import pytest

from qfmcw.estimation import (
    EstimatorAbort,
    MeasurementRecord,
    RecordSampler,
    beat_series,
    estimate_target,
    periodogram_ml,
    run_monte_carlo,
    sample_record,
    simulate_two_segment,
    trial_rng,
)
from qfmcw.fmcw import FALLING, RISING, SPEED_OF_LIGHT, DiscreteGrid, ModulationProfile, TargetTruth, beat_params
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

GRID = DiscreteGrid(1024, 1.0)
THETA = (2 * np.pi * 40.3, 0.7)


def coherent(n, eps=1.0, n_th=0.0):
    return build_coherent_scenario(SourceParams("coherent", n), ChannelModel(eps, n_th))


def tmsv(n, eps=1.0, n_th=0.0):
    return build_tmsv_qhd_scenario(SourceParams("tmsv", n), ChannelModel(eps, n_th))


def sfg(n, eps_s, eps=1.0, n_th=0.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return apply_sfg(SourceParams("tmsv", n), ChannelModel(eps, n_th), SfgParams(eps_s))


def test_trial_rng_streams():
    a = trial_rng(7, 3).standard_normal(5)
    assert np.array_equal(a, trial_rng(7, 3).standard_normal(5))
    assert not np.array_equal(a, trial_rng(7, 4).standard_normal(5))
    assert not np.array_equal(a, trial_rng(8, 3).standard_normal(5))
    with pytest.raises(ValueError):
        trial_rng(-1, 0)


def test_zero_mean_vacuum_record():
    fam = sfg(0.01, 0.0)  # no up-conversion: image-band vacuum only
    grid = DiscreteGrid(100_000, 1.0)
    rec = sample_record(fam, THETA, grid, seed=1)
    assert rec.iq.shape == (grid.n_samples, 2)
    bound = 5 * 0.5 / np.sqrt(grid.n_samples)
    assert np.all(np.abs(rec.iq.mean(axis=0)) < bound)


def test_coherent_record_covariance():
    fam = coherent(0.5, 0.3, 1.0)
    grid = DiscreteGrid(4, 1.0)
    sampler = RecordSampler(fam, (3.0, 0.2), grid)
    draws = np.array([sampler.draw(5, i).iq for i in range(100_000)])
    expect = fam.moments(3.0, 0.2, grid.times).cov
    for p in range(grid.n_samples):
        emp = np.cov(draws[:, p, :].T)
        assert np.allclose(emp, expect[p], rtol=0.02, atol=0.02 * expect[p][0, 0])


def test_record_reproducible_bit_for_bit():
    fam = tmsv(0.3, 0.5, 2.0)
    a = sample_record(fam, THETA, GRID, seed=99, substream=17)
    b = sample_record(fam, THETA, GRID, seed=99, substream=17)
    assert a == b and a.iq.tobytes() == b.iq.tobytes()
    assert a.iq.shape == (GRID.n_samples, 4)
    assert a != sample_record(fam, THETA, GRID, seed=99, substream=18)


def test_noiseless_coherent_series():
    fam = coherent(0.2, 0.5)
    rec = sample_record(fam, THETA, GRID, seed=0, noise_scale=0.0)
    z = beat_series(rec)
    x = THETA[0] * GRID.times + THETA[1]
    assert np.allclose(z, np.sqrt(0.1) * np.exp(1j * x), rtol=0, atol=1e-15)


def test_tmsv_series_mean():
    fam = tmsv(0.5, 0.8, 0.2)
    grid = DiscreteGrid(4, 1.0)
    sampler = RecordSampler(fam, THETA, grid)
    z = np.array([beat_series(sampler.draw(3, i)) for i in range(100_000)])
    x = THETA[0] * grid.times + THETA[1]
    expect = -np.sqrt(0.8 * 0.5 * 1.5) * np.exp(1j * x)
    se = z.std(axis=0) / np.sqrt(z.shape[0])
    assert np.all(np.abs(z.mean(axis=0) - expect) < 3 * se * np.sqrt(2))


def test_tmsv_series_without_correlation_is_zero_mean():
    fam = tmsv(0.0, 0.8, 0.2)
    grid = DiscreteGrid(4, 1.0)
    sampler = RecordSampler(fam, THETA, grid)
    z = np.array([beat_series(sampler.draw(3, i)) for i in range(20_000)])
    se = z.std(axis=0) / np.sqrt(z.shape[0])
    assert np.all(np.abs(z.mean(axis=0)) < 5 * se)


def test_beat_series_kind_checks():
    rec = sample_record(coherent(0.1), THETA, GRID, seed=0)
    assert beat_series(rec).dtype == complex
    with pytest.raises(ValueError):
        beat_series(rec, "tmsv")
    svi = apply_svi(sfg(0.01, 1.0), SviParams(0.5))
    real = beat_series(sample_record(svi, THETA, GRID, seed=0))
    assert real.dtype == float and real.shape == (GRID.n_samples,)
    with pytest.raises(ValueError):
        MeasurementRecord(GRID.times, np.zeros((3, 2)), "x", "coherent")


def test_periodogram_exact_bin():
    t = np.arange(256) * 0.01
    w = 2 * np.pi * 12 / (256 * 0.01)
    peak = periodogram_ml(np.exp(1j * (w * t + 0.3)), t)
    assert peak.omega == pytest.approx(w, rel=1e-12)
    assert not peak.on_boundary


@pytest.mark.parametrize("f", [3.37, -17.71, 40.3])
def test_periodogram_between_bins(f):
    t = GRID.times
    w = 2 * np.pi * f
    assert periodogram_ml(np.exp(1j * w * t), t).omega == pytest.approx(w, abs=1e-6)
    coarse = periodogram_ml(np.exp(1j * w * t), t, polish=False)
    # quadratic interpolation alone lands within a small fraction of a padded bin
    assert abs(coarse.omega - w) < 0.1 * 2 * np.pi / 8


def test_periodogram_phase_invariance():
    t = GRID.times
    w = 2 * np.pi * 40.3
    rng = np.random.default_rng(0)
    z = np.exp(1j * w * t) + 0.3 * (rng.standard_normal(t.size) + 1j * rng.standard_normal(t.size))
    base = periodogram_ml(z, t).omega
    for phi in (0.4, 2.0, -1.1):
        assert periodogram_ml(z * np.exp(1j * phi), t).omega == pytest.approx(base, rel=1e-12)


def test_periodogram_real_and_window():
    t = GRID.times
    w = 2 * np.pi * 55.2
    real = periodogram_ml(np.cos(w * t + 0.4), t)
    assert real.omega > 0 and real.omega == pytest.approx(w, abs=2e-3)
    edge = periodogram_ml(np.exp(1j * w * t), t, window=(0.0, 2 * np.pi * 54.9))  # main-lobe skirt rises to the edge
    assert edge.on_boundary
    with pytest.raises(ValueError):
        periodogram_ml(np.ones(10), np.r_[np.arange(9), 9.5])
    with pytest.raises(ValueError):
        periodogram_ml(np.ones(10, complex), np.arange(10.0), window=(1.0, 0.5))


def test_high_snr_noisy_tone_near_bound():
    report = run_monte_carlo(coherent(1e4 / GRID.n_samples), THETA, GRID, 300, 11)
    assert report.n_flagged == 0
    assert 1 / 1.5 <= report.efficiency <= 1.5


def test_noiseless_monte_carlo():
    rep = run_monte_carlo(coherent(0.1), THETA, GRID, 100, 1, noiseless=True)
    assert rep.variance < 1e-10 * THETA[0] ** 2
    assert abs(rep.bias) < 1e-9
    with pytest.raises(ValueError):
        run_monte_carlo(tmsv(0.1), THETA, GRID, 100, 1, noiseless=True)


def test_monte_carlo_requires_enough_trials():
    with pytest.raises(ValueError):
        run_monte_carlo(coherent(0.1), THETA, GRID, 99, 1)


def test_monte_carlo_aborts_below_threshold():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(EstimatorAbort) as info:
            run_monte_carlo(coherent(1e-4), THETA, GRID, 100, 1)
    assert info.value.n_flagged > 1


def test_monte_carlo_deterministic():
    a = run_monte_carlo(coherent(1.0), THETA, GRID, 100, 42)
    b = run_monte_carlo(coherent(1.0), THETA, GRID, 100, 42)
    assert a == b
    assert a.to_dict() == b.to_dict()
    assert "trials" not in a.to_dict() and len(a.to_dict(include_trials=True)["trials"]) == 100


def test_variance_scales_inversely_with_photons():
    n_s = np.array([1e3, 1e4, 1e5, 1e6])
    var = np.array([run_monte_carlo(coherent(N / GRID.n_samples), THETA, GRID, 200, 5).variance for N in n_s])
    slope = np.polyfit(np.log(n_s), np.log(var), 1)[0]
    assert -1.1 <= slope <= -0.9
    pair = np.log(var[2] / var[1]) / np.log(n_s[2] / n_s[1])
    assert -1.1 <= pair <= -0.9


WIDE = ModulationProfile(2 * np.pi * 1e6, 2 * np.pi * 1e4, 1.0)


def test_estimate_target_examples():
    z = estimate_target(0.0, 0.0, WIDE)
    assert (z.tau, z.v) == (0.0, 0.0)
    wd = 2 * np.pi * 5
    v = wd * SPEED_OF_LIGHT / (2 * WIDE.omega0)
    b1 = beat_params(1e-3, wd, WIDE, RISING)
    b0 = beat_params(1e-3, wd, WIDE, FALLING)
    est = estimate_target(-b1.omega_l, b0.omega_l, WIDE, signed=True)
    assert est.tau == pytest.approx(1e-3, rel=1e-10)
    assert est.v == pytest.approx(v, rel=1e-10)
    assert not est.ambiguous


PROFILE = ModulationProfile(2 * np.pi * 10e9, 2 * np.pi * 1e6, 1e-3)
FULL = DiscreteGrid(2048, 1e-3)
TRUTH = TargetTruth(1200.0, 30.0)


def test_two_segment_noiseless():
    res = simulate_two_segment(coherent(10.0), PROFILE, FULL, TRUTH, 100, 3, noiseless=True)
    tau_err, v_err = res.max_relative_error()
    assert tau_err < 1e-9 and v_err < 1e-9
    assert res.omega_rising < 0 and res.omega_falling < 0
    assert not any(tr.ambiguous for tr in res.trials)


def test_two_segment_delay_error_matches_propagated_bounds():
    res = simulate_two_segment(coherent(0.5), PROFILE, FULL, TRUTH, 300, 8)
    tau = np.array([tr.tau_hat for tr in res.trials])
    k = PROFILE.T_m / (4 * PROFILE.delta_omega)
    predicted = k**2 * (res.rising.crb_cfi + res.falling.crb_cfi)
    assert 0.75 <= np.var(tau, ddof=1) / predicted <= 1.35
    # the two segments use disjoint substreams
    assert res.rising.trials[0].substream == 0 and res.falling.trials[0].substream == 300
