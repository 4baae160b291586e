from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freqhom.errors import CannotNormalize, DegenerateSplit, InvalidArgument, UndefinedG2
from freqhom.interference import (
    CLASSICAL_LIMIT,
    CoherentRecipe,
    DetectionModel,
    ExperimentSpec,
    balanced_alpha,
    calibrate_gamma,
    classical_limit,
    coherent_mode,
    far_baseline,
    heralded_g2,
    hom_scan,
    ideal_mix_visibility,
    induced_emission_scan,
    mix_scan,
    prepare_point,
    resolve_cut,
    run_point,
    signal_mean_photons,
)
from freqhom.jsa import purity
from freqhom.spectral import delay_mode, inner_product, pi_step_mode, spectral_median

from conftest import correlated_schmidt
from oracles import coincidence_oracle, ideal_mix_visibility as mix_oracle, two_photon_bin_coincidence

DELAYS = np.arange(-150.0, 151.0, 10.0)


def spec_for(d, alpha=0.01, gamma=1e-3, **kw):
    return ExperimentSpec(d, alpha, gamma, **kw)


def oracle_point(spec, delay):
    p = prepare_point(spec, delay)
    g = p.coherent_mode
    d = spec.schmidt
    return coincidence_oracle(g.amplitude, [m.amplitude for m in d.signal_modes], d.kept_coefficients,
                              spec.alpha, spec.gamma, p.cut_omega, g.grid.omega_step, g.grid.omega)


@pytest.mark.parametrize("delay", [0.0, 12e-6, -30e-6])
@pytest.mark.parametrize("pi_shift", [True, False])
def test_pipeline_matches_first_quantized_oracle(two_mode_schmidt, delay, pi_shift):
    spec = spec_for(two_mode_schmidt, 0.15, 0.12, coherent=CoherentRecipe(pi_shift=pi_shift))
    got = run_point(spec, delay)
    want = oracle_point(spec, delay)
    assert got.coincidence == pytest.approx(want[0], rel=1e-10, abs=1e-16)
    assert got.herald == pytest.approx(want[1], rel=1e-10)


def test_oracle_agreement_with_split_and_complex_alpha(two_mode_schmidt):
    spec = spec_for(two_mode_schmidt, 0.1 * np.exp(0.7j), 0.1, coherent=CoherentRecipe(t_fraction=0.3))
    got = run_point(spec, 5e-6)
    want = oracle_point(spec, 5e-6)
    assert got.coincidence == pytest.approx(want[0], rel=1e-10)


def test_two_photon_bin_oracle(psi0):
    cut = spectral_median(psi0)
    g1 = pi_step_mode(psi0, cut, 0.5)
    om, step = psi0.grid.omega, psi0.grid.omega_step
    assert two_photon_bin_coincidence(g1.amplitude, psi0.amplitude, cut, om, step) < 1e-12
    far = delay_mode(g1, 3e-3)
    assert two_photon_bin_coincidence(far.amplitude, psi0.amplitude, cut, om, step) == pytest.approx(0.5, abs=1e-6)


def test_ideal_dip(single_schmidt):
    res = hom_scan(spec_for(single_schmidt), DELAYS)
    m = res.metrics
    assert m["visibility"] >= 0.99
    assert m["beyond_classical_limit"]
    assert res.axis[np.argmin(res.coincidence_probability)] == 0.0
    assert res.extra["plateau"].any()


def test_induced_emission_doubles_coincidences(single_schmidt):
    res = induced_emission_scan(spec_for(single_schmidt, 0.01, 1e-4), DELAYS)
    assert res.metrics["enhancement_ratio"] == pytest.approx(2.0, abs=2e-3)
    assert res.metrics["extremum"] == res.coincidence_probability.max()


def test_distinguishable_has_no_dip(single_schmidt):
    spec = spec_for(single_schmidt, 0.1, 0.05, coherent=CoherentRecipe(distinguishable=True))
    res = hom_scan(spec, DELAYS)
    assert abs(res.metrics["visibility"]) < 1e-10
    assert np.ptp(res.herald_probability) < 1e-12


def test_zero_gain_has_no_herald(single_schmidt):
    spec = spec_for(single_schmidt, 0.1, 0.0)
    r = run_point(spec, 0.0)
    assert r.herald == 0.0 and r.coincidence == 0.0
    with pytest.raises(CannotNormalize):
        hom_scan(spec, DELAYS)


def test_scan_needs_plateau(single_schmidt):
    with pytest.raises(CannotNormalize, match="plateau"):
        hom_scan(spec_for(single_schmidt), [-10.0, 0.0, 10.0])
    with pytest.raises(InvalidArgument):
        hom_scan(spec_for(single_schmidt), [])


@pytest.mark.parametrize("delay", [15e-6, 40e-6, 90e-6])
def test_delay_symmetry(single_schmidt, delay):
    spec = spec_for(single_schmidt, 0.1, 0.05)
    assert abs(run_point(spec, delay).coincidence - run_point(spec, -delay).coincidence) < 1e-8


def test_mix_scan_follows_closed_form(single_schmidt):
    ts = [0.1, 0.2, 0.3, 0.4]
    res = mix_scan(spec_for(single_schmidt, 0.01, 1e-4), ts)
    t_eff = res.extra["t_effective"]
    assert np.allclose(t_eff, ts, atol=2e-3)
    assert np.allclose(res.extra["visibility"], mix_oracle(t_eff), atol=1e-3)
    assert np.allclose(ideal_mix_visibility(t_eff), mix_oracle(t_eff), rtol=1e-14)


def test_mix_single_point_reports_visibility(single_schmidt):
    spec = spec_for(single_schmidt, 0.01, 1e-4)
    res = mix_scan(spec, [0.5])
    assert res.metrics["visibility"] == pytest.approx(res.extra["visibility"][0])
    base = far_baseline(spec)
    assert res.metrics["visibility"] == pytest.approx((base - run_point(spec, 0.0).coincidence) / base, rel=1e-12)


@pytest.mark.parametrize("t", [0.0, 1.0, -0.2])
def test_degenerate_split(single_schmidt, t):
    spec = spec_for(single_schmidt)
    with pytest.raises(DegenerateSplit):
        mix_scan(spec, [t])
    with pytest.raises(DegenerateSplit):
        resolve_cut(replace(spec, coherent=CoherentRecipe(t_fraction=t)))


def test_coherent_mode_orthogonal_to_photon(single_schmidt):
    for t in (0.5, 0.25):
        spec = spec_for(single_schmidt, coherent=CoherentRecipe(t_fraction=t))
        g = coherent_mode(spec)
        assert abs(inner_product(g, single_schmidt.signal_modes[0])) < 1e-12
        assert g.norm() == pytest.approx(1.0, abs=1e-12)


def test_g2_vanishes_at_first_order(two_mode_schmidt):
    spec = spec_for(two_mode_schmidt, 0.0, 0.1, max_total_photons=2)
    assert heralded_g2(spec) == 0.0


def test_g2_grows_with_gain(two_mode_schmidt):
    vals = [heralded_g2(spec_for(two_mode_schmidt, 0.0, g)) for g in (0.05, 0.1, 0.15, 0.2)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    with pytest.raises(UndefinedG2):
        heralded_g2(spec_for(two_mode_schmidt, 0.0, 0.0))


def test_calibrate_gamma_hits_target(two_mode_schmidt):
    spec = spec_for(two_mode_schmidt, 0.0, 0.1)
    g = calibrate_gamma(spec, 0.043)
    assert heralded_g2(replace(spec, gamma=g)) == pytest.approx(0.043, abs=1e-9)
    with pytest.raises(InvalidArgument):
        calibrate_gamma(spec, 5.0)


def test_balanced_alpha(two_mode_schmidt):
    spec = spec_for(two_mode_schmidt, 0.0, 0.1)
    assert balanced_alpha(spec) ** 2 == pytest.approx(signal_mean_photons(spec), rel=1e-14)
    # leading order: <n_s> = gamma^2 sum r_n^2
    assert signal_mean_photons(spec) == pytest.approx(0.01, rel=0.05)


def test_visibility_falls_with_purity():
    vis, pur = [], []
    for corr in (0.0, 0.5, 1.0):
        d = correlated_schmidt(n_points=1024, corr=corr, n_kept=3)
        spec = spec_for(d, 0.02, 0.02, baseline_delay=1.5e-3)
        z = run_point(spec, 0.0).coincidence
        b = far_baseline(spec)
        vis.append((b - z) / b)
        pur.append(purity(d))
    assert pur[0] > pur[1] > pur[2]
    assert vis[0] > vis[1] > vis[2]


@settings(max_examples=8, deadline=None)
@given(eta=st.floats(min_value=0.05, max_value=1.0))
def test_probabilities_stay_in_unit_interval(two_mode_schmidt, eta):
    spec = spec_for(two_mode_schmidt, 0.3, 0.2, detection=DetectionModel(eta, eta, eta))
    r = run_point(spec, 8e-6)
    assert 0.0 <= r.coincidence <= r.herald <= 1.0


def test_classical_limit():
    assert classical_limit() == CLASSICAL_LIMIT == 0.5


def test_thread_count_does_not_change_results(single_schmidt):
    spec = spec_for(single_schmidt, 0.05, 0.05)
    a = hom_scan(spec, DELAYS, threads=1)
    b = hom_scan(spec, DELAYS, threads=4)
    assert np.array_equal(a.coincidence_probability, b.coincidence_probability)
    assert a.metrics == b.metrics


def test_detection_model_validation():
    with pytest.raises(InvalidArgument):
        DetectionModel(herald_efficiency=0.0)
    with pytest.raises(InvalidArgument):
        DetectionModel(detector_type="pnr")
    with pytest.raises(InvalidArgument):
        CoherentRecipe(shape="gaussian")
