import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helixwaves import kdv
from helixwaves.errors import BlowUpError, ParameterError, UnresolvedTrainError
from helixwaves.kdv import KdVConfig, KdVState, SolitonSpec


def soliton(x, t, kappa, c1=0.0, n=1, delta=1.0):
    """Closed-form profile written out with cosh, independent of the package."""
    xi = (kappa / math.sqrt(delta)) * (x - 4 * kappa ** 2 * t + 0.5 * c1 * t ** 2)
    return n * (n + 1) * kappa ** 2 / np.cosh(xi) ** 2 - c1 * t / 6


def five_point_derivative(f, t, h=1e-3):
    return (f(t - 2 * h) - 8 * f(t - h) + 8 * f(t + h) - f(t + 2 * h)) / (12 * h)


# -- analytic profile ----------------------------------------------------------

def test_profile_n1_peak():
    x = np.linspace(-10, 10, 2001)
    u = kdv.analytic_profile(SolitonSpec(1.0), 0.0, x)
    assert u.max() == pytest.approx(2.0)
    assert x[np.argmax(u)] == pytest.approx(0.0)
    np.testing.assert_allclose(u, soliton(x, 0.0, 1.0), rtol=1e-13, atol=1e-300)


def test_profile_n2_peak():
    u = kdv.analytic_profile(SolitonSpec(1.0, 2), 0.0, np.linspace(-5, 5, 1001))
    assert u.max() == pytest.approx(6.0)


@given(st.floats(0.2, 2.0), st.integers(1, 4), st.floats(0, 2), st.floats(0, 3),
       st.floats(0.5, 4.0))
def test_profile_matches_closed_form(kappa, n, c1, t, delta):
    x = np.linspace(-30, 30, 301)
    got = kdv.analytic_profile(SolitonSpec(kappa, n, c1), t, x, delta)
    np.testing.assert_allclose(got, soliton(x, t, kappa, c1, n, delta), rtol=1e-12, atol=1e-12)


def test_return_time_law():
    spec = SolitonSpec(1.0, 1, 1.0)
    assert kdv.return_time(spec) == 8.0
    assert kdv.peak_position(spec, 8.0) == 0.0
    assert kdv.return_time(SolitonSpec(1.0)) == math.inf


def test_scaling_maps_round_trip():
    x, t = np.array([1.0, -2.0]), np.array([0.5, 3.0])
    xc, tc = kdv.to_canonical(x, t, 4.0)
    np.testing.assert_allclose(xc, x / 2)
    np.testing.assert_allclose(kdv.from_canonical(xc, tc, 4.0)[1], t)
    assert kdv.paper_to_field(kdv.field_to_paper(1.25)) == 1.25


# -- configuration ------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(grid_points=100), dict(grid_points=32), dict(delta=0),
                                dict(c1=-1), dict(domain_length=0), dict(dt=-1)])
def test_config_validation(kw):
    with pytest.raises(ParameterError):
        KdVConfig(**kw)


def test_cfl_violation_detected_at_construction():
    cfg = KdVConfig(grid_points=256)
    with pytest.raises(ParameterError):
        KdVConfig(grid_points=256, dt=2 * cfg.dispersive_dt_limit)
    assert KdVConfig(grid_points=256, dt=0.5 * cfg.dispersive_dt_limit).dt > 0


def test_explicit_dt_checked_against_amplitude():
    cfg = KdVConfig(domain_length=40, grid_points=64, dt=0.99 * KdVConfig(
        domain_length=40, grid_points=64).dispersive_dt_limit)
    big = KdVState(0.0, 500 * np.ones(64))
    with pytest.raises(ParameterError):
        kdv.evolve(cfg, big, 1.0)


def test_state_rejects_non_finite():
    with pytest.raises(BlowUpError):
        KdVState(0.0, [0.0, np.inf])


# -- evolution ----------------------------------------------------------------

def wrapped(x, L):
    return (x + L / 2) % L - L / 2


def one_transit(kappa=0.5, L=100.0, N=256, delta=1.0):
    cfg = KdVConfig(delta=delta, domain_length=L, grid_points=N)
    x0 = L / 4
    spec = SolitonSpec(kappa)
    initial = KdVState(0.0, kdv.analytic_profile(spec, 0.0, cfg.periodic_offset(x0), delta))
    t_end = L / (4 * kappa ** 2)
    final = kdv.evolve(cfg, initial, t_end)
    return cfg, spec, x0, initial, final


def test_single_soliton_one_transit():
    cfg, spec, x0, initial, final = one_transit()
    travel = 4 * spec.kappa ** 2 * final.time
    exact = soliton(wrapped(cfg.grid - x0 - travel, cfg.domain_length), 0.0, spec.kappa)
    assert final.time == pytest.approx(100.0)
    assert np.max(np.abs(final.field - exact)) < 1e-3
    m0, m1 = kdv.mass(initial, cfg), kdv.mass(final, cfg)
    q0, q1 = kdv.momentum(initial, cfg), kdv.momentum(final, cfg)
    assert abs(m1 - m0) / abs(m0) < 1e-6
    assert abs(q1 - q0) / abs(q0) < 1e-6


def test_dispersion_coefficient_widens_soliton():
    cfg, spec, x0, initial, final = one_transit(kappa=0.5, delta=2.0)
    travel = 4 * 0.25 * final.time
    exact = soliton(wrapped(cfg.grid - x0 - travel, cfg.domain_length), 0.0, 0.5, delta=2.0)
    assert np.max(np.abs(final.field - exact)) < 1e-3


def test_zero_field_stays_zero():
    cfg = KdVConfig(grid_points=64, domain_length=20)
    out = kdv.evolve(cfg, KdVState(0.0, np.zeros(64)), 3.0)
    assert not out.field.any()


def test_zero_field_with_sink():
    c = 0.7
    cfg = KdVConfig(c1=c, grid_points=64, domain_length=20)
    out = kdv.evolve(cfg, KdVState(0.0, np.zeros(64)), 3.0)
    np.testing.assert_allclose(out.paper_field, -c * 3.0, rtol=1e-12)


def test_sink_drains_mass_uniformly():
    c, L = 0.5, 80.0
    cfg = KdVConfig(c1=c, domain_length=L, grid_points=256)
    x = cfg.periodic_offset(L / 4)
    initial = KdVState(0.0, kdv.analytic_profile(SolitonSpec(0.8), 0.0, x))
    states = list(kdv.evolve_snapshots(cfg, initial, 2.0, 4))
    for s in states:
        drift = (kdv.mass(s, cfg) - kdv.mass(initial, cfg)) * 6.0
        assert drift == pytest.approx(-c * L * s.time, rel=1e-10)
    exact = kdv.analytic_profile(SolitonSpec(0.8, 1, c), states[-1].time, x)
    assert np.max(np.abs(states[-1].field - exact)) < 1e-3


def test_snapshots_are_equally_spaced_and_end_on_t_end():
    cfg = KdVConfig(grid_points=64, domain_length=20)
    init = KdVState(1.0, kdv.analytic_profile(SolitonSpec(1.0), 0.0, cfg.periodic_offset(5)))
    times = [s.time for s in kdv.evolve_snapshots(cfg, init, 0.3, 3)]
    assert times == pytest.approx([1.1, 1.2, 1.3])


def test_wrong_grid_rejected():
    with pytest.raises(ParameterError):
        kdv.evolve(KdVConfig(grid_points=64), KdVState(0.0, np.zeros(128)), 1.0)


def test_isolated_soliton_velocity_is_twice_amplitude():
    kappa, L = 1.0, 60.0
    cfg = KdVConfig(domain_length=L, grid_points=512)
    initial = KdVState(0.0, kdv.analytic_profile(SolitonSpec(kappa), 0.0, cfg.periodic_offset(10)))
    times, pos = [], []
    for s in kdv.evolve_snapshots(cfg, initial, 4.0, 8):
        amp, p = max(kdv.find_peaks(s.field, L, 0.1))
        times.append(s.time)
        pos.append(p)
    velocity = np.polyfit(times, np.unwrap(pos, period=L), 1)[0]
    assert velocity == pytest.approx(2 * amp, rel=0.02)
    assert velocity == pytest.approx(4 * kappa ** 2, rel=0.02)


def test_find_peaks_sub_grid_accuracy():
    L, N = 50.0, 256
    x = np.arange(N) * L / N
    field = soliton(x - 17.3, 0.0, 1.0)
    (amp, pos), = kdv.find_peaks(field, L, 0.1)
    assert amp == pytest.approx(2.0, rel=1e-4)
    assert pos == pytest.approx(17.3, abs=1e-3)


# -- soliton trains -------------------------------------------------------------

def test_train_initial_state_bit_for_bit():
    cfg = KdVConfig(domain_length=100, grid_points=1024)
    init = kdv.train_initial_state(cfg, 2, 1.0, 15.0)
    ref = kdv.analytic_profile(SolitonSpec(1.0, 2), 0.0, cfg.periodic_offset(15.0))
    assert np.array_equal(init.field, ref)


def test_predicted_train():
    amps, vels = kdv.predicted_train(3, 0.5)
    assert amps == [4.5, 2.0, 0.5]
    assert vels == [9.0, 4.0, 1.0]


@pytest.mark.parametrize("n, amps, vels", [(2, [8, 2], [16, 4]), (3, [18, 8, 2], [36, 16, 4])])
def test_train_amplitudes_and_velocities(n, amps, vels):
    report = kdv.soliton_train(KdVConfig(domain_length=100, grid_points=1024), n, 1.0)
    got_a = [s.amplitude for s in report.solitons]
    got_v = [s.velocity for s in report.solitons]
    np.testing.assert_allclose(got_a, amps, rtol=0.02)
    np.testing.assert_allclose(got_v, vels, rtol=0.05)
    assert max(report.amplitude_errors) < 0.02
    assert report.as_dict()["predicted_amplitudes"] == amps


def test_single_soliton_train_has_no_residue():
    report = kdv.soliton_train(KdVConfig(domain_length=100, grid_points=512), 1, 1.0, t_end=3.0)
    assert len(report.solitons) == 1
    assert report.solitons[0].amplitude == pytest.approx(2.0, rel=1e-4)
    assert report.dispersive_residue < 0.01 * 2.0


def test_unresolved_train():
    with pytest.raises(UnresolvedTrainError, match="t_end"):
        kdv.soliton_train(KdVConfig(domain_length=100, grid_points=1024), 2, 1.0, t_end=0.05)


def test_train_needs_room():
    with pytest.raises(ParameterError):
        kdv.soliton_train(KdVConfig(domain_length=30, grid_points=256), 3, 1.0, t_end=5.0)


def test_train_rejects_sink():
    with pytest.raises(ParameterError):
        kdv.soliton_train(KdVConfig(c1=1.0), 2, 1.0)


# -- return to origin -----------------------------------------------------------

@pytest.mark.parametrize("kappa", [0.8, 1.0, 1.25])
def test_measured_return_time(kappa):
    cfg = KdVConfig(c1=1.0, domain_length=64, grid_points=256)
    measured = kdv.measure_return_time(cfg, kappa)
    assert measured == pytest.approx(8 * kappa ** 2, rel=0.03)


def test_return_needs_sink():
    with pytest.raises(ParameterError):
        kdv.measure_return_time(KdVConfig(), 1.0)


# -- soliton cumulative as logistic -----------------------------------------------

def test_sigmoid_closed_form_at_unit_kappa():
    smap = kdv.soliton_to_sigmoid(SolitonSpec(1.0))
    assert (smap.wave.A, smap.wave.B, smap.wave.C) == (2.0, 1.0, 2.0)
    t = np.linspace(-5, 5, 1001)
    np.testing.assert_allclose(smap(t), 2 * np.exp(2 * t) / (1 + np.exp(2 * t)),
                               rtol=0, atol=1e-12)
    assert smap(0.0) == pytest.approx(1.0)
    assert smap(60.0) == pytest.approx(2.0) and smap(-60.0) == pytest.approx(0.0)


@pytest.mark.parametrize("kappa", [0.5, 1.0, 1.7])
def test_sigmoid_density_matches_profile(kappa):
    smap = kdv.soliton_to_sigmoid(SolitonSpec(kappa))
    t = np.linspace(-5, 5, 401)
    numeric = smap.density_scale * five_point_derivative(smap, t)
    profile = kdv.analytic_profile(SolitonSpec(kappa), 0.0, t)
    assert np.max(np.abs(numeric - profile)) < 1e-10
    np.testing.assert_allclose(smap.density(t), profile, rtol=1e-12, atol=1e-14)


def test_sigmoid_of_multi_soliton_is_a_list():
    maps = kdv.soliton_to_sigmoid(SolitonSpec(0.5, 3))
    assert [m.kappa for m in maps] == [1.5, 1.0, 0.5]


def test_sigmoid_rejects_sink():
    with pytest.raises(ParameterError):
        kdv.soliton_to_sigmoid(SolitonSpec(1.0, 1, 0.5))
