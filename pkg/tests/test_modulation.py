import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from kgsim.errors import ModulationError
from kgsim.evolver import EvolverConfig, evolve
from kgsim.ground_state import build_family
from kgsim.modulation import (
    ModulationTrack,
    control_lambda_defect,
    fit,
    locate_on_orbit,
    orbit_distance,
    orthogonality_residuals,
    remainder,
    remainder_ratio,
    track,
    wrap_angle,
)

from .conftest import OMEGA_C3

P = 3.0


def test_wrap_angle():
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert wrap_angle(-0.25) == pytest.approx(-0.25)


def test_locate_recovers_orbit_point(wave):
    s = wave.orbit_point(0.7, 2.3)
    point = locate_on_orbit(s, wave)
    assert point.theta == pytest.approx(0.7, abs=1e-8)
    assert point.y == pytest.approx(2.3, abs=1e-8)
    assert point.distance < 1e-8


def test_orbit_distance_of_scaled_wave(wave):
    a = 0.01
    expected = a * wave.Phi.h1l2_norm()
    assert orbit_distance(wave.perturbed(a), P, OMEGA_C3) == pytest.approx(expected, rel=1e-8)
    assert expected == pytest.approx(0.0217, abs=2e-4)


def test_fit_on_the_wave_is_trivial(wave):
    result = fit(wave.Phi, P, OMEGA_C3)
    assert result.lam == pytest.approx(1.0)
    assert result.theta == pytest.approx(0.0, abs=1e-12)
    assert result.y == pytest.approx(0.0, abs=1e-12)
    assert result.xi_h1l2 < 1e-12
    assert result.iterations == 0


def test_fit_recovers_translated_rotated_wave(wave):
    s = wave.orbit_point(-0.4, 1.25)
    point = locate_on_orbit(s, wave)
    result = fit(s, P, OMEGA_C3, guess=(point.theta, point.y, 1.0))
    assert result.theta == pytest.approx(-0.4, abs=1e-8)
    assert result.y == pytest.approx(1.25, abs=1e-8)
    assert result.lam == pytest.approx(1.0, abs=1e-8)
    assert result.xi_h1l2 < 1e-7


def test_fit_of_perturbed_wave(wave):
    a = 0.01
    result = fit(wave.perturbed(a), P, OMEGA_C3)
    assert np.max(np.abs(result.residuals)) < 1e-9
    assert abs(result.lam - 1.0) < 10 * a
    assert result.xi_h1l2 < 5 * a * wave.Phi.h1l2_norm()
    rebuilt = result.reconstruct(P, OMEGA_C3)
    assert_allclose(rebuilt.u, wave.perturbed(a).u, atol=1e-9)
    xi = remainder(wave.perturbed(a), P, OMEGA_C3, result.theta, result.y, result.lam)
    assert_allclose(xi.u, result.xi.u, atol=1e-12)
    row = result.as_row()
    assert set(row) >= {"theta", "y", "lambda", "xi_h1l2", "eta_minus_i_omega_xi_l2", "F1", "F2", "F3"}


def test_residuals_vanish_for_orthogonal_remainder(wave):
    assert_allclose(orthogonality_residuals(wave.Phi.scaled(0.0), wave), 0.0)


def test_capture_radius(wave):
    far = wave.Phi.scaled(1.5)
    with pytest.raises(ModulationError) as info:
        fit(far, P, OMEGA_C3)
    assert "capture radius" in str(info.value)
    assert info.value.best["lambda"] == 1.0


def test_track_unwraps_and_stays_near(wave):
    cfg = EvolverConfig(dt=0.01, t_end=2.0, record_every=20)
    traj = evolve(wave.perturbed(0.005), cfg, P)
    tracker = track(traj.samples, P, OMEGA_C3)
    assert not tracker.exited
    assert len(tracker.fits) == len(traj.samples)
    theta = np.asarray(tracker.theta)
    assert np.all(np.abs(np.diff(theta)) < math.pi)
    assert np.all(np.abs(np.asarray(tracker.y)) < 1e-6)
    rates = tracker.rates()
    assert_allclose(rates["theta_dot"], np.asarray(tracker.lam) * OMEGA_C3, atol=0.1)
    assert len(tracker.rows()) == len(traj.samples)
    assert tracker.rows()[0]["exit_flag"] == 0


def test_track_records_exit(wave):
    tracker = ModulationTrack(P, OMEGA_C3)
    assert tracker.update(wave.Phi) is not None
    assert tracker.update(wave.Phi.scaled(2.0).at_time(0.1)) is None
    assert tracker.exited
    assert tracker.exit_time == pytest.approx(0.1)
    assert tracker.update(wave.Phi) is None


def test_control_quantities(wave):
    a = 0.01
    s = wave.perturbed(a)
    result = fit(s, P, OMEGA_C3)
    assert math.isfinite(control_lambda_defect(s, result, wave))
    assert remainder_ratio(result, a) > 0.0
    assert math.isnan(remainder_ratio(fit(wave.Phi, P, OMEGA_C3), 0.0))


def test_fit_recovers_family_representative(wave):
    s = build_family(P, 1.02 * OMEGA_C3, wave.grid).orbit_point(0.1, 0.5)
    result = fit(s, P, OMEGA_C3)
    assert result.theta == pytest.approx(0.1, abs=1e-8)
    assert result.y == pytest.approx(0.5, abs=1e-8)
    assert result.lam == pytest.approx(1.02, abs=1e-8)
    assert result.xi_h1l2 < 1e-8


def test_fit_is_covariant(wave):
    s = wave.perturbed(0.01)
    base = fit(s, P, OMEGA_C3)
    moved = fit(
        s.rotated(0.4).shifted(1.5),
        P,
        OMEGA_C3,
        guess=(base.theta + 0.4, base.y + 1.5, base.lam),
    )
    assert moved.theta == pytest.approx(wrap_angle(base.theta + 0.4), abs=1e-9)
    assert moved.y == pytest.approx(base.y + 1.5, abs=1e-9)
    assert moved.lam == pytest.approx(base.lam, abs=1e-9)
    assert_allclose(moved.xi.u, base.xi.u, atol=1e-9)
    assert_allclose(moved.xi.v, base.xi.v, atol=1e-9)


def test_fit_agrees_from_several_starts(wave):
    s = wave.perturbed(0.01)
    base = fit(s, P, OMEGA_C3)
    for d_theta, d_y, d_lam in [(0.05, 0.0, 0.0), (-0.05, 0.1, 0.0), (0.0, -0.1, 0.01), (0.03, 0.05, -0.01), (0.0, 0.0, 0.02)]:
        other = fit(s, P, OMEGA_C3, guess=(base.theta + d_theta, base.y + d_y, base.lam + d_lam))
        assert other.theta == pytest.approx(base.theta, abs=1e-8)
        assert other.y == pytest.approx(base.y, abs=1e-8)
        assert other.lam == pytest.approx(base.lam, abs=1e-8)


@pytest.fixture(scope="module")
def standing_run(wave):
    cfg = EvolverConfig(dt=5e-3, t_end=10.0, record_every=100)
    return evolve(wave.Phi, cfg, P).samples


def test_track_follows_the_standing_wave(standing_run):
    tracker = track(standing_run, P, OMEGA_C3)
    assert not tracker.exited
    t = np.asarray(tracker.times)
    assert t[-1] == pytest.approx(10.0)
    assert_allclose(tracker.theta, OMEGA_C3 * t, atol=1e-3)
    assert_allclose(tracker.y, 0.0, atol=1e-8)
    assert_allclose(tracker.lam, 1.0, atol=1e-3)


def test_track_follows_a_translated_wave(standing_run):
    tracker = track([s.shifted(2.0) for s in standing_run], P, OMEGA_C3)
    assert not tracker.exited
    assert len(tracker.fits) == len(standing_run)
    assert_allclose(tracker.y, 2.0, atol=1e-6)
