import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import fft

from kgsim.errors import ConfigurationError, GridMismatchError, NonFiniteFieldError
from kgsim.spectral_grid import (
    Grid,
    PhaseState,
    as_real,
    d2x,
    ddx,
    inner,
    norms,
    quad,
    shift,
    spectral_tail_ratio,
)


@pytest.fixture
def small():
    return Grid(40.0, 256)


def test_grid_layout(small):
    assert small.dx == pytest.approx(40.0 / 256)
    assert small.x[0] == pytest.approx(-20.0)
    assert small.x[-1] == pytest.approx(20.0 - small.dx)
    assert small.k_odd[128] == 0.0
    assert small.refined().n == 512


@pytest.mark.parametrize("n", [0, 100, 8])
def test_grid_rejects_bad_node_count(n):
    with pytest.raises(ConfigurationError):
        Grid(10.0, n)


def test_grid_rejects_nonpositive_length():
    with pytest.raises(ConfigurationError):
        Grid(0.0, 64)


def test_wrap(small):
    assert_allclose(small.wrap(np.array([21.0, -21.0, 0.5])), [-19.0, 19.0, 0.5])


def test_derivatives_of_trig_mode(small):
    k = 2.0 * np.pi * 3 / small.length
    f = np.sin(k * small.x)
    assert_allclose(ddx(small, f).real, k * np.cos(k * small.x), atol=1e-11)
    assert_allclose(d2x(small, f), -(k ** 2) * f, atol=1e-11)
    assert np.isrealobj(d2x(small, f))


def test_quadrature_and_norms_of_gaussian(small):
    f = np.exp(-small.x ** 2)
    assert quad(small, f) == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    n = norms(small, f, 3.0)
    assert n.l2sq == pytest.approx(math.sqrt(math.pi / 2), rel=1e-12)
    assert n.h1sq == pytest.approx(2 * math.sqrt(math.pi / 2), rel=1e-10)
    assert n.lp1 == pytest.approx(math.sqrt(math.pi / 4), rel=1e-12)


def test_inner_is_real_part(small):
    f = np.exp(-small.x ** 2) * (1 + 1j)
    assert inner(small, f, f) == pytest.approx(2 * math.sqrt(math.pi / 2), rel=1e-12)
    assert inner(small, f, 1j * f) == pytest.approx(0.0, abs=1e-14)


def test_shift_translates(small):
    f = np.exp(-small.x ** 2)
    assert_allclose(shift(small, f, 1.3).real, np.exp(-(small.x - 1.3) ** 2), atol=1e-12)


def test_spectral_tail(small):
    assert spectral_tail_ratio(np.exp(-small.x ** 2)) < 1e-10
    assert spectral_tail_ratio(np.sign(small.x)) > 1e-3
    assert spectral_tail_ratio(np.zeros(small.n)) == 0.0


def test_field_checks(small):
    with pytest.raises(GridMismatchError):
        ddx(small, np.zeros(100))
    bad = np.zeros(small.n)
    bad[3] = np.nan
    with pytest.raises(NonFiniteFieldError):
        quad(small, bad)
    with pytest.raises(NonFiniteFieldError):
        as_real(1.0 + 1e-3j)
    assert as_real(2.0 + 1e-15j) == 2.0


def test_phase_state_algebra(small):
    g = np.exp(-small.x ** 2)
    s = PhaseState(small, g, 1j * g)
    assert s.pairing(s) == pytest.approx(2 * math.sqrt(math.pi / 2), rel=1e-12)
    assert s.h1l2_norm() ** 2 == pytest.approx(3 * math.sqrt(math.pi / 2), rel=1e-10)
    assert (s - s).l2l2_norm() == 0.0
    assert_allclose(s.rotated(math.pi / 2).u, 1j * s.u, atol=1e-15)
    assert s.at_time(2.0).t == 2.0
    assert s.rolled(small.n).pairing(s) == pytest.approx(s.pairing(s))


def test_phase_state_grid_mismatch(small):
    a = PhaseState.zeros(small)
    b = PhaseState.zeros(small.refined())
    with pytest.raises(GridMismatchError):
        a + b


def test_derivative_of_sech():
    wide = Grid(80.0, 1024)
    x = wide.x
    assert_allclose(ddx(wide, 1.0 / np.cosh(x)).real, -np.tanh(x) / np.cosh(x), atol=1e-10)


def test_parseval(small):
    f = np.exp(-small.x ** 2 / 3.0) * (np.cos(2 * small.x) + 0.5j * small.x)
    spectral = small.dx / small.n * np.sum(np.abs(fft.fft(f)) ** 2)
    assert quad(small, np.abs(f) ** 2) == pytest.approx(spectral, rel=1e-12)


def test_integration_by_parts(small):
    x = small.x
    f = np.exp(-x ** 2) * np.cos(x) * (1 + 0.5j)
    g = np.exp(-((x - 1) ** 2) / 2) * np.exp(1j * x)
    lhs = quad(small, ddx(small, f) * np.conj(g))
    rhs = quad(small, f * np.conj(ddx(small, g)))
    scale = math.sqrt(norms(small, f, 3.0).h1sq * norms(small, g, 3.0).h1sq)
    assert abs(lhs + rhs) < 1e-10 * scale


def test_first_derivative_twice_is_second_derivative(small):
    k0 = 2.0 * np.pi / small.length
    for f in (np.sin(3 * k0 * small.x) + np.cos(5 * k0 * small.x), np.exp(-small.x ** 2)):
        twice = ddx(small, ddx(small, f))
        assert_allclose(twice.real, d2x(small, f), atol=1e-10 * np.max(np.abs(f)))
        assert np.max(np.abs(twice.imag)) < 1e-10
