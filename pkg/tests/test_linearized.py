import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from kgsim.errors import DenseCapError, RankDeficientError
from kgsim.ground_state import build_family, critical_frequency, suggested_length
from kgsim.linearized import (
    HessianOperator,
    assemble_dense,
    bootstrap_slack,
    coercivity_margin,
    eigenvalue_relation_residual,
    embed,
    h1_bootstrap,
    kernel_angle,
    pair_negative_eigenvalue,
    poschl_teller_ground,
    quadratic_form,
    scalar_spectrum,
    spectrum,
    standard_constraints,
    unembed,
)
from kgsim.spectral_grid import Grid, PhaseState

MU_CUBIC = -math.sqrt(1.5)


@pytest.fixture(scope="module")
def H(wave):
    return HessianOperator(wave)


@pytest.fixture(scope="module")
def report(H):
    return spectrum(H, k=6)


def _smooth_pair(grid, seed):
    rng = np.random.default_rng(seed)
    x = grid.x
    c = rng.normal(size=4)
    bump = np.exp(-((x - c[0]) ** 2) / 4.0)
    return PhaseState(grid, (c[1] + 1j * c[2]) * bump * np.cos(x), c[3] * 1j * np.exp(-x ** 2 / 9.0))


def test_embedding_is_isometric(grid):
    x = _smooth_pair(grid, 1)
    y = _smooth_pair(grid, 2)
    assert embed(x) @ embed(y) == pytest.approx(x.pairing(y), rel=1e-12)
    assert_allclose(unembed(grid, embed(x)).u, x.u, atol=1e-14)


def test_dense_matrix_matches_operator(H, grid):
    M = assemble_dense(H)
    assert_allclose(M, M.T)
    x = _smooth_pair(grid, 3)
    y = _smooth_pair(grid, 4)
    assert embed(y) @ M @ embed(x) == pytest.approx(H(x).pairing(y), rel=1e-9, abs=1e-12)
    assert embed(x) @ M @ embed(x) == pytest.approx(quadratic_form(H, x), rel=1e-9)


def test_symmetry_of_pairing(H, grid):
    x = _smooth_pair(grid, 5)
    y = _smooth_pair(grid, 6)
    assert H(x).pairing(y) == pytest.approx(H(y).pairing(x), rel=1e-10, abs=1e-12)


def test_kernel_directions(H, wave):
    assert H(wave.iPhi).l2l2_norm() < 1e-9
    assert H(wave.dxPhi).l2l2_norm() < 1e-9


def test_omega_derivative_direction(H, wave):
    image = H(wave.psi)
    assert_allclose(image.u, 2.0 * wave.omega * wave.phi, atol=1e-7)
    assert_allclose(image.v, 0.0, atol=1e-12)
    # <H psi, psi> = omega d||phi||^2/domega = -||phi||^2 at the critical frequency
    assert quadratic_form(H, wave.psi) == pytest.approx(-wave.l2sq, rel=1e-8)


def test_spectrum_counts(report):
    assert report.n_negative == 1
    assert report.n_near_zero == 2
    assert report.eigenvalues[0] == pytest.approx(MU_CUBIC, abs=1e-6)
    assert report.eigenvalues[3] > 0.1
    assert np.all(np.diff(report.eigenvalues) >= 0)


def test_kernel_angle(report, wave):
    assert kernel_angle(report, wave) < 1e-4


def test_scalar_ground_state_and_eigenvalue_relation(H, report, wave):
    lam = scalar_spectrum(H, "plus", 2)
    assert lam[0] == pytest.approx(poschl_teller_ground(3.0, wave.omega), abs=1e-8)
    assert lam[0] == pytest.approx(-1.5, abs=1e-8)
    assert abs(lam[1]) < 1e-6
    assert eigenvalue_relation_residual(report.eigenvalues[0], lam[0], wave.omega) < 1e-6
    assert pair_negative_eigenvalue(-1.5, wave.omega) == pytest.approx(MU_CUBIC, rel=1e-12)
    assert scalar_spectrum(H, "minus", 1)[0] == pytest.approx(0.0, abs=1e-8)
    with pytest.raises(ValueError):
        scalar_spectrum(H, "middle")


def test_coercivity(H, report, wave):
    assert coercivity_margin(H) == pytest.approx(report.eigenvalues[0], abs=1e-10)
    margin = coercivity_margin(H, standard_constraints(wave))
    assert margin > 0.0
    with pytest.raises(RankDeficientError):
        coercivity_margin(H, [wave.iPhi, wave.iPhi.scaled(2.0)])


def test_bootstrap(H, wave):
    bound = h1_bootstrap(H, 0.2)
    assert bound.c_boot == pytest.approx(3.0 + wave.omega)
    assert 0.0 < bound.kappa < 1.0
    for seed in range(5):
        assert bootstrap_slack(H, bound, _smooth_pair(wave.grid, seed)) >= -1e-10
    assert math.isnan(h1_bootstrap(H, -1.0).kappa)


def test_dense_cap(H):
    with pytest.raises(DenseCapError):
        assemble_dense(H, dense_cap=100)


def _critical_operator(p, n):
    omega = critical_frequency(p)
    wave = build_family(p, omega, Grid(suggested_length(p, omega), n))
    return HessianOperator(wave), wave


@pytest.mark.parametrize("p, expected", [(2.0, 0.378), (2.5, 0.332), (4.0, 0.0834)])
def test_counts_and_margin_across_exponents(p, expected):
    H, wave = _critical_operator(p, 512)
    report = spectrum(H, k=4)
    assert report.n_negative == 1
    assert report.n_near_zero == 2
    assert quadratic_form(H, wave.psi) < 0.0
    assert coercivity_margin(H, standard_constraints(wave)) == pytest.approx(expected, rel=5e-3)


@pytest.mark.slow
@pytest.mark.parametrize("p", [2.0, 2.5, 4.0])
def test_margin_is_resolved_at_512_nodes(p):
    margins = []
    for n in (512, 1024):
        H, wave = _critical_operator(p, n)
        assert spectrum(H, k=4).n_negative == 1
        margins.append(coercivity_margin(H, standard_constraints(wave)))
    assert margins[1] == pytest.approx(margins[0], abs=1e-6)
