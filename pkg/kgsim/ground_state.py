"""
Closed-form standing waves of the 1D nonlinear Klein-Gordon equation.

The ground state of -phi'' + (1 - omega^2) phi - phi^p = 0 is

    phi_omega(x) = (1 - omega^2)^{1/(p-1)} phi_0(sqrt(1 - omega^2) x),
    phi_0(x) = ((p+1)/2)^{1/(p-1)} sech^{2/(p-1)}((p-1) x / 2).
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np

from .config import config
from .errors import ConfigurationError
from .spectral_grid import Grid, PhaseState, d2x, norms, quad, spectral_tail_ratio

UNDERFLOW = 1e-300


def critical_frequency(p: float) -> float:
    """omega_c = sqrt((p-1)/4), the frequency where dQ/domega vanishes."""
    if not 1.0 < p < 5.0:
        raise ConfigurationError(f"exponent p must lie in (1, 5), got {p}")
    return math.sqrt((p - 1.0) / 4.0)


@dataclass(frozen=True)
class SolitonParams:
    """Exponent and frequency of a standing wave."""

    p: float
    omega: float

    def __post_init__(self):
        critical_frequency(self.p)
        if not abs(self.omega) < 1.0:
            raise ConfigurationError(f"frequency must satisfy |omega| < 1, got {self.omega}")

    @classmethod
    def critical(cls, p: float, sign: int = 1) -> "SolitonParams":
        return cls(p, math.copysign(critical_frequency(p), sign))

    @property
    def m2(self) -> float:
        return 1.0 - self.omega ** 2

    @property
    def omega_c(self) -> float:
        return critical_frequency(self.p)

    def is_critical(self, rtol: float = 1e-12) -> bool:
        return abs(abs(self.omega) - self.omega_c) <= rtol * self.omega_c

    def scaled(self, lam: float) -> "SolitonParams":
        return SolitonParams(self.p, lam * self.omega)


def _sech_power(z: np.ndarray, beta: float) -> np.ndarray:
    """sech(z)**beta via exp(beta * log sech z), flushed to zero below 1e-300."""
    az = np.abs(z)
    log_sech = -az - np.log1p(np.exp(-2.0 * az)) + math.log(2.0)
    out = np.exp(beta * log_sech)
    out[out < UNDERFLOW] = 0.0
    return out


def phi0_profile(p: float, x: np.ndarray) -> np.ndarray:
    amplitude = ((p + 1.0) / 2.0) ** (1.0 / (p - 1.0))
    return amplitude * _sech_power(0.5 * (p - 1.0) * x, 2.0 / (p - 1.0))


def elliptic_residual(grid: Grid, phi: np.ndarray, p: float, m2: float) -> float:
    """max |-phi'' + m2 phi - phi^p|."""
    res = -d2x(grid, phi) + m2 * phi - phi ** p
    return float(np.max(np.abs(res)))


def build_phi0(p: float, grid: Grid, tol: float = config.RESIDUAL_TOL) -> np.ndarray:
    """Ground state at omega = 0, accepted only if its discrete residual is below tol."""
    critical_frequency(p)
    phi = phi0_profile(p, grid.x)
    residual = elliptic_residual(grid, phi, p, 1.0)
    if residual > tol:
        raise ConfigurationError(
            f"phi_0 residual {residual:.3e} exceeds {tol:.1e}; grid L={grid.length}, n={grid.n} too small or coarse"
        )
    return phi


@dataclass(frozen=True)
class StandingWave:
    """phi_omega with its omega-derivative and the pair fields built from it."""

    params: SolitonParams
    grid: Grid
    phi: np.ndarray
    dphi_domega: np.ndarray

    @property
    def p(self) -> float:
        return self.params.p

    @property
    def omega(self) -> float:
        return self.params.omega

    @cached_property
    def Phi(self) -> PhaseState:
        return PhaseState(self.grid, self.phi, 1j * self.omega * self.phi)

    @cached_property
    def psi(self) -> PhaseState:
        return PhaseState(self.grid, self.dphi_domega, 1j * self.omega * self.dphi_domega)

    @cached_property
    def Psi(self) -> PhaseState:
        return PhaseState(self.grid, 4.0 * self.omega * self.phi, np.zeros(self.grid.n))

    @cached_property
    def dPhi_domega(self) -> PhaseState:
        """d/domega of (phi, i omega phi)."""
        return PhaseState(
            self.grid,
            self.dphi_domega,
            1j * (self.phi + self.omega * self.dphi_domega),
        )

    @cached_property
    def iPhi(self) -> PhaseState:
        return self.Phi.scaled(1j)

    @cached_property
    def dxPhi(self) -> PhaseState:
        return self.Phi.dx()

    @cached_property
    def l2sq(self) -> float:
        return float(quad(self.grid, self.phi ** 2))

    def perturbed(self, a: float) -> PhaseState:
        """The datum (1 + a) Phi_omega."""
        return self.Phi.scaled(1.0 + a)

    def orbit_point(self, theta: float, y: float) -> PhaseState:
        """e^{i theta} Phi_omega(. - y)."""
        return self.Phi.rotated(theta).shifted(y)

    def residual(self) -> float:
        return elliptic_residual(self.grid, self.phi, self.p, self.params.m2)

    def derivative_identity_residual(self) -> float:
        """max |(-d_xx + m2 - p phi^{p-1}) d_omega phi - 2 omega phi|."""
        lin = (
            -d2x(self.grid, self.dphi_domega)
            + self.params.m2 * self.dphi_domega
            - self.p * self.phi ** (self.p - 1.0) * self.dphi_domega
        )
        return float(np.max(np.abs(lin - 2.0 * self.omega * self.phi)))

    def pohozaev(self) -> Tuple[float, float]:
        """Relative residuals of the two Pohozaev identities."""
        n = norms(self.grid, self.phi, self.p)
        kinetic = n.h1sq - n.l2sq
        mass = self.params.m2 * n.l2sq
        scale = max(kinetic, mass, n.lp1)
        a = kinetic + mass - n.lp1
        b = kinetic - mass + 2.0 / (self.p + 1.0) * n.lp1
        return a / scale, b / scale


def build_family(
    p: float,
    omega: float,
    grid: Grid,
    check: bool = True,
    boundary_tol: float = config.BOUNDARY_TOL,
    residual_tol: float = config.RESIDUAL_TOL,
) -> StandingWave:
    """phi_omega from the scaling formula, d_omega phi_omega by the chain rule."""
    params = SolitonParams(p, omega)
    m2 = params.m2
    alpha = 1.0 / (p - 1.0)
    s = math.sqrt(m2)
    x = grid.x

    phi = m2 ** alpha * phi0_profile(p, s * x)
    # phi_0'(y) = -tanh(c y) phi_0(y), c = (p-1)/2
    dphi_dm2 = phi * (alpha / m2 - np.tanh(0.5 * (p - 1.0) * s * x) * x / (2.0 * s))
    dphi_domega = -2.0 * omega * dphi_dm2

    wave = StandingWave(params, grid, phi, dphi_domega)
    if check:
        edge = max(abs(phi[0]), abs(phi[-1]))
        if edge > boundary_tol:
            raise ConfigurationError(
                f"profile is {edge:.2e} at the boundary (tolerance {boundary_tol:.1e}); "
                f"use L >= {suggested_length(p, omega):g}"
            )
        residual = wave.residual()
        if residual > residual_tol:
            raise ConfigurationError(
                f"elliptic residual {residual:.3e} exceeds {residual_tol:.1e} on L={grid.length}, n={grid.n}"
            )
    return wave


def suggested_length(p: float, omega: float, tol: float = 1e-12) -> float:
    """Smallest multiple of 10 (at least 80) on which phi_omega decays below tol at the edges."""
    params = SolitonParams(p, omega)
    s = math.sqrt(params.m2)
    beta = 2.0 / (p - 1.0)
    amplitude = params.m2 ** (1.0 / (p - 1.0)) * ((p + 1.0) / 2.0) ** (beta / 2.0) * 2.0 ** beta
    half = math.log(max(amplitude / tol, 1.0)) / s
    return max(config.DEFAULT_LENGTH, 10.0 * math.ceil(2.0 * half / 10.0))


def resolve_grid(p: float, omega: float, grid: Grid, tol: float = config.SPECTRAL_TAIL_TOL) -> Grid:
    """Double n until the profile's Fourier tail is below tol."""
    while True:
        phi = build_family(p, omega, grid, check=False).phi
        if spectral_tail_ratio(phi) <= tol:
            return grid
        if 2 * grid.n > config.MAX_NODES:
            raise ConfigurationError(f"spectral tail still above {tol:.1e} at n={grid.n}")
        if config.VERBOSE:
            print(f"🔧 Spectral tail above {tol:.1e}; refining grid to n={2 * grid.n}")
        grid = grid.refined()
