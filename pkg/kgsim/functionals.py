"""
Conserved functionals of the Klein-Gordon flow and the action S_omega = E + omega Q.

Energy uses the halved normalisation

    E(u, v) = (||v||^2 + ||u_x||^2 + ||u||^2) / 2 - ||u||_{p+1}^{p+1} / (p+1),

under which Phi_omega is a critical point of S_omega.
"""

import math
from typing import Dict, Iterable, List, NamedTuple, Optional

import numpy as np
from scipy import special

from .ground_state import SolitonParams, StandingWave, build_family, critical_frequency, phi0_profile
from .spectral_grid import Grid, PhaseState, as_real, ddx, norms, quad


class ConservedTriple(NamedTuple):
    Q: float
    P: float
    E: float

    def as_dict(self) -> Dict[str, float]:
        return self._asdict()


def charge(s: PhaseState) -> float:
    """Q = Im int u conj(v)."""
    return float(quad(s.grid, np.imag(s.u * np.conj(s.v))))


def momentum(s: PhaseState) -> float:
    """P = Re int u_x conj(v)."""
    return float(quad(s.grid, np.real(ddx(s.grid, s.u) * np.conj(s.v))))


def energy(s: PhaseState, p: float) -> float:
    n = norms(s.grid, s.u, p)
    kinetic = as_real(quad(s.grid, s.v * np.conj(s.v)))
    return 0.5 * (kinetic + n.h1sq) - n.lp1 / (p + 1.0)


def action(s: PhaseState, p: float, omega_eff: float) -> float:
    """S = E + omega_eff * Q."""
    return energy(s, p) + omega_eff * charge(s)


def conserved(s: PhaseState, p: float) -> ConservedTriple:
    return ConservedTriple(charge(s), momentum(s), energy(s, p))


def charge_gradient(s: PhaseState) -> PhaseState:
    """Gradient of Q in the real pairing: Q'(u, v) = (i v, -i u)."""
    return PhaseState(s.grid, 1j * s.v, -1j * s.u, s.t)


def kinetic_defect(s: PhaseState, omega: float) -> float:
    """||v - i omega u||^2."""
    w = s.v - 1j * omega * s.u
    return as_real(quad(s.grid, w * np.conj(w)))


def phi0_mass(p: float) -> float:
    """||phi_0||^2 in closed form (a Beta integral of sech^{4/(p-1)})."""
    critical_frequency(p)
    beta = 2.0 / (p - 1.0)
    amplitude_sq = ((p + 1.0) / 2.0) ** beta
    return amplitude_sq * special.beta(beta, 0.5) / (0.5 * (p - 1.0))


def charge_slope(p: float, omega: float, grid: Optional[Grid] = None) -> float:
    """
    dQ(Phi_omega)/domega = -(1 - w^2)^{2/(p-1) - 3/2} (1 - 4 w^2 / (p-1)) ||phi_0||^2.

    With a grid, ||phi_0||^2 is taken by quadrature instead of the closed form.
    """
    params = SolitonParams(p, omega)
    if grid is None:
        mass0 = phi0_mass(p)
    else:
        mass0 = float(quad(grid, phi0_profile(p, grid.x) ** 2))
    exponent = 2.0 / (p - 1.0) - 1.5
    return -(params.m2 ** exponent) * (1.0 - 4.0 * omega ** 2 / (p - 1.0)) * mass0


def stability_regime(p: float, omega: float, rtol: float = 1e-9) -> str:
    """'stable' above omega_c, 'unstable' below, 'critical' at |omega| = omega_c."""
    params = SolitonParams(p, omega)
    if params.is_critical(rtol):
        return "critical"
    return "stable" if abs(omega) > params.omega_c else "unstable"


def standing_wave_values(wave: StandingWave) -> Dict[str, float]:
    """Scalar diagnostics of Phi_omega."""
    p, omega = wave.p, wave.omega
    n = norms(wave.grid, wave.phi, p)
    Q = charge(wave.Phi)
    E = energy(wave.Phi, p)
    pohozaev_a, pohozaev_b = wave.pohozaev()
    return {
        "p": p,
        "omega": omega,
        "omega_c": wave.params.omega_c,
        "m2": wave.params.m2,
        "l2sq": n.l2sq,
        "h1sq": n.h1sq,
        "lp1": n.lp1,
        "Q": Q,
        "P": momentum(wave.Phi),
        "E": E,
        "S": E + omega * Q,
        "E_closed_form": (p - 1.0 + 4.0 * omega ** 2) / (p + 3.0) * n.l2sq,
        "critical_combination": (p + 3.0) * E + 8.0 * omega * Q,
        "dQ_domega": charge_slope(p, omega, wave.grid),
        "elliptic_residual": wave.residual(),
        "pohozaev_a": pohozaev_a,
        "pohozaev_b": pohozaev_b,
        "regime": stability_regime(p, omega),
    }


def vakhitov_kolokolov_table(p: float, omegas: Iterable[float], grid: Grid) -> List[Dict[str, float]]:
    """Mass, charge, energy, action and dQ/domega along a frequency sweep."""
    rows = []
    for omega in omegas:
        wave = build_family(p, omega, grid)
        Q = charge(wave.Phi)
        E = energy(wave.Phi, p)
        rows.append(
            {
                "omega": omega,
                "l2sq": wave.l2sq,
                "Q": Q,
                "E": E,
                "S": E + omega * Q,
                "dQ_domega": charge_slope(p, omega, grid),
                "regime": stability_regime(p, omega),
            }
        )
    return rows


def charge_derivative_fd(p: float, omega: float, grid: Grid, h: float = 1e-4) -> float:
    """Central difference of omega -> Q(Phi_omega)."""
    plus = charge(build_family(p, omega + h, grid, check=False).Phi)
    minus = charge(build_family(p, omega - h, grid, check=False).Phi)
    return (plus - minus) / (2.0 * h)


def rescaled_action_gap(wave: StandingWave, lam: float) -> float:
    """S_{lam w}(Phi_{lam w}) - S_{lam w}(Phi_w)."""
    omega_eff = lam * wave.omega
    rescaled = build_family(wave.p, omega_eff, wave.grid, check=False)
    return action(rescaled.Phi, wave.p, omega_eff) - action(wave.Phi, wave.p, omega_eff)


def charge_gap(wave: StandingWave, a: float) -> float:
    """Q((1+a) Phi) - Q(Phi) minus its exact value -(2a + a^2) omega ||phi||^2."""
    gap = charge(wave.perturbed(a)) - charge(wave.Phi)
    return gap + (2.0 * a + a * a) * wave.omega * wave.l2sq


def mainpart(s: PhaseState, p: float, omega: float) -> float:
    """-(p+3)/(p-1) 2E - 16 omega/(p-1) Q."""
    return -(p + 3.0) / (p - 1.0) * 2.0 * energy(s, p) - 16.0 * omega / (p - 1.0) * charge(s)


def mainpart_prediction(wave: StandingWave, a: float) -> float:
    """(5-p)/(p-1) 4 a omega^2 ||phi||^2."""
    p = wave.p
    return (5.0 - p) / (p - 1.0) * 4.0 * a * wave.omega ** 2 * wave.l2sq


def mainpart_residual(wave: StandingWave, a: float) -> float:
    return mainpart(wave.perturbed(a), wave.p, wave.omega) - mainpart_prediction(wave, a)


def action_u0_residual(wave: StandingWave, a: float, lam: float) -> float:
    """S_{lam w}(u0) - S_{lam w}(Phi) + 2 (lam - 1) a w^2 ||phi||^2 for u0 = (1+a) Phi."""
    omega_eff = lam * wave.omega
    gap = action(wave.perturbed(a), wave.p, omega_eff) - action(wave.Phi, wave.p, omega_eff)
    return gap + 2.0 * (lam - 1.0) * a * wave.omega ** 2 * wave.l2sq


def fitted_order(hs: Iterable[float], errors: Iterable[float]) -> float:
    """Least-squares slope of log|error| against log h."""
    hs = np.asarray(list(hs), dtype=float)
    errors = np.abs(np.asarray(list(errors), dtype=float))
    slope, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    return float(slope)


def relative_drift(values: Iterable[float], scale: float) -> float:
    values = np.asarray(list(values), dtype=float)
    if values.size == 0:
        return 0.0
    scale = max(abs(scale), math.ulp(1.0))
    return float(np.max(np.abs(values - values[0])) / scale)

