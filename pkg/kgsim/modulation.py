"""
Modulation decomposition near the standing-wave orbit.

A state is written as

    u = e^{i theta} (Phi_{lam omega} + xi)(. - y),

with (theta, y, lam) fixed by the orthogonality conditions

    <xi, i Phi_{lam omega}> = <xi, d_x Phi_{lam omega}> = <xi, Psi_{lam omega}> = 0.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy import fft

from .config import config
from .errors import ConfigurationError, ModulationError
from .functionals import kinetic_defect
from .ground_state import StandingWave, build_family
from .spectral_grid import Grid, PhaseState, quad


@lru_cache(maxsize=32)
def _family(p: float, omega: float, grid: Grid) -> StandingWave:
    return build_family(p, omega, grid, check=False)


def wrap_angle(theta: float) -> float:
    """Map to [-pi, pi)."""
    return (theta + math.pi) % (2.0 * math.pi) - math.pi


class OrbitPoint(NamedTuple):
    distance: float
    theta: float
    y: float


@dataclass
class ModulationFit:
    theta: float
    y: float
    lam: float
    xi: PhaseState
    xi_h1l2: float
    eta_defect: float
    residuals: np.ndarray
    iterations: int = 0
    t: float = 0.0
    distance: float = float("nan")

    def reconstruct(self, p: float, omega: float) -> PhaseState:
        """e^{i theta} (Phi_{lam omega} + xi)(. - y)."""
        base = _family(p, self.lam * omega, self.xi.grid).Phi
        return (base + self.xi).rotated(self.theta).shifted(self.y)

    def as_row(self) -> Dict[str, float]:
        return {
            "t": self.t,
            "theta": self.theta,
            "y": self.y,
            "lambda": self.lam,
            "xi_h1l2": self.xi_h1l2,
            "eta_minus_i_omega_xi_l2": self.eta_defect,
            "F1": float(self.residuals[0]),
            "F2": float(self.residuals[1]),
            "F3": float(self.residuals[2]),
        }


def _correlation_spectrum(s: PhaseState, target: PhaseState) -> np.ndarray:
    """Fourier coefficients of y -> <s, target(. - y)>_{H1xL2} (complex)."""
    grid = s.grid
    weight = 1.0 + grid.k_odd ** 2
    uh, vh = fft.fft(s.u), fft.fft(s.v)
    th_u, th_v = fft.fft(target.u), fft.fft(target.v)
    return weight * uh * np.conj(th_u) + vh * np.conj(th_v)


def _correlation(C: np.ndarray, grid: Grid, y: float, order: int = 0) -> complex:
    """order-th y-derivative of the correlation at continuous y."""
    k = grid.k
    phase = np.exp(1j * k * y) * (1j * k) ** order
    return complex(grid.dx / grid.n * np.sum(C * phase))


def locate_on_orbit(s: PhaseState, wave: StandingWave, newton_steps: int = 20) -> OrbitPoint:
    """
    Minimise ||s - e^{i theta} Phi(. - y)||_{H1xL2} over (theta, y).

    y starts at the FFT cross-correlation peak and is refined by Newton on |c(y)|^2;
    theta = arg c(y) is the exact minimiser for fixed y.
    """
    grid = s.grid
    C = _correlation_spectrum(s, wave.Phi)
    corr = grid.dx * fft.ifft(C)
    j = int(np.argmax(np.abs(corr)))
    y = float(grid.wrap(np.asarray(j * grid.dx)))

    for _ in range(newton_steps):
        c0 = _correlation(C, grid, y)
        c1 = _correlation(C, grid, y, 1)
        c2 = _correlation(C, grid, y, 2)
        g1 = 2.0 * (np.conj(c0) * c1).real
        g2 = 2.0 * (abs(c1) ** 2 + (np.conj(c0) * c2).real)
        if g2 >= 0.0:
            break
        dy = -g1 / g2
        y += dy
        if abs(dy) < 1e-15 * max(1.0, abs(y)):
            break
    y = float(grid.wrap(np.asarray(y)))
    c = _correlation(C, grid, y)
    theta = float(np.angle(c)) if abs(c) > 0 else 0.0
    diff = s - wave.orbit_point(theta, y)
    return OrbitPoint(diff.h1l2_norm(), theta, y)


def orbit_distance(s: PhaseState, p: float, omega: float) -> float:
    """inf over (theta, y) of ||s - e^{i theta} Phi_omega(. - y)||_{H1xL2}."""
    return locate_on_orbit(s, _family(p, omega, s.grid)).distance


def remainder(s: PhaseState, p: float, omega: float, theta: float, y: float, lam: float) -> PhaseState:
    """xi = e^{-i theta} s(. + y) - Phi_{lam omega}."""
    wave = _family(p, lam * omega, s.grid)
    return s.shifted(-y).rotated(-theta) - wave.Phi


def orthogonality_residuals(xi: PhaseState, wave: StandingWave) -> np.ndarray:
    return np.array([xi.pairing(wave.iPhi), xi.pairing(wave.dxPhi), xi.pairing(wave.Psi)])


class _Residuals:
    def __init__(self, s: PhaseState, p: float, omega: float):
        self.s, self.p, self.omega = s, p, omega

    def __call__(self, z: np.ndarray) -> Tuple[np.ndarray, PhaseState]:
        theta, y, lam = z
        if not lam > 0 or not abs(lam * self.omega) < 1.0:
            raise ConfigurationError(f"lambda={lam} leaves the frequency range")
        xi = remainder(self.s, self.p, self.omega, theta, y, lam)
        wave = _family(self.p, lam * self.omega, self.s.grid)
        return orthogonality_residuals(xi, wave), xi

    def jacobian(self, z: np.ndarray, step: float) -> np.ndarray:
        J = np.empty((3, 3))
        for col in range(3):
            h = step * max(1.0, abs(z[col])) if col == 2 else step
            dz = np.zeros(3)
            dz[col] = h
            plus, _ = self(z + dz)
            minus, _ = self(z - dz)
            J[:, col] = (plus - minus) / (2.0 * h)
        return J


def fit(
    s: PhaseState,
    p: float,
    omega: float,
    guess: Tuple[float, float, float] = (0.0, 0.0, 1.0),
    capture_radius: Optional[float] = config.CAPTURE_RADIUS,
    max_iter: int = config.NEWTON_MAX_ITER,
    tol: float = config.NEWTON_TOL,
    fd_step: float = config.FD_STEP,
) -> ModulationFit:
    """
    Solve the three orthogonality conditions for (theta, y, lam) by Newton's method
    with a finite-difference Jacobian.

    Raises ModulationError (with the best iterate) when s lies outside the capture
    radius or Newton does not converge.
    """
    distance = float("nan")
    if capture_radius is not None:
        distance = orbit_distance(s, p, omega)
        if distance > capture_radius:
            raise ModulationError(
                f"orbit distance {distance:.3e} exceeds capture radius {capture_radius}",
                best={"theta": guess[0], "y": guess[1], "lambda": guess[2]},
            )

    F = _Residuals(s, p, omega)
    scale = max(1.0, s.l2l2_norm())
    z = np.array(guess, dtype=float)
    try:
        res, xi = F(z)
    except ConfigurationError as exc:
        raise ModulationError(str(exc), best={"theta": z[0], "y": z[1], "lambda": z[2]}) from exc
    best = (z.copy(), res.copy())

    for iteration in range(max_iter + 1):
        if np.max(np.abs(res)) < tol * scale:
            return _make_fit(s, p, omega, z, xi, res, iteration, distance)
        if iteration == max_iter:
            break
        try:
            J = F.jacobian(z, fd_step)
            dz = np.linalg.solve(J, -res)
        except (np.linalg.LinAlgError, ConfigurationError):
            break

        # halve the step until the residual decreases
        accepted = False
        for _ in range(8):
            try:
                trial_res, trial_xi = F(z + dz)
            except ConfigurationError:
                dz *= 0.5
                continue
            if np.linalg.norm(trial_res) < np.linalg.norm(res) or np.max(np.abs(trial_res)) < tol * scale:
                accepted = True
                break
            dz *= 0.5
        if not accepted:
            break
        z, res, xi = z + dz, trial_res, trial_xi
        if np.linalg.norm(res) < np.linalg.norm(best[1]):
            best = (z.copy(), res.copy())

    bz, bres = best
    raise ModulationError(
        f"modulation Newton did not converge (max residual {np.max(np.abs(bres)):.3e})",
        best={"theta": float(bz[0]), "y": float(bz[1]), "lambda": float(bz[2])},
        residuals=bres,
    )


def _make_fit(s, p, omega, z, xi, res, iterations, distance) -> ModulationFit:
    theta, y, lam = (float(v) for v in z)
    eta_defect = math.sqrt(quad(xi.grid, np.abs(xi.v - 1j * lam * omega * xi.u) ** 2))
    return ModulationFit(
        theta=wrap_angle(theta),
        y=float(s.grid.wrap(np.asarray(y))),
        lam=lam,
        xi=xi,
        xi_h1l2=xi.h1l2_norm(),
        eta_defect=eta_defect,
        residuals=res,
        iterations=iterations,
        t=s.t,
        distance=distance,
    )


@dataclass
class ModulationTrack:
    """Fits along one trajectory, unwrapped, stopped at the first failure."""

    p: float
    omega: float
    times: List[float] = field(default_factory=list)
    fits: List[ModulationFit] = field(default_factory=list)
    theta: List[float] = field(default_factory=list)
    y: List[float] = field(default_factory=list)
    lam: List[float] = field(default_factory=list)
    exited: bool = False
    exit_time: Optional[float] = None
    exit_reason: str = ""

    def update(self, s: PhaseState, capture_radius: Optional[float] = config.CAPTURE_RADIUS) -> Optional[ModulationFit]:
        """Fit s warm-started from the previous sample; None once the track has exited."""
        if self.exited:
            return None
        if self.fits:
            dt = s.t - self.times[-1]
            guess = (self.theta[-1] + self.lam[-1] * self.omega * dt, self.y[-1], self.lam[-1])
        else:
            point = locate_on_orbit(s, _family(self.p, self.omega, s.grid))
            guess = (point.theta, point.y, 1.0)
        try:
            result = fit(s, self.p, self.omega, guess, capture_radius)
        except ModulationError as exc:
            self.exited = True
            self.exit_time = s.t
            self.exit_reason = str(exc)
            if config.VERBOSE:
                print(f"🚪 Modulation fit failed at t={s.t:.6g}: {exc}")
            return None

        theta, y = result.theta, result.y
        if self.fits:
            theta = self.theta[-1] + wrap_angle(theta - self.theta[-1])
            y = self.y[-1] + float(s.grid.wrap(np.asarray(y - self.y[-1])))
        self.times.append(s.t)
        self.fits.append(result)
        self.theta.append(theta)
        self.y.append(y)
        self.lam.append(result.lam)
        return result

    def rates(self) -> Dict[str, np.ndarray]:
        """Finite-difference theta', y', lam' on the recorded times."""
        if len(self.times) < 2:
            empty = np.zeros(len(self.times))
            return {"theta_dot": empty, "y_dot": empty, "lambda_dot": empty}
        t = np.asarray(self.times)
        return {
            "theta_dot": np.gradient(np.asarray(self.theta), t),
            "y_dot": np.gradient(np.asarray(self.y), t),
            "lambda_dot": np.gradient(np.asarray(self.lam), t),
        }

    def modulation_ratio(self) -> np.ndarray:
        """(|theta' - lam omega| + |y'| + |lam'|) / ||xi||_{H1xL2} per sample."""
        rates = self.rates()
        lam = np.asarray(self.lam)
        numerator = (
            np.abs(rates["theta_dot"] - lam * self.omega) + np.abs(rates["y_dot"]) + np.abs(rates["lambda_dot"])
        )
        xi = np.array([f.xi_h1l2 for f in self.fits])
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(xi > 0, numerator / xi, np.nan)

    def rows(self) -> List[Dict[str, float]]:
        rates = self.rates()
        out = []
        for j, f in enumerate(self.fits):
            row = f.as_row()
            row.update(
                theta=self.theta[j],
                y=self.y[j],
                theta_dot=float(rates["theta_dot"][j]),
                y_dot=float(rates["y_dot"][j]),
                lambda_dot=float(rates["lambda_dot"][j]),
                exit_flag=0,
            )
            out.append(row)
        return out


def track(
    samples: Iterable[PhaseState],
    p: float,
    omega: float,
    capture_radius: Optional[float] = config.CAPTURE_RADIUS,
) -> ModulationTrack:
    """Sequential warm-started fits over recorded samples; stops at the first failure."""
    tracker = ModulationTrack(p, omega)
    for s in samples:
        if tracker.update(s, capture_radius) is None:
            break
    return tracker


def control_lambda_defect(s: PhaseState, result: ModulationFit, wave: StandingWave) -> float:
    """||v - i w u||^2 - (lam - 1)^2 w^2 ||phi||^2 - ||eta - i w xi||^2."""
    omega = wave.omega
    xi = result.xi
    eta_term = quad(xi.grid, np.abs(xi.v - 1j * omega * xi.u) ** 2)
    return kinetic_defect(s, omega) - (result.lam - 1.0) ** 2 * omega ** 2 * wave.l2sq - float(eta_term)


def remainder_ratio(result: ModulationFit, a: float) -> float:
    """||xi||^2_{H1xL2} / (a |lam - 1| + a^2 + (lam - 1)^2)."""
    d = abs(result.lam - 1.0)
    denominator = a * d + a * a + d * d
    if denominator == 0.0:
        return float("nan")
    return result.xi_h1l2 ** 2 / denominator
