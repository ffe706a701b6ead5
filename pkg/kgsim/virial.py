"""
Localized virial functional and the orbital-instability experiment.

    I(t) = 4/(p-1) Re int u conj(u_t) + 2 Re int phi_R(x - y(t)) u_x conj(u_t)

At the critical frequency its derivative along the flow is, up to the tail outside
|x - y| < R,

    I'(t) = -(p+3)/(p-1) 2E - 16 omega/(p-1) Q - 2 y' P + 8/(p-1) ||u_t - i omega u||^2,

which is positive for the datum (1 + a) Phi_omega.
"""

from dataclasses import asdict, dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from .config import config
from .errors import ConfigurationError
from .evolver import BLOWN_UP, EvolverConfig, conservation_drift, evolve
from .functionals import ConservedTriple, conserved, kinetic_defect, mainpart_prediction
from .ground_state import SolitonParams, build_family, resolve_grid, suggested_length
from .modulation import ModulationTrack, control_lambda_defect, locate_on_orbit, remainder_ratio
from .spectral_grid import Grid, PhaseState, ddx, quad

INSTABILITY_OBSERVED = "INSTABILITY_OBSERVED"
STAYED_NEAR_ORBIT = "STAYED_NEAR_ORBIT"

# psi(s) = 1 + t - 16 t^3 + 23 t^4 - 9 t^5 on s = 1 + t, t in [0, 1]
_BRIDGE = np.polynomial.Polynomial([1.0, 1.0, 0.0, -16.0, 23.0, -9.0])
_BRIDGE_DERIV = _BRIDGE.deriv()


def _psi(s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Odd profile equal to s on [0, 1], zero beyond 2, C^2 quintic bridge between."""
    a = np.abs(s)
    sign = np.sign(s)
    value = np.zeros_like(a)
    deriv = np.zeros_like(a)
    inner = a <= 1.0
    bridge = (a > 1.0) & (a < 2.0)
    value[inner] = a[inner]
    deriv[inner] = 1.0
    t = a[bridge] - 1.0
    value[bridge] = _BRIDGE(t)
    deriv[bridge] = _BRIDGE_DERIV(t)
    return sign * value, deriv


@dataclass(frozen=True)
class CutoffProfile:
    R: float
    grid: Grid
    phi: np.ndarray
    dphi: np.ndarray

    def at(self, y: float) -> Tuple[np.ndarray, np.ndarray]:
        """phi_R(x - y) and phi_R'(x - y) at the wrapped coordinate."""
        if y == 0.0:
            return self.phi, self.dphi
        s = self.grid.wrap(self.grid.x - y) / self.R
        value, deriv = _psi(s)
        return self.R * value, deriv

    def outside(self, y: float) -> np.ndarray:
        """Mask of |x - y| >= R."""
        return np.abs(self.grid.wrap(self.grid.x - y)) >= self.R


def build_cutoff(R: float, grid: Grid) -> CutoffProfile:
    if not R > 0:
        raise ConfigurationError(f"cutoff radius must be positive, got {R}")
    if not 2.0 * R < 0.5 * grid.length:
        raise ConfigurationError(f"cutoff support 2R={2 * R} must stay inside L/2={0.5 * grid.length}")
    value, deriv = _psi(grid.x / R)
    return CutoffProfile(R, grid, R * value, deriv)


def I_of_t(s: PhaseState, cutoff: CutoffProfile, y: float, p: float) -> float:
    phi_R, _ = cutoff.at(y)
    first = quad(s.grid, np.real(s.u * np.conj(s.v)))
    second = quad(s.grid, phi_R * np.real(ddx(s.grid, s.u) * np.conj(s.v)))
    return float(4.0 / (p - 1.0) * first + 2.0 * second)


def first_virial_rate(s: PhaseState, p: float) -> float:
    """d/dt Re int u conj(u_t) = int |u_t|^2 - |u_x|^2 - |u|^2 + |u|^{p+1}."""
    ux = ddx(s.grid, s.u)
    au = np.abs(s.u)
    return float(quad(s.grid, np.abs(s.v) ** 2 - np.abs(ux) ** 2 - au ** 2 + au ** (p + 1.0)))


def second_virial_rate(s: PhaseState, cutoff: CutoffProfile, y: float, p: float) -> float:
    """d/dt Re int phi_R u_x conj(u_t) with y frozen."""
    _, dphi = cutoff.at(y)
    ux = ddx(s.grid, s.u)
    au = np.abs(s.u)
    density = np.abs(s.v) ** 2 + np.abs(ux) ** 2 - au ** 2 + 2.0 / (p + 1.0) * au ** (p + 1.0)
    return float(-0.5 * quad(s.grid, dphi * density))


def tail_mass(s: PhaseState, cutoff: CutoffProfile, y: float, p: float) -> float:
    """int_{|x-y| >= R} |u_t|^2 + |u_x|^2 + |u|^2 + |u|^{p+1}."""
    mask = cutoff.outside(y)
    ux = ddx(s.grid, s.u)
    au = np.abs(s.u)
    density = np.abs(s.v) ** 2 + np.abs(ux) ** 2 + au ** 2 + au ** (p + 1.0)
    return float(quad(s.grid, np.where(mask, density, 0.0)))


class VirialTerms(NamedTuple):
    main: float
    tail_bound: float


def I_dot_analytic(
    s: PhaseState,
    cutoff: CutoffProfile,
    y: float,
    ydot: float,
    p: float,
    omega: float,
    initial: ConservedTriple,
) -> VirialTerms:
    """Main terms of I'(t) from the initial conserved values; valid only at |omega| = omega_c."""
    if not SolitonParams(p, omega).is_critical(1e-9):
        raise ConfigurationError(f"virial main term needs |omega| = omega_c(p), got omega={omega}")
    main = (
        -(p + 3.0) / (p - 1.0) * 2.0 * initial.E
        - 16.0 * omega / (p - 1.0) * initial.Q
        - 2.0 * ydot * initial.P
        + 8.0 / (p - 1.0) * kinetic_defect(s, omega)
    )
    return VirialTerms(float(main), tail_mass(s, cutoff, y, p))


@dataclass
class VirialRecord:
    t: float
    I: float
    I_dot_analytic: float
    I_dot_numeric: float
    tail: float
    kinetic_term: float
    distance: float
    y: float
    lam: float
    xi_h1l2: float
    control_lambda_defect: float
    remainder_ratio: float
    Q: float
    P: float
    E: float


@dataclass
class InstabilityReport:
    status: str
    p: float
    omega: float
    a: float
    R: float
    length: float
    n: int
    t_star: Optional[float]
    exit_reason: Optional[str]
    initial_distance: float
    escape_threshold: float
    max_distance: float
    min_slope: float
    window: Tuple[float, float]
    window_slope: float
    window_max_deviation: float
    predicted_slope: float
    error_budget_constant: float
    control_lambda_constant: float
    modulation_ratio_median: float
    drift: Dict[str, float]
    records: List[VirialRecord] = field(default_factory=list)
    track_rows: List[Dict[str, float]] = field(default_factory=list)

    @property
    def instability_observed(self) -> bool:
        return self.status == INSTABILITY_OBSERVED

    def summary(self) -> Dict[str, object]:
        """Scalar fields only."""
        data = asdict(self)
        data.pop("records")
        data.pop("track_rows")
        data["window"] = list(self.window)
        return data

    def rows(self) -> List[Dict[str, float]]:
        return [asdict(r) for r in self.records]


def _window_slope(t: np.ndarray, values: np.ndarray, t_hi: float) -> float:
    mask = t <= t_hi + 1e-12
    if np.count_nonzero(mask) < 2:
        return float("nan")
    slope, _ = np.polyfit(t[mask], values[mask], 1)
    return float(slope)


def _window_deviation(t: np.ndarray, rates: np.ndarray, t_hi: float, predicted: float) -> float:
    """Largest |I_dot - predicted| / predicted over the samples with t <= t_hi."""
    mask = t <= t_hi + 1e-12
    if not np.any(mask) or not np.isfinite(predicted) or predicted == 0.0:
        return float("nan")
    return float(np.max(np.abs(rates[mask] - predicted)) / abs(predicted))


def _max_ratio(numerator: np.ndarray, denominator: np.ndarray) -> float:
    good = denominator > 0
    if not np.any(good):
        return float("nan")
    return float(np.max(np.abs(numerator[good]) / denominator[good]))


def instability_experiment(
    p: float,
    a: float,
    cfg: EvolverConfig,
    R: float = config.DEFAULT_R,
    omega: Optional[float] = None,
    length: float = 100.0,
    n: int = config.DEFAULT_NODES,
    escape_factor: float = config.ESCAPE_FACTOR,
    capture_radius: float = config.CAPTURE_RADIUS,
) -> InstabilityReport:
    """
    Evolve u0 = (1 + a) Phi_omega and watch it against the orbit.

    The run stops at the first escape (orbit distance above escape_factor times
    max(d0, ESCAPE_FLOOR)), modulation fit failure or blow-up; that time is t*. Off the
    critical frequency the analytic virial term is reported as NaN.
    """
    params = SolitonParams.critical(p) if omega is None else SolitonParams(p, omega)
    omega = params.omega
    if not 0.0 <= a <= config.MAX_PERTURBATION:
        raise ConfigurationError(f"perturbation a must lie in [0, {config.MAX_PERTURBATION}], got {a}")

    needed = suggested_length(p, omega)
    if length < needed:
        if config.VERBOSE:
            print(f"📏 L={length:g} is short for omega={omega:.6g}; using L={needed:g}")
        length = needed
    grid = resolve_grid(p, omega, Grid(length, n))
    wave = build_family(p, omega, grid)
    cutoff = build_cutoff(R, grid)
    critical = params.is_critical(1e-9)

    u0 = wave.perturbed(a)
    initial = conserved(u0, p)
    d0 = locate_on_orbit(u0, wave).distance
    threshold = escape_factor * max(d0, config.ESCAPE_FLOOR)

    tracker = ModulationTrack(p, omega)
    records: List[VirialRecord] = []
    state = {"t_star": None, "reason": None, "y": 0.0, "ydot": 0.0}

    def monitor(s: PhaseState, triple: ConservedTriple) -> bool:
        distance = locate_on_orbit(s, wave).distance
        result = tracker.update(s, capture_radius)
        if result is not None:
            y = tracker.y[-1]
            if len(tracker.times) >= 2:
                state["ydot"] = (tracker.y[-1] - tracker.y[-2]) / (tracker.times[-1] - tracker.times[-2])
            state["y"] = y
        y = state["y"]

        if critical:
            terms = I_dot_analytic(s, cutoff, y, state["ydot"], p, omega, initial)
            main, tail = terms.main, terms.tail_bound
        else:
            main, tail = float("nan"), tail_mass(s, cutoff, y, p)

        records.append(
            VirialRecord(
                t=s.t,
                I=I_of_t(s, cutoff, y, p),
                I_dot_analytic=main,
                I_dot_numeric=float("nan"),
                tail=tail,
                kinetic_term=kinetic_defect(s, omega),
                distance=distance,
                y=y,
                lam=result.lam if result is not None else float("nan"),
                xi_h1l2=result.xi_h1l2 if result is not None else float("nan"),
                control_lambda_defect=control_lambda_defect(s, result, wave) if result is not None else float("nan"),
                remainder_ratio=remainder_ratio(result, a) if result is not None else float("nan"),
                Q=triple.Q,
                P=triple.P,
                E=triple.E,
            )
        )
        if distance > threshold:
            state["t_star"], state["reason"] = s.t, "escape"
            return False
        if result is None:
            state["t_star"], state["reason"] = s.t, "fit_failure"
            return False
        return True

    run_cfg = EvolverConfig(
        dt=cfg.dt,
        t_end=cfg.t_end,
        blowup_threshold=cfg.blowup_threshold,
        record_every=cfg.record_every,
        store_fields=False,
    )
    traj = evolve(u0, run_cfg, p, monitor=monitor)
    if traj.status == BLOWN_UP and state["t_star"] is None:
        state["t_star"], state["reason"] = traj.blowup_time, "blow_up"

    t = np.array([r.t for r in records])
    I = np.array([r.I for r in records])
    if len(records) >= 2:
        I_dot = np.gradient(I, t)
        for record, value in zip(records, I_dot):
            record.I_dot_numeric = float(value)
    else:
        I_dot = np.zeros(len(records))

    predicted = mainpart_prediction(wave, a) if critical else float("nan")
    t_star = state["t_star"]
    horizon = t_star if t_star is not None else (t[-1] if t.size else 0.0)
    window_hi = min(5.0, 0.5 * horizon) if t_star is not None else min(5.0, horizon)
    # the tracked window ends one sample before t* so the escape sample is excluded
    tracked = I_dot[:-1] if (t_star is not None and I_dot.size > 1) else I_dot

    xi = np.array([r.xi_h1l2 for r in records])
    lam_gap = np.abs(np.array([r.lam for r in records]) - 1.0)
    analytic = np.array([r.I_dot_analytic for r in records])
    budget = np.array([r.tail for r in records]) + xi ** 2 + cfg.dt ** 2
    control = np.array([r.control_lambda_defect for r in records])
    control_scale = lam_gap ** 3 + a * lam_gap + xi ** 3
    finite = np.isfinite(analytic) & np.isfinite(budget)
    ratios = tracker.modulation_ratio()

    report = InstabilityReport(
        status=INSTABILITY_OBSERVED if t_star is not None else STAYED_NEAR_ORBIT,
        p=p,
        omega=omega,
        a=a,
        R=R,
        length=grid.length,
        n=grid.n,
        t_star=t_star,
        exit_reason=state["reason"],
        initial_distance=d0,
        escape_threshold=threshold,
        max_distance=float(max((r.distance for r in records), default=float("nan"))),
        min_slope=float(np.min(tracked)) if tracked.size else float("nan"),
        window=(0.0, float(window_hi)),
        window_slope=_window_slope(t, I, window_hi),
        window_max_deviation=_window_deviation(t, I_dot, window_hi, predicted),
        predicted_slope=predicted,
        error_budget_constant=_max_ratio((I_dot - analytic)[finite], budget[finite]) if critical else float("nan"),
        control_lambda_constant=_max_ratio(control[np.isfinite(control)], control_scale[np.isfinite(control)]),
        modulation_ratio_median=float(np.nanmedian(ratios)) if np.any(np.isfinite(ratios)) else float("nan"),
        drift=conservation_drift(traj),
        records=records,
        track_rows=tracker.rows(),
    )
    if config.VERBOSE:
        when = f"t*={t_star:.6g} ({state['reason']})" if t_star is not None else f"t_end={cfg.t_end:g}"
        print(f"📊 {report.status}: p={p:g}, omega={omega:.7g}, a={a:g}, {when}")
    return report
