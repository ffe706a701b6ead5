"""
Strang-split time integration of u_tt - u_xx + u = |u|^{p-1} u on the periodic grid.

One step is a half kick of v by the nonlinearity, the exact linear Klein-Gordon
flow in Fourier space (angular frequency sqrt(k^2 + 1) per mode), and a second
half kick.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy import fft

from .config import config
from .errors import BlowUpError, ConfigurationError
from .functionals import ConservedTriple, conserved
from .spectral_grid import Grid, PhaseState, check_finite

COMPLETED = "completed"
BLOWN_UP = "blown_up"
REJECTED = "rejected"
STOPPED = "stopped"

# Called on each recorded sample; returning False stops the run.
Monitor = Callable[[PhaseState, ConservedTriple], Optional[bool]]


@dataclass(frozen=True)
class EvolverConfig:
    dt: float = config.DEFAULT_DT
    t_end: float = 50.0
    scheme: str = "strang_split"
    blowup_threshold: float = config.BLOWUP_THRESHOLD
    record_every: int = config.RECORD_EVERY
    store_fields: bool = True

    def __post_init__(self):
        if self.dt == 0 or not np.isfinite(self.dt):
            raise ConfigurationError(f"time step must be finite and nonzero, got {self.dt}")
        if not self.t_end >= 0:
            raise ConfigurationError(f"t_end must be nonnegative, got {self.t_end}")
        if self.scheme != "strang_split":
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if self.record_every < 1:
            raise ConfigurationError(f"record_every must be >= 1, got {self.record_every}")
        if not self.blowup_threshold > 0:
            raise ConfigurationError(f"blow-up threshold must be positive, got {self.blowup_threshold}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / abs(self.dt)))


@dataclass
class Trajectory:
    """Recorded samples of one run with their conserved values."""

    times: List[float] = field(default_factory=list)
    samples: List[PhaseState] = field(default_factory=list)
    triples: List[ConservedTriple] = field(default_factory=list)
    status: str = COMPLETED
    blowup_time: Optional[float] = None
    final: Optional[PhaseState] = None

    def record(self, s: PhaseState, triple: ConservedTriple, store: bool) -> None:
        self.times.append(s.t)
        self.triples.append(triple)
        if store:
            self.samples.append(s)
        self.final = s

    @property
    def blown_up(self) -> bool:
        return self.status == BLOWN_UP

    def conserved_array(self) -> np.ndarray:
        """Columns Q, P, E."""
        return np.array([tuple(c) for c in self.triples], dtype=float).reshape(-1, 3)


def _nonlinearity(u: np.ndarray, p: float) -> np.ndarray:
    # |u|^{p-1} u with the product taken as 0 where u = 0
    return np.abs(u) ** (p - 1.0) * u


class _LinearFlow:
    """Exact per-mode rotation of (u_hat, v_hat) over one dt."""

    def __init__(self, grid: Grid, dt: float):
        omega = np.sqrt(grid.k ** 2 + 1.0)
        self.cos = np.cos(omega * dt)
        self.sin_over = np.sin(omega * dt) / omega
        self.minus_omega_sin = -omega * np.sin(omega * dt)

    def __call__(self, u: np.ndarray, v: np.ndarray):
        uh = fft.fft(u)
        vh = fft.fft(v)
        uh, vh = self.cos * uh + self.sin_over * vh, self.minus_omega_sin * uh + self.cos * vh
        return fft.ifft(uh), fft.ifft(vh)


def _strang(u, v, dt, p, coefficient, flow):
    half = 0.5 * dt * coefficient
    v = v + half * _nonlinearity(u, p)
    u, v = flow(u, v)
    v = v + half * _nonlinearity(u, p)
    return u, v


def step(s: PhaseState, dt: float, p: float, coefficient: float = 1.0) -> PhaseState:
    """One Strang step; coefficient scales the nonlinearity (0 gives the linear flow)."""
    check_finite(s.u, "u")
    check_finite(s.v, "v")
    u, v = _strang(s.u, s.v, dt, p, coefficient, _LinearFlow(s.grid, dt))
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise BlowUpError(f"non-finite field after step from t={s.t:g}", time=s.t)
    return PhaseState(s.grid, u, v, s.t + dt)


def evolve(
    s0: PhaseState,
    cfg: EvolverConfig,
    p: float,
    monitor: Optional[Monitor] = None,
    coefficient: float = 1.0,
) -> Trajectory:
    """
    Iterate step() from s0 for cfg.t_end, recording every cfg.record_every steps.

    Blow-up (non-finite samples or ||u||_inf above the threshold) ends the run with
    status 'blown_up' and keeps every earlier sample.
    """
    traj = Trajectory()
    if not s0.is_finite():
        traj.status = REJECTED
        return traj

    grid = s0.grid
    flow = _LinearFlow(grid, cfg.dt)
    u, v = s0.u, s0.v
    t0 = s0.t

    def sample(t):
        s = PhaseState(grid, u, v, t)
        triple = conserved(s, p)
        traj.record(s, triple, cfg.store_fields)
        if monitor is not None and monitor(s, triple) is False:
            return False
        return True

    if not sample(t0):
        traj.status = STOPPED
        return traj

    t_last = t0
    for j in range(1, cfg.n_steps + 1):
        u, v = _strang(u, v, cfg.dt, p, coefficient, flow)
        t = t0 + j * cfg.dt
        finite = np.all(np.isfinite(u)) and np.all(np.isfinite(v))
        if not finite or np.max(np.abs(u)) > cfg.blowup_threshold:
            traj.status = BLOWN_UP
            traj.blowup_time = t_last if not finite else t
            if config.VERBOSE:
                print(f"💥 Blow-up detected at t={traj.blowup_time:.6g}")
            return traj
        t_last = t
        if j % cfg.record_every == 0 or j == cfg.n_steps:
            if not sample(t):
                traj.status = STOPPED
                return traj
    return traj


def conservation_drift(traj: Trajectory) -> Dict[str, float]:
    """
    Maximum relative drift of Q, P and E over the recorded samples.

    P is measured against max(|P0|, |Q0|, |E0|) since it starts at zero for
    every standing-wave datum; Q and E fall back to that scale when they vanish.
    """
    values = traj.conserved_array()
    if values.shape[0] == 0:
        return {"Q": 0.0, "P": 0.0, "E": 0.0}
    start = values[0]
    reference = max(float(np.max(np.abs(start))), np.finfo(float).tiny)
    drift = np.max(np.abs(values - start), axis=0)
    scales = [
        abs(start[0]) if abs(start[0]) > 1e-12 * reference else reference,
        reference,
        abs(start[2]) if abs(start[2]) > 1e-12 * reference else reference,
    ]
    return {name: float(d / s) for name, d, s in zip(("Q", "P", "E"), drift, scales)}
