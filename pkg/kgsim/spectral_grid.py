"""
Periodic grid and Fourier spectral calculus.

Every other module samples its fields on a `Grid` and differentiates,
integrates and shifts them with the functions below.
"""

from dataclasses import dataclass, replace
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy import fft

from .errors import ConfigurationError, GridMismatchError, NonFiniteFieldError

IMAG_RESIDUE_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L/2, L/2)."""

    length: float
    n: int

    def __post_init__(self):
        if not self.length > 0:
            raise ConfigurationError(f"grid length must be positive, got {self.length}")
        if self.n < 16 or self.n & (self.n - 1):
            raise ConfigurationError(f"node count must be a power of two >= 16, got {self.n}")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return -0.5 * self.length + self.dx * np.arange(self.n)

    @cached_property
    def k(self) -> np.ndarray:
        """Wavenumbers 2*pi*j/L in FFT ordering."""
        return 2.0 * np.pi * fft.fftfreq(self.n, d=self.dx)

    @cached_property
    def k_odd(self) -> np.ndarray:
        """Wavenumbers for odd-order derivatives, Nyquist mode removed."""
        k = self.k.copy()
        k[self.n // 2] = 0.0
        return k

    def refined(self) -> "Grid":
        """Same domain, twice the nodes."""
        return replace(self, n=2 * self.n)

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Map coordinates into [-L/2, L/2)."""
        return (x + 0.5 * self.length) % self.length - 0.5 * self.length


class Norms(NamedTuple):
    l2sq: float
    h1sq: float
    lp1: float


def check_finite(f: np.ndarray, name: str = "field") -> None:
    if not np.all(np.isfinite(f)):
        raise NonFiniteFieldError(f"{name} contains non-finite samples")


def check_on_grid(grid: Grid, f: np.ndarray, name: str = "field") -> None:
    if np.shape(f) != (grid.n,):
        raise GridMismatchError(f"{name} has shape {np.shape(f)}, grid has {grid.n} nodes")


def as_real(value: complex, scale: float = 1.0) -> float:
    """Real part of a quantity that should be real; rejects a visible imaginary residue."""
    value = complex(value)
    if abs(value.imag) > IMAG_RESIDUE_TOL * max(1.0, abs(scale), abs(value.real)):
        raise NonFiniteFieldError(f"imaginary residue {value.imag:.3e} in a real quantity")
    return value.real


def ddx(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Spectral first derivative."""
    check_on_grid(grid, f)
    check_finite(f)
    return fft.ifft(1j * grid.k_odd * fft.fft(f))


def d2x(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Spectral second derivative (multiplier -k^2)."""
    check_on_grid(grid, f)
    check_finite(f)
    out = fft.ifft(-(grid.k ** 2) * fft.fft(f))
    if np.isrealobj(f):
        return out.real
    return out


def quad(grid: Grid, f: np.ndarray):
    """Periodic trapezoid rule dx * sum(f)."""
    check_finite(f)
    return grid.dx * np.sum(f)


def inner(grid: Grid, f: np.ndarray, g: np.ndarray) -> float:
    """Real pairing Re int f conj(g)."""
    return float(np.real(quad(grid, f * np.conj(g))))


def norms(grid: Grid, f: np.ndarray, p: float) -> Norms:
    """(||f||_2^2, ||f||_{H1}^2, ||f||_{p+1}^{p+1})."""
    if p <= 1:
        raise ConfigurationError(f"exponent p must exceed 1, got {p}")
    check_on_grid(grid, f)
    fx = ddx(grid, f)
    l2sq = as_real(quad(grid, f * np.conj(f)))
    h1sq = l2sq + as_real(quad(grid, fx * np.conj(fx)), l2sq)
    lp1 = float(quad(grid, np.abs(f) ** (p + 1)))
    return Norms(l2sq, h1sq, lp1)


def shift(grid: Grid, f: np.ndarray, y: float) -> np.ndarray:
    """Fourier translation f(x - y)."""
    check_on_grid(grid, f)
    return fft.ifft(fft.fft(f) * np.exp(-1j * grid.k * y))


def spectral_tail_ratio(f: np.ndarray) -> float:
    """Largest Fourier amplitude in the top eighth of |k| relative to the peak."""
    amp = np.abs(fft.fftshift(fft.fft(f)))
    peak = amp.max()
    if peak == 0.0:
        return 0.0
    n = amp.size
    band = n // 16
    tail = np.concatenate([amp[:band], amp[n - band:]])
    return float(tail.max() / peak)


@dataclass(frozen=True)
class PhaseState:
    """Pair (u, v) with v = u_t, sampled on one grid at time t."""

    grid: Grid
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        check_on_grid(self.grid, self.u, "u")
        check_on_grid(self.grid, self.v, "v")
        object.__setattr__(self, "u", np.asarray(self.u, dtype=complex))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=complex))

    @classmethod
    def zeros(cls, grid: Grid) -> "PhaseState":
        return cls(grid, np.zeros(grid.n, complex), np.zeros(grid.n, complex))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))

    def _same_grid(self, other: "PhaseState") -> None:
        if other.grid != self.grid:
            raise GridMismatchError("pair fields live on different grids")

    def __add__(self, other: "PhaseState") -> "PhaseState":
        self._same_grid(other)
        return PhaseState(self.grid, self.u + other.u, self.v + other.v, self.t)

    def __sub__(self, other: "PhaseState") -> "PhaseState":
        self._same_grid(other)
        return PhaseState(self.grid, self.u - other.u, self.v - other.v, self.t)

    def scaled(self, c: complex) -> "PhaseState":
        return PhaseState(self.grid, c * self.u, c * self.v, self.t)

    def rotated(self, theta: float) -> "PhaseState":
        return self.scaled(np.exp(1j * theta))

    def shifted(self, y: float) -> "PhaseState":
        """Translate both components to (. - y)."""
        return PhaseState(self.grid, shift(self.grid, self.u, y), shift(self.grid, self.v, y), self.t)

    def rolled(self, cells: int) -> "PhaseState":
        return PhaseState(self.grid, np.roll(self.u, cells), np.roll(self.v, cells), self.t)

    def at_time(self, t: float) -> "PhaseState":
        return PhaseState(self.grid, self.u, self.v, t)

    def dx(self) -> "PhaseState":
        return PhaseState(self.grid, ddx(self.grid, self.u), ddx(self.grid, self.v), self.t)

    def pairing(self, other: "PhaseState") -> float:
        """Real pairing Re int (u1 conj(u2) + v1 conj(v2))."""
        self._same_grid(other)
        return inner(self.grid, self.u, other.u) + inner(self.grid, self.v, other.v)

    def l2l2_norm(self) -> float:
        return float(np.sqrt(self.pairing(self)))

    def h1l2_norm(self) -> float:
        ux = ddx(self.grid, self.u)
        sq = self.pairing(self) + inner(self.grid, ux, ux)
        return float(np.sqrt(max(sq, 0.0)))
