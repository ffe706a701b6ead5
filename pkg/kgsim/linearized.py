"""
The Hessian of the action at the standing wave, as a grid operator.

On a pair (f, g):

    H(f, g) = (-f'' + f - p V Re f - i V Im f + i omega g,  g - i omega f),   V = phi^{p-1}.

H is real-linear but not complex-linear, so dense work happens in the real
embedding z = sqrt(dx) (Re f, Im f, Re g, Im g), where the pairing
<x, y> = Re int (f1 conj(f2) + g1 conj(g2)) becomes the Euclidean dot product.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy import fft, linalg

from .config import config
from .errors import DenseCapError, EigenSolverError, GridMismatchError, RankDeficientError
from .ground_state import StandingWave
from .spectral_grid import PhaseState, d2x

ASYMMETRY_TOL = 1e-10
RANK_TOL = 1e-10


@dataclass(frozen=True)
class HessianOperator:
    wave: StandingWave

    @property
    def grid(self):
        return self.wave.grid

    @property
    def p(self) -> float:
        return self.wave.p

    @property
    def omega(self) -> float:
        return self.wave.omega

    @cached_property
    def potential(self) -> np.ndarray:
        return self.wave.phi ** (self.p - 1.0)

    @property
    def norm_estimate(self) -> float:
        """Symbol bound max k^2 + 1 + |omega| + p ||V||_inf."""
        return float(
            np.max(self.grid.k ** 2) + 1.0 + abs(self.omega) + self.p * np.max(np.abs(self.potential))
        )

    def __call__(self, x: PhaseState) -> PhaseState:
        return apply(self, x)


class SpectrumReport(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: List[PhaseState]
    n_negative: int
    n_near_zero: int
    threshold_zero: float


class BootstrapBound(NamedTuple):
    """||xi||^2_{H1xL2} <= <H xi, xi> + c_boot ||xi||^2_{L2xL2}; <H xi, xi> >= kappa ||xi||^2_{H1xL2}."""

    c_boot: float
    kappa: float


def apply(H: HessianOperator, x: PhaseState) -> PhaseState:
    if x.grid != H.grid:
        raise GridMismatchError("pair field and operator live on different grids")
    f, g = x.u, x.v
    V, p, omega = H.potential, H.p, H.omega
    first = -d2x(H.grid, f) + f - p * V * f.real - 1j * V * f.imag + 1j * omega * g
    second = g - 1j * omega * f
    return PhaseState(H.grid, first, second, x.t)


def quadratic_form(H: HessianOperator, x: PhaseState) -> float:
    return apply(H, x).pairing(x)


def embed(x: PhaseState) -> np.ndarray:
    return np.sqrt(x.grid.dx) * np.concatenate([x.u.real, x.u.imag, x.v.real, x.v.imag])


def unembed(grid, z: np.ndarray) -> PhaseState:
    n = grid.n
    if z.shape != (4 * n,):
        raise GridMismatchError(f"embedded vector has shape {z.shape}, expected ({4 * n},)")
    z = z / np.sqrt(grid.dx)
    return PhaseState(grid, z[:n] + 1j * z[n:2 * n], z[2 * n:3 * n] + 1j * z[3 * n:])


def second_derivative_matrix(grid) -> np.ndarray:
    """Dense spectral d^2/dx^2 (circulant, symmetric)."""
    column = np.zeros(grid.n)
    column[0] = 1.0
    kernel = fft.ifft(-(grid.k ** 2) * fft.fft(column)).real
    idx = (np.arange(grid.n)[:, None] - np.arange(grid.n)[None, :]) % grid.n
    return kernel[idx]


def _check_dense_cap(rows: int, cap: int) -> None:
    if rows > cap:
        raise DenseCapError(f"dense assembly needs {rows} rows, cap is {cap}; lower n or raise KGSIM_DENSE_CAP")


def assemble_dense(H: HessianOperator, dense_cap: Optional[int] = None) -> np.ndarray:
    """Real symmetric 4n x 4n matrix M with <H x, y> = embed(y) . M embed(x)."""
    cap = config.DENSE_CAP if dense_cap is None else dense_cap
    n = H.grid.n
    _check_dense_cap(4 * n, cap)

    eye = np.eye(n)
    lap = -second_derivative_matrix(H.grid) + eye
    l_plus = lap - np.diag(H.p * H.potential)
    l_minus = lap - np.diag(H.potential)
    w = H.omega * eye
    zero = np.zeros((n, n))

    M = np.block(
        [
            [l_plus, zero, zero, -w],
            [zero, l_minus, w, zero],
            [zero, w, eye, zero],
            [-w, zero, zero, eye],
        ]
    )
    asymmetry = np.max(np.abs(M - M.T)) / max(np.max(np.abs(M)), 1.0)
    if asymmetry > ASYMMETRY_TOL:
        raise EigenSolverError(f"assembled Hessian asymmetric to {asymmetry:.2e}")
    return 0.5 * (M + M.T)


def _lowest(M: np.ndarray, k: int):
    k = min(k, M.shape[0])
    try:
        return linalg.eigh(M, subset_by_index=[0, k - 1])
    except (linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(f"eigensolver failed: {exc}") from exc


def spectrum(H: HessianOperator, k: int = 6, dense_cap: Optional[int] = None) -> SpectrumReport:
    """Lowest k eigenpairs of H, with negative and near-zero counts."""
    M = assemble_dense(H, dense_cap)
    values, vectors = _lowest(M, k)
    threshold = 1e-6 * H.norm_estimate
    eigenvectors = [unembed(H.grid, vectors[:, j]) for j in range(vectors.shape[1])]
    return SpectrumReport(
        eigenvalues=values,
        eigenvectors=eigenvectors,
        n_negative=int(np.sum(values < -threshold)),
        n_near_zero=int(np.sum(np.abs(values) < threshold)),
        threshold_zero=threshold,
    )


def scalar_spectrum(H: HessianOperator, which: str = "plus", k: int = 3) -> np.ndarray:
    """
    Lowest eigenvalues of L_+ = -d_xx + (1 - w^2) - p phi^{p-1}
    or L_- = -d_xx + (1 - w^2) - phi^{p-1}.
    """
    if which not in ("plus", "minus"):
        raise ValueError(f"which must be 'plus' or 'minus', got {which!r}")
    _check_dense_cap(H.grid.n, config.DENSE_CAP)
    weight = H.p if which == "plus" else 1.0
    L = -second_derivative_matrix(H.grid) + np.diag(H.wave.params.m2 - weight * H.potential)
    values, _ = _lowest(0.5 * (L + L.T), k)
    return values


def poschl_teller_ground(p: float, omega: float) -> float:
    """Ground eigenvalue -(p+3)(p-1)(1-w^2)/4 of L_+."""
    return -(p + 3.0) * (p - 1.0) * (1.0 - omega ** 2) / 4.0


def pair_negative_eigenvalue(lam: float, omega: float) -> float:
    """Negative root of mu^2 - (1 + w^2 + lam) mu + lam = 0."""
    b = 1.0 + omega ** 2 + lam
    return 0.5 * (b - np.sqrt(b * b - 4.0 * lam))


def eigenvalue_relation_residual(mu: float, lam: float, omega: float) -> float:
    """|mu (w^2 / (1 - mu) + 1) - lam|."""
    return abs(mu * (omega ** 2 / (1.0 - mu) + 1.0) - lam)


def coercivity_margin(
    H: HessianOperator,
    constraints: Sequence[PhaseState] = (),
    dense_cap: Optional[int] = None,
) -> float:
    """Minimum of <H x, x> / ||x||^2_{L2xL2} over x orthogonal to every constraint."""
    M = assemble_dense(H, dense_cap)
    if not constraints:
        values, _ = _lowest(M, 1)
        return float(values[0])

    C = np.column_stack([embed(c) for c in constraints])
    singular = linalg.svdvals(C)
    if singular.min() <= RANK_TOL * singular.max():
        raise RankDeficientError(f"constraint set is rank deficient (singular values {singular})")
    basis = linalg.null_space(C.T)
    projected = basis.T @ M @ basis
    values, _ = _lowest(0.5 * (projected + projected.T), 1)
    return float(values[0])


def standard_constraints(wave: StandingWave) -> List[PhaseState]:
    """i Phi, d_x Phi and Psi."""
    return [wave.iPhi, wave.dxPhi, wave.Psi]


def h1_bootstrap(H: HessianOperator, margin: float) -> BootstrapBound:
    c_boot = float(H.p * np.max(np.abs(H.potential)) + abs(H.omega))
    kappa = margin / (margin + c_boot) if margin > 0 else float("nan")
    return BootstrapBound(c_boot, kappa)


def bootstrap_slack(H: HessianOperator, bound: BootstrapBound, x: PhaseState) -> float:
    """<H x, x> + c_boot ||x||^2_{L2xL2} - ||x||^2_{H1xL2}; nonnegative for every x."""
    return quadratic_form(H, x) + bound.c_boot * x.pairing(x) - x.h1l2_norm() ** 2


def kernel_angle(report: SpectrumReport, wave: StandingWave) -> float:
    """Largest principal angle between the near-zero eigenvectors and span{i Phi, d_x Phi}."""
    zero = [v for v, mu in zip(report.eigenvectors, report.eigenvalues) if abs(mu) < report.threshold_zero]
    if not zero:
        return float("nan")
    A = np.column_stack([embed(v) for v in zero])
    B = np.column_stack([embed(wave.iPhi), embed(wave.dxPhi)])
    return float(np.max(linalg.subspace_angles(A, B)))
