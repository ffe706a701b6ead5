"""
Exception hierarchy for kgsim.
"""

from typing import Any, Dict, Optional


class KGSimError(Exception):
    """Base class for all kgsim errors."""


class ConfigurationError(KGSimError, ValueError):
    """A parameter or grid violates a precondition."""


class NonFiniteFieldError(KGSimError, ValueError):
    """A field contains NaN or Inf samples."""


class GridMismatchError(KGSimError, ValueError):
    """Two fields or an operator and a field live on different grids."""


class DenseCapError(KGSimError, MemoryError):
    """Dense assembly would exceed the configured row cap."""


class RankDeficientError(KGSimError, ValueError):
    """A constraint family is linearly dependent."""


class EigenSolverError(KGSimError, RuntimeError):
    """The symmetric eigensolver did not return a valid decomposition."""


class BlowUpError(KGSimError, RuntimeError):
    """The solution left the finite range."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class ModulationError(KGSimError, RuntimeError):
    """The modulation Newton solve did not converge."""

    def __init__(
        self,
        message: str,
        best: Optional[Dict[str, float]] = None,
        residuals: Optional[Any] = None,
    ):
        super().__init__(message)
        self.best = best or {}
        self.residuals = residuals
