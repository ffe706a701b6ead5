"""
Configuration management for kgsim.
"""

import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class Config:
    """Configuration class for kgsim."""

    # Output
    OUT_DIR: str = os.getenv("KGSIM_OUT_DIR", "./kgsim_runs")
    REGISTRY_NAME: str = "kgsim_runs.db"
    VERBOSE: bool = os.getenv("KGSIM_VERBOSE", "True").lower() == "true"

    # Execution
    PARALLELISM: int = int(os.getenv("KGSIM_PARALLELISM", "1"))
    DENSE_CAP: int = int(os.getenv("KGSIM_DENSE_CAP", "16384"))

    # Grid
    DEFAULT_LENGTH: float = 80.0
    DEFAULT_NODES: int = 1024
    MAX_NODES: int = 16384
    SPECTRAL_TAIL_TOL: float = 1e-10
    BOUNDARY_TOL: float = 1e-10
    RESIDUAL_TOL: float = 1e-9

    # Time integration
    DEFAULT_DT: float = 5e-3
    DEFAULT_T_END: float = 200.0
    RECORD_EVERY: int = 20
    BLOWUP_THRESHOLD: float = 1e6

    # Modulation and virial
    CAPTURE_RADIUS: float = 0.3
    NEWTON_MAX_ITER: int = 50
    NEWTON_TOL: float = 1e-10
    FD_STEP: float = 1e-6
    DEFAULT_R: float = 20.0
    ESCAPE_FACTOR: float = 10.0
    ESCAPE_FLOOR: float = 1e-2
    MAX_PERTURBATION: float = 0.05

    # Output formatting
    FLOAT_FORMAT: str = ".17g"

    # Subcommands
    COMMANDS = ["groundstate", "spectrum", "evolve", "instability", "sweep", "runs"]

    # Exit codes
    EXIT_CODES = {
        "ok": 0,
        "validation": 2,
        "blowup": 3,
        "internal": 4,
    }


config = Config()
