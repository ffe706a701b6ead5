"""
Run configuration, manifests and the parameter sweep.
"""

import asyncio
import hashlib
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime
from typing import Any, Dict, List, Literal, Optional, Sequence, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, field_validator

from . import __version__
from .config import config
from .errors import ConfigurationError
from .evolver import EvolverConfig
from .ground_state import critical_frequency, suggested_length
from .virial import instability_experiment

SWEEP_COLUMNS = ["p", "omega_ratio", "omega", "a", "status", "t_star", "exit_reason", "min_slope", "window_slope", "error"]

# config-file spellings accepted besides the field names
_ALIASES = {"l": "L", "t-end": "t_end", "record-every": "record_every", "out-dir": "out_dir", "r": "R"}


class RunConfig(BaseModel):
    """Everything a run depends on; serialised verbatim into its manifest."""

    model_config = ConfigDict(extra="forbid")

    p: float = 3.0
    omega: Union[Literal["critical"], float] = "critical"
    a: float = 0.01
    L: float = config.DEFAULT_LENGTH
    n: int = config.DEFAULT_NODES
    dt: float = config.DEFAULT_DT
    t_end: float = config.DEFAULT_T_END
    R: float = config.DEFAULT_R
    record_every: int = config.RECORD_EVERY
    k: int = 6
    out_dir: Optional[str] = Field(default=None, exclude=True)

    @field_validator("p")
    @classmethod
    def _p_range(cls, v: float) -> float:
        if not 1.0 < v < 5.0:
            raise ValueError("p must lie in (1, 5)")
        return v

    @field_validator("omega")
    @classmethod
    def _omega_range(cls, v):
        if v != "critical" and not abs(v) < 1.0:
            raise ValueError("omega must satisfy |omega| < 1 or be 'critical'")
        return v

    @field_validator("n")
    @classmethod
    def _power_of_two(cls, v: int) -> int:
        if v < 16 or v & (v - 1):
            raise ValueError("n must be a power of two >= 16")
        return v

    @field_validator("L", "dt", "R")
    @classmethod
    def _positive(cls, v: float) -> float:
        if not v > 0 or not math.isfinite(v):
            raise ValueError("must be positive and finite")
        return v

    @field_validator("t_end")
    @classmethod
    def _nonnegative(cls, v: float) -> float:
        if not v >= 0:
            raise ValueError("must be nonnegative")
        return v

    @field_validator("a")
    @classmethod
    def _perturbation(cls, v: float) -> float:
        if not 0.0 <= v <= config.MAX_PERTURBATION:
            raise ValueError(f"a must lie in [0, {config.MAX_PERTURBATION}]")
        return v

    @field_validator("record_every", "k")
    @classmethod
    def _at_least_one(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @property
    def omega_value(self) -> float:
        if self.omega == "critical":
            return critical_frequency(self.p)
        return float(self.omega)

    @property
    def omega_ratio(self) -> float:
        return self.omega_value / critical_frequency(self.p)

    def evolver_config(self) -> EvolverConfig:
        return EvolverConfig(dt=self.dt, t_end=self.t_end, record_every=self.record_every)

    def config_hash(self) -> str:
        """SHA-1 of the canonical JSON of every field that affects results."""
        canonical = json.dumps(self.model_dump(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha1(canonical.encode()).hexdigest()

    def check_for(self, command: str, dense_cap: Optional[int] = None) -> None:
        """Command-specific preconditions, raised before any compute."""
        if command in ("instability", "sweep"):
            length = max(self.L, suggested_length(self.p, self.omega_value))
            if not 2.0 * self.R < 0.5 * length:
                raise ConfigurationError(f"2R={2 * self.R:g} must be below L/2={0.5 * length:g}")
        cap = config.DENSE_CAP if dense_cap is None else dense_cap
        if command == "spectrum" and 4 * self.n > cap:
            raise ConfigurationError(f"4n={4 * self.n} exceeds the dense cap {cap}")


class RunManifest(BaseModel):
    command: str
    config: RunConfig
    config_hash: str
    version: str = __version__
    started_at: str
    finished_at: Optional[str] = None
    status: str = "running"
    outputs: Dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def start(cls, command: str, cfg: RunConfig) -> "RunManifest":
        return cls(command=command, config=cfg, config_hash=cfg.config_hash(), started_at=_now())

    def finish(self, status: str, **outputs) -> "RunManifest":
        self.status = status
        self.finished_at = _now()
        self.outputs.update(_jsonable(outputs))
        return self


def _now() -> str:
    return datetime.now().isoformat(timespec="seconds")


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        value = value.tolist()
        if isinstance(value, list):
            return _jsonable(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def load_config_file(path: str) -> Dict[str, str]:
    """key=value config file; blank values are dropped."""
    values = dotenv_values(path)
    out = {}
    for key, value in values.items():
        if value is None or value == "":
            continue
        key = key.strip()
        out[_ALIASES.get(key.lower(), key)] = value.strip()
    return out


def build_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """File values first, then flag overrides (None means 'not given')."""
    merged: Dict[str, Any] = {}
    if path:
        merged.update(load_config_file(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    sweep_keys = {"p_values", "ratios", "a_values", "parallelism"}
    return RunConfig(**{k: v for k, v in merged.items() if k not in sweep_keys})


def parse_values(text: Optional[str]) -> List[float]:
    if text is None or str(text).strip() == "":
        return []
    return [float(item) for item in str(text).split(",") if item.strip()]


def sweep_grid(
    base: RunConfig,
    p_values: Sequence[float],
    ratios: Sequence[float],
    a_values: Sequence[float],
) -> List[RunConfig]:
    """Cartesian product in (p, ratio, a) order; omega = ratio * omega_c(p)."""
    configs = []
    for p, ratio, a in itertools.product(p_values, ratios, a_values):
        omega = ratio * critical_frequency(p)
        fields = base.model_dump()
        fields.update(p=p, a=a, omega="critical" if ratio == 1.0 else omega)
        configs.append(RunConfig(**fields))
    return configs


def run_sweep_job(fields: Dict[str, Any]) -> Dict[str, Any]:
    """One sweep row; failures are recorded in the row instead of raised."""
    row: Dict[str, Any] = {"p": fields.get("p"), "a": fields.get("a")}
    try:
        cfg = RunConfig(**fields)
        row.update(omega=cfg.omega_value, omega_ratio=cfg.omega_ratio)
        cfg.check_for("sweep")
        report = instability_experiment(
            cfg.p,
            cfg.a,
            cfg.evolver_config(),
            R=cfg.R,
            omega=cfg.omega_value,
            length=cfg.L,
            n=cfg.n,
        )
        row.update(
            status=report.status,
            t_star=report.t_star,
            exit_reason=report.exit_reason,
            min_slope=report.min_slope,
            window_slope=report.window_slope,
        )
    except Exception as e:
        row.update(status="ERROR", error=f"{type(e).__name__}: {e}")
    return row


async def run_sweep(configs: Sequence[RunConfig], parallelism: int = 1) -> List[Dict[str, Any]]:
    """Run every config, at most `parallelism` at a time; rows come back in config order."""
    if not configs:
        return []
    parallelism = max(1, int(parallelism))
    loop = asyncio.get_running_loop()
    semaphore = asyncio.Semaphore(parallelism)

    with ProcessPoolExecutor(max_workers=parallelism) as pool:

        async def run_one(cfg: RunConfig) -> Dict[str, Any]:
            async with semaphore:
                return await loop.run_in_executor(pool, run_sweep_job, cfg.model_dump())

        return list(await asyncio.gather(*(run_one(c) for c in configs)))
