"""
Pydantic models for experiment configuration and run manifests.

Configuration is read from a TOML file, then overridden by ``--set
section.key=value`` pairs and dedicated CLI flags.
"""

import os
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src import __version__
from src.acquisition.sketches import SketchDistribution
from src.errors import ConfigurationError
from src.geometry.layout import (
    HOUR_ANGLE_RATE,
    ArrayLayout,
    make_random_layout,
    make_vla_like,
    load_layout_csv,
)
from src.operators.fourier import DEFAULT_UV_FILL, KaiserBesselKernel
from src.sky.model import DEFAULT_PIXEL_SCALE
from src.solver.bpdn import SolverConfig

THREADS_ENV = "CRI_ROP_THREADS"
MAX_SEED = 2 ** 64 - 1


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ArrayConfig(_Section):
    """Antenna layout and Earth-rotation synthesis."""
    csv_path: Optional[Path] = Field(None, description="Layout CSV; overrides the generator")
    generator: Literal["vla", "random"] = "vla"
    num_per_arm: int = Field(9, ge=1, description="Antennas per arm of the VLA-like array")
    r_max: float = Field(1e4, gt=0, description="Outermost radius in meters")
    random_radius: float = Field(1e3, gt=0)
    layout_seed: int = Field(0, ge=0)
    wavelength: float = Field(0.21, gt=0)
    declination_deg: float = Field(45.0, ge=-90, le=90)
    latitude_deg: float = Field(34.0784, ge=-90, le=90)
    hour_angle_span_h: Tuple[float, float] = (-2.5, 2.5)
    num_batches: int = Field(100, ge=1)
    num_antennas: int = Field(27, ge=2, description="Q of the random generator")

    @field_validator("csv_path")
    @classmethod
    def csv_exists(cls, v):
        """Referenced files must exist at load."""
        if v is not None and not Path(v).is_file():
            raise ValueError(f"array CSV not found: {v}")
        return v

    @field_validator("hour_angle_span_h")
    @classmethod
    def span_ordered(cls, v):
        if v[1] <= v[0]:
            raise ValueError("hour_angle_span_h must be (start, end) with start < end")
        return v

    def build_layout(self) -> ArrayLayout:
        """
        Build the configured layout.

        Raises:
            ConfigurationError: If the layout has fewer than two antennas
        """
        kwargs = {
            "wavelength": self.wavelength,
            "declination": float(np.deg2rad(self.declination_deg)),
            "latitude": float(np.deg2rad(self.latitude_deg)),
            "hour_angle_span": tuple(h * HOUR_ANGLE_RATE for h in self.hour_angle_span_h),
            "num_batches": self.num_batches,
        }
        if self.csv_path is not None:
            layout = load_layout_csv(self.csv_path, **kwargs)
        elif self.generator == "random":
            layout = make_random_layout(self.num_antennas, self.random_radius, self.layout_seed, **kwargs)
        else:
            layout = make_vla_like(self.num_per_arm, self.r_max, **kwargs)

        if layout.num_antennas < 2:
            raise ConfigurationError(f"At least two antennas are required, layout has {layout.num_antennas}")
        return layout


class SkyConfig(_Section):
    """Image grid and sparse sky."""
    side: int = Field(100, ge=2, description="Grid side N1 (even)")
    fov: Optional[float] = Field(None, gt=0, description="Field of view L; 0.1 * N1 when omitted")
    sparsity: int = Field(25, ge=0, description="Sparsity K")
    seed: Optional[int] = Field(None, ge=0, description="Sky seed; derived from the master seed when omitted")

    @field_validator("side")
    @classmethod
    def side_even(cls, v):
        if v % 2:
            raise ValueError(f"side must be even, got {v}")
        return v

    @model_validator(mode="after")
    def sparsity_fits(self):
        if self.sparsity > self.side ** 2:
            raise ValueError(f"sparsity {self.sparsity} exceeds the pixel count {self.side ** 2}")
        return self

    @property
    def pixel_size(self) -> float:
        return (self.fov / self.side) if self.fov else DEFAULT_PIXEL_SCALE


class SensingConfig(_Section):
    """Compressive sensing parameters."""
    num_projections: int = Field(25, ge=1, description="P")
    num_modulations: int = Field(12, ge=1, description="M")
    distribution: SketchDistribution = SketchDistribution.PHASE
    sketch_seed: Optional[int] = Field(None, ge=0)
    modulation_seed: Optional[int] = Field(None, ge=0)
    mode: Literal["forward", "simulate"] = Field("forward", description="Forward model or time-domain simulation")
    num_samples: int = Field(10_000, ge=1, description="Samples I per batch")
    noise_sigma: float = Field(0.0, ge=0, description="Receiver noise std (Sigma_n = sigma^2 Id)")
    visibility_noise: float = Field(0.0, ge=0, description="Visibility noise std sigma_vis")
    sample_budget: int = Field(10 ** 10, ge=1, description="Maximum Q * N * I")
    postsensing: bool = Field(False, description="Also emit post-sensing baselines in acquire")
    averaging_threshold: float = Field(0.1, gt=0, description="Averaging threshold as a fraction of N1")
    averaging_group: int = Field(4, ge=1)


class OperatorConfig(_Section):
    """Imaging operator."""
    backend: Literal["nufft", "nudft"] = "nufft"
    kernel_width: int = Field(7, ge=2)
    oversampling: float = Field(2.0, ge=1.5)
    kernel_beta: Optional[float] = Field(None, gt=0)
    uv_fill: float = Field(DEFAULT_UV_FILL, gt=0, le=0.9, description="Longest baseline as a fraction of N1/2")
    model: Literal["mrop", "irop"] = "mrop"
    inject_adjoint_fault: bool = False

    def kernel(self) -> KaiserBesselKernel:
        return KaiserBesselKernel(self.kernel_width, self.oversampling, self.kernel_beta)


class SolverSettings(_Section):
    """BPDN solver parameters."""
    epsilon: float = Field(1e-2, ge=0)
    max_outer: int = Field(30, ge=1)
    max_inner: int = Field(2000, ge=1)
    rel_tol: float = Field(1e-6, gt=0)
    nonneg: bool = True
    power_iters: int = Field(50, ge=1)

    def to_solver_config(self, seed: int = 0) -> SolverConfig:
        return SolverConfig(seed=seed, **self.model_dump())


class SweepConfig(_Section):
    """Phase-transition sweep."""
    fixed: Literal["K", "P", "M"] = "K"
    fixed_value: int = Field(25, ge=0)
    grids: Dict[str, List[int]] = Field(
        default_factory=lambda: {"P": [5, 10, 15, 20, 25], "M": [2, 4, 6, 8, 10, 12]}
    )
    trials: int = Field(20, ge=1, description="Trials S per cell")
    threshold_db: float = 40.0

    @model_validator(mode="after")
    def grids_cover_other_axes(self):
        axes = set(self.grids)
        expected = {"K", "P", "M"} - {self.fixed}
        if axes != expected:
            raise ValueError(f"grids must name exactly {sorted(expected)}, got {sorted(axes)}")
        for name, values in self.grids.items():
            if not values:
                raise ValueError(f"grid {name} is empty")
            low = 0 if name == "K" else 1
            if min(values) < low:
                raise ValueError(f"grid {name} has values below {low}")
        if self.fixed != "K" and self.fixed_value < 1:
            raise ValueError(f"{self.fixed} must be >= 1")
        return self


class OutputConfig(_Section):
    """Output directory and formats."""
    directory: Path = Path("results")
    png: bool = True
    resume: bool = True


class ExperimentConfig(_Section):
    """Complete experiment configuration."""
    seed: int = Field(0, ge=0, le=MAX_SEED, description="Master seed")
    threads: Optional[int] = Field(None, ge=1)
    array: ArrayConfig = Field(default_factory=ArrayConfig)
    sky: SkyConfig = Field(default_factory=SkyConfig)
    sensing: SensingConfig = Field(default_factory=SensingConfig)
    operator: OperatorConfig = Field(default_factory=OperatorConfig)
    solver: SolverSettings = Field(default_factory=SolverSettings)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    def snapshot(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


class RunManifest(BaseModel):
    """Record of one command run: config, seeds, timings and output digests."""
    command: str
    config: Dict[str, Any]
    master_seed: int
    seeds: Dict[str, Any] = Field(default_factory=dict)
    tool_version: str = __version__
    stage_seconds: Dict[str, float] = Field(default_factory=dict)
    outputs: Dict[str, str] = Field(default_factory=dict)
    results: Dict[str, Any] = Field(default_factory=dict)
    created_at: str = Field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%S%z"))


class StageTimer:
    """Accumulates wall-clock seconds per named stage."""

    def __init__(self):
        self.seconds: Dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[name] = self.seconds.get(name, 0.0) + time.perf_counter() - start


def _parse_value(raw: str) -> Any:
    try:
        return tomllib.loads(f"value = {raw}")["value"]
    except tomllib.TOMLDecodeError:
        return raw


def _set_dotted(data: Dict[str, Any], dotted: str, value: Any) -> None:
    keys = [k.strip() for k in dotted.split(".") if k.strip()]
    if not keys:
        raise ConfigurationError(f"Empty configuration key: {dotted!r}")
    node = data
    for key in keys[:-1]:
        child = node.setdefault(key, {})
        if not isinstance(child, dict):
            raise ConfigurationError(f"Key {dotted!r} descends into a non-table value")
        node = child
    node[keys[-1]] = value


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """
    Apply ``section.key=value`` overrides; values are parsed as TOML literals.

    Raises:
        ConfigurationError: If an override is malformed
    """
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"Override must look like section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        _set_dotted(data, dotted, _parse_value(raw.strip()))
    return data


def load_config(
    path: Optional[Path] = None,
    overrides: Sequence[str] = (),
    flags: Optional[Mapping[str, Any]] = None,
) -> ExperimentConfig:
    """
    Load and validate a configuration.

    Args:
        path: TOML file (defaults only when omitted)
        overrides: ``section.key=value`` overrides applied on top
        flags: Typed values of dedicated CLI flags keyed by dotted config key;
            None values are ignored

    Returns:
        ExperimentConfig

    Raises:
        ConfigurationError: If the file is missing, unreadable or invalid
    """
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"Config file not found: {path}")
        try:
            with path.open("rb") as handle:
                data = tomllib.load(handle)
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"{path}: {e}") from e

    data = apply_overrides(data, overrides)
    for dotted, value in (flags or {}).items():
        if value is not None:
            _set_dotted(data, dotted, value)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration:\n{e}") from e


def resolve_threads(flag: Optional[int], config: ExperimentConfig) -> int:
    """Flag, then config, then CRI_ROP_THREADS, then the machine's CPU count."""
    if flag is not None:
        threads = flag
    elif config.threads is not None:
        threads = config.threads
    elif os.getenv(THREADS_ENV):
        try:
            threads = int(os.environ[THREADS_ENV])
        except ValueError as e:
            raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {os.environ[THREADS_ENV]!r}") from e
    else:
        threads = os.cpu_count() or 1
    if threads < 1:
        raise ConfigurationError(f"threads must be >= 1, got {threads}")
    return threads
