import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.simulation import Axis, VarianceConvention
from app.models.system import LinkMode

Matrix = List[List[float]]


def _check_finite(values: List[float], name: str) -> List[float]:
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"{name} contains non-finite entries")
    return values


def _check_rectangular(rows: Matrix, name: str) -> Matrix:
    if not rows or not rows[0]:
        raise ValueError(f"{name} must be a non-empty nested array")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"{name} row {i} has {len(row)} entries, expected {width}")
        _check_finite(row, name)
    return rows


class SystemSpec(BaseModel):
    """Plant, noise and cost of the loop. Matrices are row-major nested arrays."""
    model_config = ConfigDict(extra="forbid")

    A: Matrix = Field(..., description="State transition matrix (N x N)")
    B: Matrix = Field(..., description="Input matrix (N x M)")
    sigma: Matrix = Field(..., description="Process-noise covariance (N x N)")
    g: List[float] = Field(..., min_length=1, description="Cost row vector")
    x_aim: List[float] = Field(..., min_length=1, description="Ideal state")
    delta_g: float = Field(..., gt=0, description="Half-width of the admissible cost band")
    history_depth: Optional[int] = Field(default=None, ge=1, description="Control history ring; AOI_HISTORY_DEPTH when unset")

    @field_validator("A", "B", "sigma")
    @classmethod
    def validate_matrix(cls, v, info):
        return _check_rectangular(v, info.field_name)

    @field_validator("g", "x_aim")
    @classmethod
    def validate_vector(cls, v, info):
        return _check_finite(v, info.field_name)

    @model_validator(mode="after")
    def validate_shapes(self):
        n = len(self.A)
        if len(self.A[0]) != n:
            raise ValueError(f"A must be square, got {n}x{len(self.A[0])}")
        if len(self.sigma) != n or len(self.sigma[0]) != n:
            raise ValueError(f"sigma must be {n}x{n}")
        if len(self.B) != n and not (len(self.B) == 1 and len(self.B[0]) == n):
            raise ValueError(f"B must have {n} rows")
        if len(self.g) != n or len(self.x_aim) != n:
            raise ValueError(f"g and x_aim must have length {n}")
        return self


class LinkSpec(BaseModel):
    """Uplink reception process."""
    model_config = ConfigDict(extra="forbid")

    mode: LinkMode = LinkMode.BERNOULLI
    p: Optional[float] = Field(default=None, gt=0, le=1)
    age: Optional[int] = Field(default=None, ge=1)
    period: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def validate_mode_parameters(self):
        required = {LinkMode.BERNOULLI: "p", LinkMode.FIXED_AGE: "age", LinkMode.PERIODIC: "period"}[self.mode]
        if getattr(self, required) is None:
            raise ValueError(f"{self.mode.value} link requires '{required}'")
        return self


class SimulationSpec(BaseModel):
    """Monte-Carlo run parameters. A missing warmup means ten times the largest planned age."""
    model_config = ConfigDict(extra="forbid")

    horizon: int = Field(default=100_000, ge=1)
    episodes: int = Field(default=1, ge=1)
    warmup: Optional[int] = Field(default=None, ge=0)
    seed: int = Field(default=0, ge=0)
    sample_stride: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def validate_warmup(self):
        if self.warmup is not None and self.warmup >= self.horizon:
            raise ValueError(f"warmup ({self.warmup}) must be smaller than horizon ({self.horizon})")
        return self


class AnalysisSpec(BaseModel):
    """Convention, axis and grids for analyze / compare; unset convention and axis fall back to settings."""
    model_config = ConfigDict(extra="forbid")

    convention: Optional[VarianceConvention] = None
    axis: Optional[Axis] = None
    ages: List[int] = Field(default_factory=lambda: [1, 2, 3, 4])
    noise_grid: List[float] = Field(default_factory=lambda: [1.0])
    age_grid: List[int] = Field(default_factory=lambda: [1, 2, 3, 4])

    @field_validator("ages", "age_grid")
    @classmethod
    def validate_ages(cls, v):
        if any(age < 1 for age in v):
            raise ValueError("ages must be >= 1")
        return v

    @field_validator("noise_grid")
    @classmethod
    def validate_noise_grid(cls, v):
        if any(not math.isfinite(s) or s < 0 for s in v):
            raise ValueError("noise scales must be finite and non-negative")
        return v


class OutputSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: Optional[str] = None
    format: Optional[Literal["csv", "json"]] = None


class ScenarioFile(BaseModel):
    """Everything a run needs, as stored on disk."""
    model_config = ConfigDict(extra="forbid")

    name: str = "scenario"
    description: Optional[str] = None
    system: SystemSpec
    link: LinkSpec = Field(default_factory=lambda: LinkSpec(mode=LinkMode.BERNOULLI, p=1.0))
    x0: Optional[List[float]] = Field(default=None, description="Initial state; defaults to x_aim")
    simulation: SimulationSpec = Field(default_factory=SimulationSpec)
    analysis: AnalysisSpec = Field(default_factory=AnalysisSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)

    @model_validator(mode="after")
    def validate_x0(self):
        if self.x0 is not None:
            _check_finite(self.x0, "x0")
            if len(self.x0) != len(self.system.A):
                raise ValueError(f"x0 must have length {len(self.system.A)}")
        return self
