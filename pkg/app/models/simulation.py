import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Union

import numpy as np

from app.exceptions import ModelValidationError
from app.models.system import LinkModel, SystemModel


class VarianceConvention(str, Enum):
    """Which noise terms make up the cost error variance at age alpha.

    paper_shifted: g A^tau terms for tau = 1 .. alpha + 1.
    accumulation:  g A^tau terms for tau = 0 .. alpha (exact for full-row-rank B).
    closed_loop:   stationary variance of the simulated loop at fixed age.
    """
    PAPER_SHIFTED = "paper_shifted"
    ACCUMULATION = "accumulation"
    CLOSED_LOOP = "closed_loop"


class Axis(str, Enum):
    """Coordinate along which convexity of p_out is judged."""
    VARIANCE = "variance"
    STD_DEV = "std_dev"


class Regime(str, Enum):
    CONVEX = "convex"
    CONCAVE = "concave"
    INFLECTION = "inflection"


@dataclass(frozen=True)
class OutagePoint:
    age: int
    sigma_g_sq: float
    p_out: float
    regime: Regime


@dataclass(frozen=True)
class InflectionPoint:
    """Inflection of p_out, always expressed in variance units (sigma_G^2)."""
    axis: Axis
    paper_value: float
    numeric_value: float
    closed_form: float


@dataclass(frozen=True, eq=False)
class Scenario:
    model: SystemModel
    link: LinkModel
    x0: np.ndarray
    horizon: int
    episodes: int
    warmup: int
    base_seed: int
    convention: VarianceConvention = VarianceConvention.PAPER_SHIFTED
    sample_stride: int = 1

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        if x0.shape != (self.model.n,):
            raise ModelValidationError(f"x0 must have length {self.model.n}, got {x0.shape[0]}")
        object.__setattr__(self, "x0", x0)
        if self.episodes < 1:
            raise ModelValidationError(f"episodes must be >= 1, got {self.episodes}")
        if self.warmup < 0 or self.horizon <= self.warmup:
            raise ModelValidationError(
                f"need horizon > warmup >= 0, got horizon={self.horizon} warmup={self.warmup}"
            )
        if self.sample_stride < 1:
            raise ModelValidationError(f"sample_stride must be >= 1, got {self.sample_stride}")

    def with_changes(self, **changes) -> "Scenario":
        return replace(self, **changes)


@dataclass(frozen=True)
class RunStats:
    """Monte-Carlo counters for one episode or a pooled set of episodes.

    error_sum / error_sq_sum accumulate d = g x - G_aim over counted steps;
    age_histogram and outage_by_age are keyed by the age in force when the
    counted state was produced.
    """

    counted_steps: int
    outage_steps: int
    age_histogram: dict[int, int]
    outage_by_age: dict[int, int]
    error_sum: float
    error_sq_sum: float
    seed: int
    episodes: int = 1

    def __post_init__(self):
        if self.outage_steps > self.counted_steps:
            raise ValueError("outage_steps cannot exceed counted_steps")
        if sum(self.age_histogram.values()) != self.counted_steps:
            raise ValueError("age histogram does not add up to counted_steps")

    @property
    def outage_rate(self) -> float:
        return self.outage_steps / self.counted_steps if self.counted_steps else math.nan

    @property
    def error_mean(self) -> float:
        return self.error_sum / self.counted_steps if self.counted_steps else math.nan

    @property
    def empirical_variance(self) -> float:
        """Unbiased sample variance of g x - G_aim."""
        n = self.counted_steps
        if n < 2:
            return math.nan
        return max(0.0, (self.error_sq_sum - self.error_sum ** 2 / n) / (n - 1))


@dataclass(frozen=True)
class RateEstimate:
    """Point estimate and Wilson score interval of an outage rate."""
    p_sim: float
    ci_half_width: float
    lower: float
    upper: float
    confidence: float

    def contains(self, p: float, rare_event_threshold: float = 0.0) -> bool:
        if p < rare_event_threshold:
            return p <= self.upper
        return self.lower <= p <= self.upper


STATIONARY = "stationary"


@dataclass(frozen=True)
class ComparisonRow:
    noise_scale: float
    age: Union[int, str]
    p_sim: float
    ci_half_width: float
    p_model: float
    within_ci: bool
    var_sim: float = math.nan
    var_model: float = math.nan
    counted_steps: int = 0
    convention: Optional[VarianceConvention] = None
