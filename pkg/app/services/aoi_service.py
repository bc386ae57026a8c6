import logging
import math
from typing import Optional

import numpy as np

from app.models.loop import AoiState
from app.models.system import DEFAULT_HISTORY_DEPTH, LinkMode, LinkModel
from app.utils.streams import RandomStream

logger = logging.getLogger(__name__)

# residual probability mass below which the age law is truncated
TAIL_MASS = 1e-12


class AoiService:
    """Age-of-Information process induced by the uplink."""

    @staticmethod
    def step(current: AoiState, received: bool) -> AoiState:
        """AoI recurrence: reset to 1 on reception, otherwise grow by one."""
        return AoiState(1) if received else AoiState(current.age + 1)

    @staticmethod
    def advance(link: LinkModel, current: AoiState, received: bool) -> AoiState:
        """Next age under `link`.

        A fixed-age pipe hands over x(t - age) on every delivery, so a
        delivery pins the age instead of resetting it.
        """
        if link.mode == LinkMode.FIXED_AGE:
            return AoiState(link.age) if received else AoiState(current.age + 1)
        return AoiService.step(current, received)

    @staticmethod
    def sample_reception(link: LinkModel, stream: RandomStream, t: int = 1) -> bool:
        """Whether the packet due at step t reaches the controller.

        Only the bernoulli mode consumes randomness; the other modes are
        deterministic in t.
        """
        if link.mode == LinkMode.BERNOULLI:
            return stream.uniform() < link.p
        if link.mode == LinkMode.PERIODIC:
            return t >= 1 and t % link.period == 0
        return t >= link.age

    @staticmethod
    def stationary_pmf(p: float, k: int) -> float:
        """Stationary probability that the age equals k under bernoulli(p) reception."""
        if not 0.0 < p <= 1.0:
            raise ValueError(f"p must be in (0, 1], got {p}")
        if k < 1:
            raise ValueError(f"age must be >= 1, got {k}")
        return p * (1.0 - p) ** (k - 1)

    @staticmethod
    def stationary_pmf_table(p: float, max_age: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
        """Ages 1..K and their stationary probabilities, K chosen so the tail is below TAIL_MASS."""
        if max_age is None:
            max_age = AoiService.tail_cutoff(p)
        ages = np.arange(1, max_age + 1)
        return ages, p * (1.0 - p) ** (ages - 1)

    @staticmethod
    def tail_cutoff(p: float, tail: float = TAIL_MASS) -> int:
        """Smallest K with P(age > K) = (1 - p)^K below `tail`."""
        if p >= 1.0:
            return 1
        return max(1, math.ceil(math.log(tail) / math.log1p(-p)))

    @staticmethod
    def stationary_mean_age(p: float) -> float:
        return 1.0 / p

    @staticmethod
    def alpha_max(link: LinkModel, history_depth: int = DEFAULT_HISTORY_DEPTH) -> int:
        """Largest age worth planning for under `link` (used to size warm-ups)."""
        if link.mode == LinkMode.FIXED_AGE:
            return link.age
        if link.mode == LinkMode.PERIODIC:
            return link.period
        return min(AoiService.tail_cutoff(link.p, 1e-9), history_depth)

    @staticmethod
    def default_warmup(link: LinkModel, history_depth: int = DEFAULT_HISTORY_DEPTH) -> int:
        return 10 * AoiService.alpha_max(link, history_depth)

    @staticmethod
    def age_trace(link: LinkModel, stream: RandomStream, steps: int) -> np.ndarray:
        """Ages at steps 1..steps, starting from a controller that knows x(0)."""
        ages = np.empty(steps, dtype=np.int64)
        state = AoiState(0)
        for t in range(1, steps + 1):
            state = AoiService.advance(link, state, AoiService.sample_reception(link, stream, t))
            ages[t - 1] = state.age
        return ages
