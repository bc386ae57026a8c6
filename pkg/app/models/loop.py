from collections import deque
from dataclasses import dataclass, field
from itertools import islice

import numpy as np

from app.exceptions import HistoryError


@dataclass(frozen=True, slots=True)
class AoiState:
    """Age of the freshest plant state available at the controller, in steps."""
    age: int


class ControllerMemory:
    """What the controller knows: the last received state and its own past controls.

    Controls are kept newest first in a bounded ring; asking for more of them
    than the ring can hold is an error rather than a silent truncation.
    """

    def __init__(self, last_state: np.ndarray, last_state_time: int, depth: int, control_dim: int):
        self.last_state = np.asarray(last_state, dtype=float)
        self.last_state_time = last_state_time
        self.depth = depth
        self.control_dim = control_dim
        self._controls: deque[np.ndarray] = deque(maxlen=depth)

    def receive(self, state: np.ndarray, time: int) -> None:
        if time > self.last_state_time:
            self.last_state = state
            self.last_state_time = time

    def push_control(self, u: np.ndarray) -> None:
        self._controls.appendleft(u)

    def recent_controls(self, count: int) -> np.ndarray:
        """u(t-1), ..., u(t-count) stacked as rows."""
        if count > self.depth:
            raise HistoryError(f"age {count} exceeds the control history depth {self.depth}")
        if count > len(self._controls):
            raise HistoryError(f"age {count} needs {count} past controls, only {len(self._controls)} recorded")
        if count == 0:
            return np.empty((0, self.control_dim))
        return np.stack(list(islice(self._controls, count)))

    def __len__(self) -> int:
        return len(self._controls)


@dataclass
class LoopState:
    """Closed-loop state at time t.

    `in_flight` holds (time, state) packets the sensor has sent that the
    controller has not yet been handed, oldest first.
    """

    t: int
    x: np.ndarray
    aoi: AoiState
    mem: ControllerMemory
    in_flight: deque = field(default_factory=deque)
