import logging
from collections import deque
from typing import Optional

import numpy as np

from app.exceptions import HistoryError
from app.models.loop import AoiState, ControllerMemory, LoopState
from app.models.system import LinkModel, SystemModel
from app.services.aoi_service import AoiService
from app.utils.streams import EpisodeStreams, RandomStream

logger = logging.getLogger(__name__)


class ControlLoopService:
    """Plant, age-aware estimator and pseudo-inverse controller of a single loop."""

    @staticmethod
    def initial_state(model: SystemModel, x0: np.ndarray, link: LinkModel) -> LoopState:
        """Loop at t = 0: the controller holds x(0) itself, so its age starts at 0."""
        x0 = np.asarray(x0, dtype=float)
        memory = ControllerMemory(
            last_state=x0,
            last_state_time=0,
            depth=model.history_depth,
            control_dim=model.m,
        )
        return LoopState(t=0, x=x0, aoi=AoiState(0), mem=memory, in_flight=deque(maxlen=link.delay))

    @staticmethod
    def estimate_state(model: SystemModel, mem: ControllerMemory, age: int) -> np.ndarray:
        """Controller-side estimate of x(t) from x(t - age) and u(t-1) .. u(t-age).

        x_hat = A^age x(t - age) + sum_{tau=1..age} A^(tau-1) B u(t - tau)
        """
        if age < 0:
            raise HistoryError(f"age must be non-negative, got {age}")
        if age > model.history_depth:
            raise HistoryError(f"age {age} exceeds the control history depth {model.history_depth}")
        controls = mem.recent_controls(age)
        estimate = model.powers.power(age) @ mem.last_state
        if age:
            estimate = estimate + np.einsum("knm,km->n", model.powers_b[:age], controls)
        return estimate

    @staticmethod
    def control_signal(model: SystemModel, x_hat: np.ndarray) -> np.ndarray:
        """u = B^+ (x_aim - A x_hat)."""
        return model.b_pinv @ (model.x_aim - model.A @ x_hat)

    @staticmethod
    def plant_step(model: SystemModel, x: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        return model.A @ x + model.B @ u + w

    @staticmethod
    def sample_noise(model: SystemModel, stream: RandomStream) -> np.ndarray:
        """w ~ N(0, sigma) through the square-root factor of sigma."""
        return model.noise_factor @ stream.normals(model.n)

    @staticmethod
    def closed_loop_step(
        model: SystemModel,
        state: LoopState,
        link: LinkModel,
        streams: EpisodeStreams,
        noise: Optional[np.ndarray] = None,
    ) -> LoopState:
        """Advance the loop by one step.

        Order within the step: reception, age and memory update, estimate,
        control, noise draw, plant update. The returned state carries the age
        the controller acted on to produce its x. `noise` overrides the draw.
        Controller memory is updated in place.
        """
        t = state.t
        aoi = state.aoi
        mem = state.mem
        in_flight = state.in_flight

        if t >= 1:
            received = AoiService.sample_reception(link, streams.link, t)
            if received and len(in_flight) == link.delay:
                sent_at, sensed = in_flight[0]
                mem.receive(sensed, sent_at)
            aoi = AoiService.advance(link, aoi, received)

        x_hat = ControlLoopService.estimate_state(model, mem, aoi.age)
        u = ControlLoopService.control_signal(model, x_hat)
        mem.push_control(u)

        w = ControlLoopService.sample_noise(model, streams.noise) if noise is None else noise
        x_next = ControlLoopService.plant_step(model, state.x, u, w)
        in_flight.append((t, state.x))
        return LoopState(t=t + 1, x=x_next, aoi=aoi, mem=mem, in_flight=in_flight)
