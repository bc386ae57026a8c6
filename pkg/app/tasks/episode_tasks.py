import logging
from typing import Callable, Optional

from app.models.simulation import RunStats, Scenario
from app.services.montecarlo_service import MonteCarloService
from app.tasks.executor import create_executor, resolve_workers

logger = logging.getLogger(__name__)


def run_episode_task(scenario: Scenario, episode_index: int) -> RunStats:
    """
    Worker entry point for one episode.

    Args:
        scenario: Scenario to simulate
        episode_index: Index that, with the scenario seed, fixes the episode's random streams
    """
    logger.debug(f"Running episode {episode_index} (seed {scenario.base_seed})")
    return MonteCarloService.run_episode(scenario, episode_index)


class EpisodeRunner:
    """Runs whole scenarios on a shared pool, keeping it open across compare cells.

    Usable as the runner argument of MonteCarloService.compare and
    calibrate_convention. Results do not depend on the worker count: episodes
    are mapped in index order and pooled with an order-independent reduction.
    """

    def __init__(self, workers: Optional[int] = None, kind: Optional[str] = None):
        self.workers = resolve_workers(workers)
        self.kind = kind
        self._executor = None

    def __enter__(self) -> "EpisodeRunner":
        if self.workers > 1:
            self._executor = create_executor(self.workers, self.kind)
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    @property
    def map_fn(self) -> Callable:
        return self._executor.map if self._executor is not None else map

    def __call__(self, scenario: Scenario) -> RunStats:
        logger.info(
            f"Simulating {scenario.episodes} episode(s) x {scenario.horizon} steps, "
            f"link {scenario.link}, workers={self.workers}"
        )
        indices = range(scenario.episodes)
        results = list(self.map_fn(run_episode_task, [scenario] * scenario.episodes, indices))
        stats = MonteCarloService.aggregate(results)
        logger.info(f"Counted {stats.counted_steps} steps, {stats.outage_steps} outages")
        return stats


def run_episodes(scenario: Scenario, workers: Optional[int] = None, kind: Optional[str] = None) -> RunStats:
    """Run every episode of `scenario` and return the pooled statistics."""
    with EpisodeRunner(workers, kind) as runner:
        return runner(scenario)
