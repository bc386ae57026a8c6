from .episode_tasks import EpisodeRunner, run_episode_task, run_episodes
from .executor import create_executor

__all__ = ["EpisodeRunner", "create_executor", "run_episode_task", "run_episodes"]
