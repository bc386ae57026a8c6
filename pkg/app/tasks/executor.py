import logging
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from typing import Optional

from app.config import settings

logger = logging.getLogger(__name__)

EXECUTOR_KINDS = ("thread", "process")


def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit worker count, else AOI_THREADS / settings.threads."""
    count = settings.threads if workers is None else workers
    if count < 1:
        raise ValueError(f"worker count must be >= 1, got {count}")
    return count


def create_executor(workers: int, kind: Optional[str] = None) -> Executor:
    """Create and configure the pool that runs episodes."""
    kind = kind or settings.executor
    logger.info(f"Starting {kind} pool with {workers} workers")
    if kind == "thread":
        return ThreadPoolExecutor(max_workers=workers, thread_name_prefix="episode")
    if kind == "process":
        return ProcessPoolExecutor(max_workers=workers)
    raise ValueError(f"unknown executor kind {kind!r}; expected one of {EXECUTOR_KINDS}")
