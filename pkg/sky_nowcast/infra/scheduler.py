from __future__ import annotations

import asyncio
import logging
import time
from typing import Callable, Generic, Hashable, List, Sequence, TypeVar

from ..errors import ConfigError

_LOGGER = logging.getLogger(__name__)

K = TypeVar("K", bound=Hashable)
R = TypeVar("R")


class DayScheduler(Generic[K, R]):
    """Runs CPU-bound per-day work in worker threads, at most ``jobs`` at a time."""

    def __init__(self, jobs: int = 1) -> None:
        if jobs < 1:
            raise ConfigError("jobs must be >= 1")
        self._jobs = jobs
        self._semaphore = asyncio.Semaphore(jobs)

    @property
    def jobs(self) -> int:
        return self._jobs

    async def _run_one(self, day: K, work: Callable[[K], R]) -> R:
        async with self._semaphore:
            started = time.monotonic()
            result = await asyncio.to_thread(work, day)
            _LOGGER.debug("Partition %s finished in %.2fs", day, time.monotonic() - started)
            return result

    async def run(self, days: Sequence[K], work: Callable[[K], R]) -> List[R]:
        """Results come back in the order of ``days`` whatever order the workers finish in."""

        if not days:
            return []
        started = time.monotonic()
        results = await asyncio.gather(*(self._run_one(day, work) for day in days))
        _LOGGER.info(
            "Processed %d partitions with %d jobs in %.2fs", len(days), self._jobs, time.monotonic() - started
        )
        return list(results)


__all__ = ["DayScheduler"]
