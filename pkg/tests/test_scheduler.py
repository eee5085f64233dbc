import asyncio
import threading
import time

import pytest

from sky_nowcast.errors import ConfigError
from sky_nowcast.infra.scheduler import DayScheduler


@pytest.mark.asyncio
async def test_results_keep_input_order():
    scheduler = DayScheduler(jobs=3)

    def work(day):
        time.sleep(0.01 * (5 - day))
        return day * 10

    assert await scheduler.run([1, 2, 3, 4], work) == [10, 20, 30, 40]


@pytest.mark.asyncio
async def test_concurrency_is_bounded():
    scheduler = DayScheduler(jobs=2)
    lock = threading.Lock()
    active = []
    peak = []

    def work(day):
        with lock:
            active.append(day)
            peak.append(len(active))
        time.sleep(0.02)
        with lock:
            active.remove(day)
        return day

    await scheduler.run(list(range(6)), work)
    assert max(peak) <= 2


@pytest.mark.asyncio
async def test_empty_input_and_errors():
    scheduler = DayScheduler()
    assert await scheduler.run([], lambda day: day) == []

    def boom(day):
        raise ValueError(day)

    with pytest.raises(ValueError):
        await scheduler.run(["2019-01-01"], boom)
    await asyncio.sleep(0)


def test_jobs_must_be_positive():
    with pytest.raises(ConfigError):
        DayScheduler(jobs=0)
