from __future__ import annotations

import os
import statistics
import time
from datetime import datetime

import pytest

from schoolsense.directory import Directory
from schoolsense.domain import (
    FIVE_MIN_MS,
    HOUR_MS,
    Granularity,
    IntervalKey,
    IntervalSummary,
    ResourceDescriptor,
    SensorKind,
    to_epoch_ms,
)
from schoolsense.query import QueryRequest, QueryService
from schoolsense.summaries import SummaryStore

pytestmark = pytest.mark.skipif(
    os.getenv("RUN_BENCH") != "1", reason="set RUN_BENCH=1 for the query latency run"
)

RESOURCES = ("R0.temperature", "R1.temperature", "R2.temperature")


def _month(k: int) -> int:
    y, m = divmod(k, 12)
    return to_epoch_ms(datetime(2017 + y, m + 1, 1))


def _seed(store: SummaryStore) -> None:
    t0, t1 = _month(0), _month(12)
    for rid in RESOURCES:
        for g, step in (
            (Granularity.FIVE_MIN, FIVE_MIN_MS),
            (Granularity.HOUR, HOUR_MS),
            (Granularity.DAY, 24 * HOUR_MS),
        ):
            store.put_many(
                IntervalSummary(rid, IntervalKey(g, ts), 21.0, 19.0, 23.0, 1)
                for ts in range(t0, t1, step)
            )


def _mean_ms(service: QueryService, t0: int, t1: int, n: int = 20) -> float:
    q = QueryRequest(RESOURCES[0], Granularity.DAY, t0, t1)
    times = []
    for _ in range(n):
        started = time.perf_counter()
        result = service.historical(q)
        times.append((time.perf_counter() - started) * 1000)
    assert result.summaries
    return statistics.mean(times)


def test_month_queries_are_flat_and_a_year_costs_at_least_a_month(tmp_path):
    directory = Directory()
    for rid in RESOURCES:
        device, sensor = rid.split(".")
        directory.register(ResourceDescriptor(rid, device, sensor, SensorKind.ENVIRONMENTAL))
    store = SummaryStore.at(tmp_path)
    _seed(store)
    service = QueryService(directory, store)
    _mean_ms(service, _month(0), _month(1), n=3)

    monthly = [_mean_ms(service, _month(k), _month(k + 1)) for k in range(12)]
    one_month = _mean_ms(service, _month(0), _month(1))
    twelve_months = _mean_ms(service, _month(0), _month(12))

    assert max(monthly) < 1000
    assert max(monthly) / min(monthly) <= 3
    assert twelve_months < 1000
    assert twelve_months >= one_month
