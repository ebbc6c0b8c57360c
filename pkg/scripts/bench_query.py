from __future__ import annotations

import os
import statistics
import tempfile
import time
from datetime import date, datetime

from schoolsense.directory import Directory
from schoolsense.domain import (
    FIVE_MIN_MS,
    Granularity,
    Reading,
    ResourceDescriptor,
    SensorKind,
    to_epoch_ms,
)
from schoolsense.engine import Engine
from schoolsense.query import QueryRequest, QueryService
from schoolsense.summaries import SummaryStore

START = date(2017, 1, 1)


def _month_start(months: int) -> int:
    y, m = divmod(START.month - 1 + months, 12)
    return to_epoch_ms(datetime(START.year + y, m + 1, 1))


def _fill(store_dir: str, resources: int) -> Directory:
    directory = Directory()
    for i in range(resources):
        directory.register(
            ResourceDescriptor(
                f"R{i}.temperature", f"R{i}", "temperature", SensorKind.ENVIRONMENTAL, "C", 300
            )
        )
    engine = Engine(directory, SummaryStore.at(store_dir), flush_every=20_000)
    t0, t1 = _month_start(0), _month_start(12)
    try:
        for ts in range(t0, t1, FIVE_MIN_MS):
            for i in range(resources):
                value = 20.0 + (ts // FIVE_MIN_MS + i) % 97 / 10
                engine.submit(Reading(f"R{i}.temperature", f"R{i}", "temperature", value, ts))
    finally:
        engine.close()
    return directory


def _mean_ms(service: QueryService, resource_id: str, t0: int, t1: int, n: int) -> float:
    q = QueryRequest(resource_id, Granularity.DAY, t0, t1)
    times = []
    for _ in range(n):
        start = time.perf_counter()
        service.historical(q)
        times.append((time.perf_counter() - start) * 1000)
    return statistics.mean(times)


def main() -> None:
    n = int(os.environ.get("BENCH_N", "20"))
    resources = int(os.environ.get("BENCH_RESOURCES", "3"))
    with tempfile.TemporaryDirectory() as store_dir:
        directory = _fill(store_dir, resources)
        service = QueryService(directory, SummaryStore.at(store_dir))
        rid = "R0.temperature"
        monthly = [
            _mean_ms(service, rid, _month_start(m), _month_start(m + 1), n) for m in range(12)
        ]
        spans = [_mean_ms(service, rid, _month_start(0), _month_start(k), n) for k in (1, 12)]
        service.store.close()

    ratio = max(monthly) / min(monthly) if min(monthly) > 0 else float("inf")
    print(
        f"n={n} resources={resources} month_max_ms={max(monthly):.2f} "
        f"month_min_ms={min(monthly):.2f} ratio={ratio:.2f} "
        f"span_1m_ms={spans[0]:.2f} span_12m_ms={spans[1]:.2f}"
    )


if __name__ == "__main__":
    main()
