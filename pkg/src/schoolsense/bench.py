from __future__ import annotations

import logging
import random
import time
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

from .directory import Directory
from .domain import Reading, ResourceDescriptor, SensorKind
from .engine import AggregationType, Engine, EngineUnavailable, LatencyStats
from .ingest import Backpressure, EngineWorker, SubmissionQueue, forward

logger = logging.getLogger(__name__)

# observed share of measurements per aggregation type
DEFAULT_MIX: dict[AggregationType, float] = {
    AggregationType.AVERAGE: 0.864,
    AggregationType.TOTAL: 0.009,
    AggregationType.POWER: 0.127,
}
BENCH_START_MS = 1_506_816_000_000  # 2017-10-01T00:00:00Z

_BENCH_SENSOR = {
    AggregationType.AVERAGE: ("temperature", SensorKind.ENVIRONMENTAL, "C"),
    AggregationType.TOTAL: ("rain", SensorKind.WEATHER, "mm"),
    AggregationType.POWER: ("current", SensorKind.POWER, "A"),
}


@dataclass
class BenchReport:
    rate: float
    duration_s: float
    offered: int = 0
    processed: int = 0
    drops: int = 0
    rejected: int = 0
    elapsed_s: float = 0.0
    offer_span_s: float = 0.0
    latency: dict[AggregationType, LatencyStats] = field(default_factory=dict)
    offered_by_type: dict[AggregationType, int] = field(default_factory=dict)

    @property
    def throughput(self) -> float:
        """Sustained readings per second over the offered span.

        The span is the nominal duration, or longer when offering itself fell behind; the
        final queue drain is excluded and shows up in ``elapsed_s`` instead.
        """
        span = max(self.duration_s, self.offer_span_s)
        return self.processed / span if span > 0 else 0.0

    @property
    def capacity(self) -> float:
        """Unpaced readings per second: processed over the engine's summed submit time."""
        busy_ms = sum(s.count * s.mean_ms for s in self.latency.values())
        return self.processed / (busy_ms / 1000) if busy_ms > 0 else 0.0

    def mix(self) -> dict[AggregationType, float]:
        if not self.offered:
            return {}
        return {k: n / self.offered for k, n in self.offered_by_type.items()}

    def as_dict(self) -> dict[str, object]:
        shares = self.mix()
        return {
            "rate": self.rate,
            "duration_s": self.duration_s,
            "offered": self.offered,
            "processed": self.processed,
            "drops": self.drops,
            "rejected": self.rejected,
            "elapsed_s": round(self.elapsed_s, 3),
            "offer_span_s": round(self.offer_span_s, 3),
            "throughput": round(self.throughput, 3),
            "capacity": round(self.capacity, 1),
            "latency": {
                kind.value: {
                    "count": stats.count,
                    "share": round(shares.get(kind, 0.0), 4),
                    "mean_ms": stats.mean_ms,
                    "median_ms": stats.median_ms,
                    "p99_ms": stats.p99_ms,
                }
                for kind, stats in self.latency.items()
            },
        }

    def latency_rows(self) -> list[dict[str, object]]:
        shares = self.mix()
        return [
            {
                "aggregation_type": kind.value,
                "events": stats.count,
                "share": round(shares.get(kind, 0.0), 4),
                "mean_ms": round(stats.mean_ms, 4),
                "median_ms": round(stats.median_ms, 4),
                "p99_ms": round(stats.p99_ms, 4),
            }
            for kind, stats in self.latency.items()
        ]


def bench_directory(per_type: int = 10) -> Directory:
    """``per_type`` resources of each aggregation type on one synthetic site."""
    directory = Directory()
    for kind, (sensor, sensor_kind, units) in _BENCH_SENSOR.items():
        for i in range(per_type):
            device = f"bench-{kind.value}-{i:02d}"
            directory.register(
                ResourceDescriptor(
                    f"{device}.{sensor}", device, sensor, sensor_kind, units, 30, "bench"
                )
            )
    return directory


def _pools(directory: Directory, engine: Engine) -> dict[AggregationType, list[ResourceDescriptor]]:
    pools: dict[AggregationType, list[ResourceDescriptor]] = {}
    for res in directory.list_resources():
        pools.setdefault(engine.aggregation_of(res.resource_id), []).append(res)
    return pools


def bench(
    rate: float,
    duration_s: float,
    engine: Engine,
    *,
    queue_size: int = 10000,
    mix: Mapping[AggregationType, float] = DEFAULT_MIX,
    seed: int = 0,
    clock: Callable[[], float] = time.perf_counter,
    sleep: Callable[[float], None] = time.sleep,
) -> BenchReport:
    """Drive ``engine`` through one worker at ``rate`` readings/s for ``duration_s`` seconds.

    Readings are offered without retry, so a full queue counts as a drop. Latency is the
    engine's own per-submit measurement and needs an instrumented engine.
    """
    report = BenchReport(rate, duration_s)
    if rate <= 0 or duration_s <= 0:
        return report
    if engine.closed:
        raise EngineUnavailable("engine is closed")
    if not engine.instrument:
        logger.warning("bench on an uninstrumented engine: latency report will be empty")
    pools = _pools(engine.directory, engine)
    kinds = [k for k in mix if pools.get(k) and mix[k] > 0]
    if not kinds:
        raise EngineUnavailable("engine directory has no resources for the requested mix")
    weights = [mix[k] for k in kinds]
    rng = random.Random(seed)
    next_index = dict.fromkeys(kinds, 0)
    last_ts: dict[str, int] = {}
    total = int(rate * duration_s)
    submissions = SubmissionQueue(queue_size)
    worker = EngineWorker(submissions, engine).start()
    started = clock()
    try:
        for k in range(total):
            due = k / rate
            delay = due - (clock() - started)
            if delay > 0:
                sleep(delay)
            kind = rng.choices(kinds, weights)[0]
            pool = pools[kind]
            res = pool[next_index[kind] % len(pool)]
            next_index[kind] += 1
            # one simulated second per reading keeps every resource strictly increasing
            ts = max(BENCH_START_MS + k * 1000, last_ts.get(res.resource_id, 0) + 1)
            last_ts[res.resource_id] = ts
            value = round(rng.uniform(0.0, 30.0), 3)
            report.offered += 1
            report.offered_by_type[kind] = report.offered_by_type.get(kind, 0) + 1
            try:
                forward(Reading(res.resource_id, res.device, res.sensor, value, ts), submissions)
            except Backpressure:
                report.drops += 1
        report.offer_span_s = clock() - started
        worker.drain()
        report.elapsed_s = clock() - started
    finally:
        worker.stop()
    report.processed = worker.counters.forwarded
    report.rejected = worker.counters.rejected + worker.counters.errors
    report.latency = engine.latency.report()
    logger.info(
        "bench done rate=%s duration_s=%s offered=%d processed=%d drops=%d "
        "throughput=%.1f capacity=%.1f",
        rate,
        duration_s,
        report.offered,
        report.processed,
        report.drops,
        report.throughput,
        report.capacity,
    )
    return report
