from __future__ import annotations

import heapq
import logging
import math
import time
from collections.abc import Callable, Iterable
from dataclasses import dataclass

from .domain import Reading, SchoolSenseError
from .storage import RawLog

logger = logging.getLogger(__name__)


class SinkFailure(SchoolSenseError):
    def __init__(self, message: str, position: int) -> None:
        super().__init__(message)
        self.position = position


@dataclass(frozen=True)
class ReplayReport:
    count: int
    wall_seconds: float
    first_ts: int | None = None
    last_ts: int | None = None


def replay(
    raw_log: RawLog,
    t0: int,
    t1: int,
    speed: float,
    sink: Callable[[Reading], object],
    resources: Iterable[str] | None = None,
    *,
    clock: Callable[[], float] = time.perf_counter,
    sleep: Callable[[float], None] = time.sleep,
) -> ReplayReport:
    """Re-deliver stored readings in [t0, t1) to ``sink`` in timestamp order.

    Gaps between events are scaled by 1/speed; ``math.inf`` delivers as fast as possible.
    Readings sharing a timestamp keep resource-id order, and append order within a resource.
    """
    if not speed > 0:
        raise ValueError(f"speed must be positive or inf: {speed}")
    ids = sorted(resources) if resources is not None else raw_log.resources()
    streams = [raw_log.get_raw(rid, t0, t1) for rid in ids]
    merged = heapq.merge(*streams, key=lambda r: (r.timestamp, r.resource_id))
    started = clock()
    count = 0
    first_ts = last_ts = None
    for reading in merged:
        if first_ts is None:
            first_ts = reading.timestamp
        if not math.isinf(speed):
            due = (reading.timestamp - first_ts) / 1000 / speed
            delay = due - (clock() - started)
            if delay > 0:
                sleep(delay)
        try:
            sink(reading)
        except Exception as exc:  # noqa: BLE001
            logger.error("replay aborted position=%d ts=%d: %s", count, reading.timestamp, exc)
            raise SinkFailure(f"sink failed at position {count}: {exc}", count) from exc
        count += 1
        last_ts = reading.timestamp
    report = ReplayReport(count, clock() - started, first_ts, last_ts)
    logger.info("replay done count=%d wall_seconds=%.3f", report.count, report.wall_seconds)
    return report
