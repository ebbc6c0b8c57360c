from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass

from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from .domain import Reading, SchoolSenseError
from .engine import Engine, TooOld
from .utils import TelemetryCounters

logger = logging.getLogger(__name__)

_STOP = object()


class Backpressure(SchoolSenseError):
    pass


@dataclass(frozen=True)
class Ack:
    resource_id: str
    timestamp: int
    sequence: int


class SubmissionQueue:
    """Bounded FIFO between mappers and the engine worker; full means Backpressure."""

    def __init__(self, maxsize: int = 10000) -> None:
        self._queue: queue.Queue[object] = queue.Queue(maxsize=maxsize)
        self._lock = threading.Lock()
        self.accepted = 0
        self.rejected = 0

    def offer(self, r: Reading) -> Ack:
        with self._lock:
            try:
                self._queue.put_nowait(r)
            except queue.Full:
                self.rejected += 1
                raise Backpressure(f"submission queue full ({self._queue.maxsize})") from None
            self.accepted += 1
            return Ack(r.resource_id, r.timestamp, self.accepted)

    def take(self, timeout: float | None = None) -> object:
        return self._queue.get(timeout=timeout)

    def task_done(self) -> None:
        self._queue.task_done()

    def join(self) -> None:
        self._queue.join()

    def close(self) -> None:
        self._queue.put(_STOP)

    def __len__(self) -> int:
        return self._queue.qsize()


def forward(r: Reading, sink: SubmissionQueue) -> Ack:
    return sink.offer(r)


@retry(
    retry=retry_if_exception_type(Backpressure),
    wait=wait_exponential(multiplier=0.005, max=0.5),
    stop=stop_after_attempt(8),
    reraise=True,
)
def forward_with_retry(r: Reading, sink: SubmissionQueue) -> Ack:
    return forward(r, sink)


class EngineWorker:
    """Single consumer thread draining a SubmissionQueue into the engine."""

    def __init__(self, submissions: SubmissionQueue, engine: Engine) -> None:
        self.submissions = submissions
        self.engine = engine
        self.counters = TelemetryCounters()
        self._thread: threading.Thread | None = None

    def start(self) -> EngineWorker:
        self._thread = threading.Thread(target=self._run, name="engine-worker", daemon=True)
        self._thread.start()
        return self

    def _run(self) -> None:
        while True:
            item = self.submissions.take()
            try:
                if item is _STOP:
                    return
                self.counters.received += 1
                try:
                    self.engine.submit(item)  # type: ignore[arg-type]
                    self.counters.forwarded += 1
                except TooOld:
                    self.counters.rejected += 1
                except SchoolSenseError as exc:
                    self.counters.errors += 1
                    logger.warning("engine submit failed code=%s: %s", exc.code, exc)
            finally:
                self.submissions.task_done()

    def drain(self) -> None:
        self.submissions.join()

    def stop(self) -> None:
        if self._thread is None:
            return
        self.submissions.close()
        self._thread.join()
        self._thread = None
        logger.info("engine worker stopped %s", self.counters.as_fields())


class IngestPipeline:
    """Mappers -> bounded queue -> one engine worker."""

    def __init__(self, engine: Engine, queue_size: int = 10000) -> None:
        self.engine = engine
        self.submissions = SubmissionQueue(queue_size)
        self.worker = EngineWorker(self.submissions, engine)

    def sink(self, r: Reading) -> Ack:
        return forward_with_retry(r, self.submissions)

    def start(self) -> IngestPipeline:
        self.worker.start()
        return self

    def drain(self) -> None:
        self.worker.drain()

    def stop(self) -> None:
        self.worker.drain()
        self.worker.stop()
        self.engine.flush()

    def __enter__(self) -> IngestPipeline:
        return self.start()

    def __exit__(self, *exc_info: object) -> None:
        self.stop()
