from __future__ import annotations

import logging
import math
import socket
import socketserver
import threading
import time
from collections.abc import Callable
from dataclasses import dataclass
from threading import Lock

from ..directory import Directory, UnknownResource
from ..domain import Reading, SchoolSenseError
from .base import Mapper, ReadingSink

logger = logging.getLogger(__name__)


class MalformedTopic(SchoolSenseError):
    pass


class MalformedPayload(SchoolSenseError):
    pass


@dataclass(frozen=True, slots=True)
class BusMessage:
    topic: str
    payload: str

    def __post_init__(self) -> None:
        if not self.topic:
            raise MalformedTopic("empty topic")


def now_ms() -> int:
    return time.time_ns() // 1_000_000


def parse_bus_message(msg: BusMessage, now: int, directory: Directory) -> Reading:
    """Translate ``<device>/<sensor>`` + ``<value>[@<epoch_ms>]`` into a Reading.

    Unstamped payloads take ``now`` as their timestamp.
    """
    parts = msg.topic.split("/")
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise MalformedTopic(f"topic must be <device>/<sensor>: {msg.topic!r}")
    device, sensor = parts
    text, sep, stamp = msg.payload.strip().partition("@")
    timestamp = now
    if sep:
        try:
            timestamp = int(stamp)
        except ValueError:
            raise MalformedPayload(f"bad timestamp suffix: {msg.payload!r}") from None
        if timestamp <= 0:
            raise MalformedPayload(f"timestamp must be positive: {msg.payload!r}")
    try:
        value = float(text)
    except ValueError:
        raise MalformedPayload(f"not a number: {msg.payload!r}") from None
    if not math.isfinite(value):
        raise MalformedPayload(f"not a finite number: {msg.payload!r}")
    descriptor = directory.resolve(device, sensor)
    return Reading(descriptor.resource_id, device, sensor, value, timestamp)


def format_value(value: float) -> str:
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


def format_bus_message(reading: Reading, stamped: bool = True) -> BusMessage:
    payload = format_value(reading.value)
    if stamped:
        payload = f"{payload}@{reading.timestamp}"
    return BusMessage(f"{reading.device}/{reading.sensor}", payload)


def encode_line(msg: BusMessage) -> str:
    return f"{msg.topic}\t{msg.payload}\n"


def decode_line(line: str) -> BusMessage:
    topic, _, payload = line.rstrip("\r\n").partition("\t")
    return BusMessage(topic, payload)


class InProcessBus:
    """Topic fan-out inside one process; handlers run on the publisher's thread."""

    def __init__(self) -> None:
        self._handlers: list[Callable[[BusMessage], object]] = []
        self._lock = Lock()
        self.published = 0

    def subscribe(self, handler: Callable[[BusMessage], object]) -> None:
        with self._lock:
            self._handlers.append(handler)

    def publish(self, msg: BusMessage) -> None:
        with self._lock:
            handlers = list(self._handlers)
            self.published += 1
        for handler in handlers:
            handler(msg)


class BusMapper(Mapper):
    source_name = "bus"

    def __init__(
        self,
        directory: Directory,
        sink: ReadingSink | None = None,
        clock: Callable[[], int] = now_ms,
    ) -> None:
        super().__init__(directory, sink)
        self.clock = clock
        self._lock = Lock()

    def handle(self, msg: BusMessage) -> Reading | None:
        """Parse and forward one message; rejected messages are counted and logged."""
        with self._lock:
            self.counters.received += 1
            try:
                reading = parse_bus_message(msg, self.clock(), self.directory)
            except (MalformedTopic, MalformedPayload, UnknownResource) as exc:
                self.counters.rejected += 1
                logger.warning(
                    "bus message rejected code=%s topic=%r rejected=%d",
                    exc.code,
                    msg.topic,
                    self.counters.rejected,
                )
                return None
            self.emit(reading)
            return reading

    def handle_line(self, line: str) -> Reading | None:
        try:
            msg = decode_line(line)
        except MalformedTopic as exc:
            with self._lock:
                self.counters.received += 1
                self.counters.rejected += 1
            logger.warning("bus line rejected code=%s", exc.code)
            return None
        return self.handle(msg)


def parse_address(address: str) -> tuple[str, int]:
    host, sep, port = address.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"address must be <host>:<port>: {address!r}")
    return host or "127.0.0.1", int(port)


class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        mapper: BusMapper = self.server.mapper  # type: ignore[attr-defined]
        for raw in self.rfile:
            line = raw.decode("utf-8", errors="replace")
            if line.strip():
                mapper.handle_line(line)


class LineServer(socketserver.ThreadingTCPServer):
    """TCP listener for ``topic<TAB>payload`` lines feeding one BusMapper."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], mapper: BusMapper) -> None:
        super().__init__(address, _LineHandler)
        self.mapper = mapper

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, name="line-server", daemon=True)
        thread.start()
        logger.info("line server listening address=%s:%d", *self.server_address[:2])
        return thread

    def stop(self) -> None:
        self.shutdown()
        self.server_close()


class LineClient:
    """Writes bus messages as lines to a LineServer."""

    def __init__(self, address: str | tuple[str, int], timeout_seconds: float = 10.0) -> None:
        host, port = parse_address(address) if isinstance(address, str) else address
        self._sock = socket.create_connection((host, port), timeout=timeout_seconds)
        self._file = self._sock.makefile("w", encoding="utf-8", newline="\n")
        self.sent = 0

    def send(self, msg: BusMessage) -> None:
        self._file.write(encode_line(msg))
        self.sent += 1

    def send_reading(self, reading: Reading) -> None:
        self.send(format_bus_message(reading))

    def close(self) -> None:
        try:
            self._file.flush()
        finally:
            self._file.close()
            self._sock.close()

    def __enter__(self) -> LineClient:
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()
