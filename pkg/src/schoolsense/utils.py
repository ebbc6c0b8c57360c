from __future__ import annotations

import logging
import math
import os
import time
from collections.abc import Callable
from contextlib import contextmanager
from dataclasses import dataclass, fields
from threading import Lock
from typing import Any
from urllib.parse import quote, unquote

import requests

from . import __version__

logger = logging.getLogger(__name__)


def configure_logging(level: str = "INFO") -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )


def folder_name(resource_id: str) -> str:
    """Reversible raw-log folder name for a resource id.

    Ids may carry colons and slashes from device addresses and bus topics; everything outside
    ``[A-Za-z0-9._~-]`` is percent-encoded, as is a leading dot or underscore.
    """
    name = quote(resource_id, safe="")
    if name[:1] in (".", "_"):
        name = f"%{ord(name[0]):02X}{name[1:]}"
    return name


def resource_from_folder(name: str) -> str:
    return unquote(name)


class SourceThrottle:
    """Keeps successive requests of one poll source at least ``min_interval`` seconds apart."""

    def __init__(
        self,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self._clock = clock
        self._sleep = sleep
        self._lock = Lock()
        self._last: dict[str, float] = {}

    def wait(self, source_id: str, min_interval: float) -> float:
        """Block until ``source_id`` may call again; returns the seconds slept."""
        if not source_id or min_interval <= 0:
            return 0.0
        with self._lock:
            due = self._last.get(source_id, -math.inf) + min_interval
            pause = max(0.0, due - self._clock())
            if pause:
                self._sleep(pause)
            self._last[source_id] = self._clock()
        return pause


vendor_throttle = SourceThrottle()


def http_get_json(
    url: str,
    *,
    params: dict[str, Any] | None = None,
    timeout_seconds: int = 30,
    source_name: str | None = None,
    min_interval_seconds: float = 0.0,
) -> dict[str, Any]:
    """GET a vendor endpoint as JSON; a bare list body comes back as ``{"data": [...]}``."""
    if source_name:
        vendor_throttle.wait(source_name, min_interval_seconds)
    headers = {"Accept": "application/json", "User-Agent": f"schoolsense/{__version__}"}
    token = os.environ.get("SCHOOLSENSE_VENDOR_API_KEY")
    if token:
        headers["Authorization"] = f"Bearer {token}"
    resp = requests.get(url, params=params or {}, headers=headers, timeout=timeout_seconds)
    resp.raise_for_status()
    body = resp.json()
    if isinstance(body, list):
        return {"data": body}
    return body if isinstance(body, dict) else {}


@dataclass
class TelemetryCounters:
    received: int = 0
    forwarded: int = 0
    rejected: int = 0
    errors: int = 0

    def as_fields(self) -> str:
        return " ".join(f"{f.name}={getattr(self, f.name)}" for f in fields(self))


@contextmanager
def telemetry_span(name: str, counters: Any | None = None):
    start = time.perf_counter()
    try:
        yield
    finally:
        duration_ms = (time.perf_counter() - start) * 1000
        msg = f"telemetry span name={name} duration_ms={duration_ms:.1f}"
        if counters is not None:
            msg += " " + counters.as_fields()
        logger.info(msg)
