from __future__ import annotations

from collections.abc import Callable

from ..directory import Directory
from ..domain import Reading
from ..utils import TelemetryCounters

ReadingSink = Callable[[Reading], object]


class Mapper:
    """Translation proxy from one external data source to internal Readings.

    Each mapper is internally sequential: readings it emits for one resource keep the order
    in which the source produced them.
    """

    source_name: str = "mapper"

    def __init__(self, directory: Directory, sink: ReadingSink | None = None) -> None:
        self.directory = directory
        self.sink = sink
        self.counters = TelemetryCounters()

    def emit(self, reading: Reading) -> None:
        if self.sink is not None:
            self.sink(reading)
        self.counters.forwarded += 1
