from .base import Mapper, ReadingSink
from .bus import (
    BusMapper,
    BusMessage,
    InProcessBus,
    LineClient,
    LineServer,
    MalformedPayload,
    MalformedTopic,
    format_bus_message,
    parse_bus_message,
)
from .polling import PollingMapper, PollSource, SourceUnavailable, poll_cycle

__all__ = [
    "Mapper",
    "ReadingSink",
    "BusMapper",
    "BusMessage",
    "InProcessBus",
    "LineClient",
    "LineServer",
    "MalformedPayload",
    "MalformedTopic",
    "format_bus_message",
    "parse_bus_message",
    "PollingMapper",
    "PollSource",
    "SourceUnavailable",
    "poll_cycle",
]
