import os
from dataclasses import dataclass


def _flag(name: str, default: str = "0") -> bool:
    return os.environ.get(name, default) == "1"


@dataclass
class Settings:
    store_dir: str = "./data/store"
    topology_path: str | None = None
    api_keys_path: str | None = None
    # Engine
    nominal_voltage: float = 230.0
    retention_slots: int = 48
    queue_size: int = 10000
    flush_every: int = 1  # 1 = write-through
    instrument: bool = False
    # Ingest / query
    auto_register: bool = False
    realtime_raw: bool = False
    subscriber_queue: int = 1000
    max_query_span_days: int = 1830
    poll_period_seconds: int = 300
    # Analytics
    outlier_window_hours: float = 24.0
    gapfill_window_hours: float = 24.0
    acceptability: int = 80  # 80|90
    weekend_window: str = "06:00-18:00"
    poor_rise_c: float = 8.0
    event_threshold_c: float = 2.0
    event_span_min: int = 15
    log_level: str = "INFO"

    @classmethod
    def from_env(cls) -> "Settings":
        return cls(
            store_dir=os.environ.get("SCHOOLSENSE_STORE", "./data/store"),
            topology_path=os.environ.get("SCHOOLSENSE_TOPOLOGY") or None,
            api_keys_path=os.environ.get("SCHOOLSENSE_API_KEYS") or None,
            nominal_voltage=float(os.environ.get("SCHOOLSENSE_NOMINAL_VOLTAGE", "230")),
            retention_slots=int(os.environ.get("SCHOOLSENSE_RETENTION_SLOTS", "48")),
            queue_size=int(os.environ.get("SCHOOLSENSE_QUEUE_SIZE", "10000")),
            flush_every=int(os.environ.get("SCHOOLSENSE_FLUSH_EVERY", "1")),
            instrument=_flag("SCHOOLSENSE_INSTRUMENT"),
            auto_register=_flag("SCHOOLSENSE_AUTO_REGISTER"),
            realtime_raw=_flag("SCHOOLSENSE_REALTIME_RAW"),
            subscriber_queue=int(os.environ.get("SCHOOLSENSE_SUBSCRIBER_QUEUE", "1000")),
            max_query_span_days=int(os.environ.get("SCHOOLSENSE_MAX_QUERY_SPAN_DAYS", "1830")),
            poll_period_seconds=int(os.environ.get("SCHOOLSENSE_POLL_PERIOD", "300")),
            outlier_window_hours=float(os.environ.get("SCHOOLSENSE_OUTLIER_WINDOW_HOURS", "24")),
            gapfill_window_hours=float(os.environ.get("SCHOOLSENSE_GAPFILL_WINDOW_HOURS", "24")),
            acceptability=int(os.environ.get("SCHOOLSENSE_ACCEPTABILITY", "80")),
            weekend_window=os.environ.get("SCHOOLSENSE_WEEKEND_WINDOW", "06:00-18:00"),
            poor_rise_c=float(os.environ.get("SCHOOLSENSE_POOR_RISE_C", "8.0")),
            event_threshold_c=float(os.environ.get("SCHOOLSENSE_EVENT_THRESHOLD_C", "2.0")),
            event_span_min=int(os.environ.get("SCHOOLSENSE_EVENT_SPAN_MIN", "15")),
            log_level=os.environ.get("SCHOOLSENSE_LOG_LEVEL", "INFO"),
        )
