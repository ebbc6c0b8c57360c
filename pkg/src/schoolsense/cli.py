from __future__ import annotations

import json
import math
import sys
import time
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import date, timedelta
from datetime import time as dtime
from pathlib import Path
from threading import Thread
from typing import Any

import typer
from dotenv import load_dotenv

from .analytics.comfort import school_days, site_comfort
from .analytics.performance import (
    detect_events,
    parse_window,
    temperature_histogram,
    weekend_performance,
)
from .analytics.quality import availability_report, outlier_report
from .analytics.series import Series, local_instant
from .bench import bench, bench_directory
from .config import Settings
from .directory import Directory
from .domain import (
    HOUR_MS,
    Granularity,
    InvalidConfig,
    SchoolSenseError,
    SiteTopology,
    parse_instant,
)
from .engine import Engine
from .fleetsim import FleetConfig, build_fleet
from .ingest import IngestPipeline
from .mappers.bus import BusMapper, LineClient, LineServer, parse_address
from .mappers.polling import PollingMapper, load_sources
from .query import FIELDS, Dispatcher, KeyTable, QueryRequest, QueryService
from .replay import replay as replay_log
from .reports import to_csv, write_csv, write_json
from .storage import RawLog
from .summaries import SummaryStore
from .topology import Topology, dump_topology, load_topology
from .utils import configure_logging

app = typer.Typer(add_completion=False, help="School-building IoT data platform.")
analyze_app = typer.Typer(add_completion=False, help="Data-quality and thermal analyses.")
app.add_typer(analyze_app, name="analyze")

OUTLIER_HEADERS = ("resource_id", "index", "timestamp", "original", "replacement", "fence")
SITE_HEADERS = ("Site", "POS", "Sensors", "Start time", "Outages", "Outliers", "Measurements")
KIND_HEADERS = ("Name", "POS", "Sensors", "Inactive", "Outlier")
MATRIX_HEADERS = ("site_id", "resource_id", "date", "status")
COMFORT_HEADERS = (
    "site_id",
    "room_id",
    "date",
    "score",
    "hours_evaluated",
    "comfortable_hours",
    "flagged",
)
RANKING_HEADERS = ("room_id", "mean_rise_c", "max_rise_c", "weekend_days", "poor")
EVENT_HEADERS = ("resource_id", "time", "direction", "magnitude")
LATENCY_HEADERS = ("aggregation_type", "events", "share", "mean_ms", "median_ms", "p99_ms")


@dataclass
class RunConfig:
    """Resolved options of one CLI invocation, validated before any module starts."""

    command: str
    store_dir: str
    topology_path: str | None = None
    options: dict[str, Any] = field(default_factory=dict)

    def validate(self, require_topology: bool = False) -> RunConfig:
        if require_topology and not self.topology_path:
            raise InvalidConfig("topology required")
        if self.topology_path and not Path(self.topology_path).is_file():
            raise InvalidConfig(f"topology file not found: {self.topology_path}")
        out = self.options.get("out")
        if out and Path(out).suffix.lower() not in (".json", ".csv"):
            raise InvalidConfig(f"report must end in .json or .csv: {out}")
        return self


def _settings() -> Settings:
    load_dotenv()
    settings = Settings.from_env()
    configure_logging(settings.log_level)
    return settings


def _run_config(
    command: str,
    settings: Settings,
    store: str | None,
    topology: str | None,
    require_topology: bool = False,
    **options: Any,
) -> RunConfig:
    cfg = RunConfig(
        command=command,
        store_dir=store or settings.store_dir,
        topology_path=topology or settings.topology_path,
        options=options,
    )
    return cfg.validate(require_topology)


@contextmanager
def _domain_errors() -> Iterator[None]:
    """Turn domain and config errors into one machine-parsable stderr line and exit 1."""
    try:
        yield
    except SchoolSenseError as exc:
        message = str(exc).replace('"', "'")
        typer.echo(f'error code={exc.code} message="{message}"', err=True)
        raise typer.Exit(code=1) from None
    except ValueError as exc:
        message = str(exc).replace('"', "'")
        typer.echo(f'error code=InvalidConfig message="{message}"', err=True)
        raise typer.Exit(code=1) from None


def _day(value: str) -> date:
    return date.fromisoformat(value.strip()[:10])


def _emit(
    rows: Sequence[dict[str, Any]],
    out: str | None,
    headers: Sequence[str],
    payload: Any | None = None,
) -> None:
    """CSV of ``rows`` or JSON of ``payload`` (default: the rows) to ``out``, else stdout."""
    body = payload if payload is not None else rows
    if out and out.lower().endswith(".csv"):
        write_csv(out, rows, headers)
        typer.echo(json.dumps({"report": out, "rows": len(rows)}))
    elif out:
        write_json(out, body)
        typer.echo(json.dumps({"report": out, "rows": len(rows)}))
    else:
        typer.echo(json.dumps(body, indent=2, default=str))


def _topology(cfg: RunConfig) -> Topology:
    return load_topology(cfg.topology_path) if cfg.topology_path else Topology(())


def _directory(cfg: RunConfig, settings: Settings) -> Directory:
    return Directory.from_topology(_topology(cfg), settings.auto_register)


def _site(topology: Topology, site_id: str | None) -> SiteTopology:
    if site_id:
        return topology.site(site_id)
    if len(topology.sites) != 1:
        raise InvalidConfig("--site is required when the topology has several sites")
    return topology.sites[0]


def _series(raw: RawLog, resource_id: str, units: str, t0: int, t1: int) -> Series:
    return Series.from_readings(raw.get_raw(resource_id, t0, t1), resource_id, units)


def _site_sensor(site: SiteTopology, names: Sequence[str]) -> str | None:
    for name in names:
        for res in site.resources:
            if res.sensor == name:
                return res.resource_id
    return None


def _room_temperatures(site: SiteTopology, raw: RawLog, t0: int, t1: int) -> dict[str, Series]:
    rooms = {}
    for room in site.rooms:
        for res in room.resources:
            if res.sensor == "temperature":
                rooms[room.room_id] = _series(raw, res.resource_id, res.units, t0, t1)
                break
    return rooms


def _engine(cfg: RunConfig, settings: Settings, directory: Directory) -> Engine:
    settings.instrument = bool(cfg.options.get("instrument")) or settings.instrument
    return Engine.from_settings(directory, settings, cfg.store_dir)


def _api_server(
    settings: Settings, directory: Directory, engine: Engine, host: str, port: int
) -> Any:
    """Start the HTTP APIs on a daemon thread, fed live by ``engine``."""
    import uvicorn

    from .api import attach_engine, create_app

    store = engine.store if engine.store is not None else SummaryStore.at(settings.store_dir)
    service = QueryService(directory, store, settings.max_query_span_days)
    dispatcher = Dispatcher(directory, settings.subscriber_queue)
    attach_engine(engine, dispatcher, settings.realtime_raw)
    keys = KeyTable.from_yaml(settings.api_keys_path) if settings.api_keys_path else None
    server = uvicorn.Server(
        uvicorn.Config(create_app(service, dispatcher, keys), host=host, port=port)
    )
    Thread(target=server.run, name="api", daemon=True).start()
    typer.echo(f"api on http://{host}:{port}")
    return server


@app.command("ingest")
def cmd_ingest(
    listen: str = typer.Option("127.0.0.1:1883", "--listen", help="host:port for bus lines"),
    topology: str | None = typer.Option(None, "--topology"),
    store: str | None = typer.Option(None, "--store", help="Store directory"),
    duration: float = typer.Option(0.0, "--duration", help="Stop after N seconds (0 = run)"),
    api_port: int = typer.Option(0, "--api-port", help="Also serve the HTTP APIs (0 = off)"),
    api_host: str = typer.Option("127.0.0.1", "--api-host"),
):
    """Accept ``device/sensor<TAB>value[@epoch_ms]`` lines and aggregate them into the store."""
    settings = _settings()
    with _domain_errors():
        cfg = _run_config("ingest", settings, store, topology, listen=listen)
        directory = _directory(cfg, settings)
        engine = _engine(cfg, settings, directory)
        pipeline = IngestPipeline(engine, settings.queue_size).start()
        mapper = BusMapper(directory, pipeline.sink)
        server = LineServer(parse_address(listen), mapper)
        server.start()
        api = _api_server(settings, directory, engine, api_host, api_port) if api_port else None
        typer.echo(f"listening on {server.server_address[0]}:{server.port}")
        try:
            started = time.monotonic()
            while not duration or time.monotonic() - started < duration:
                time.sleep(0.2)
        except KeyboardInterrupt:
            typer.echo("ingest interrupted; shutting down")
        finally:
            if api is not None:
                api.should_exit = True
            server.stop()
            pipeline.stop()
            engine.close()
        typer.echo(json.dumps(vars(mapper.counters)))


@app.command("engine")
def cmd_engine(
    topology: str | None = typer.Option(None, "--topology"),
    store: str | None = typer.Option(None, "--store"),
    instrument: bool = typer.Option(False, "--instrument", help="Record per-event latency"),
    input_file: str = typer.Option("-", "--input", help="Bus lines file ('-' = stdin)"),
):
    """Run the aggregation engine over bus lines read from a file or stdin."""
    settings = _settings()
    with _domain_errors():
        cfg = _run_config(
            "engine", settings, store, topology, require_topology=True, instrument=instrument
        )
        directory = _directory(cfg, settings)
        engine = _engine(cfg, settings, directory)
        stream = sys.stdin if input_file == "-" else open(input_file, encoding="utf-8")
        try:
            with IngestPipeline(engine, settings.queue_size) as pipeline:
                mapper = BusMapper(directory, pipeline.sink)
                for line in stream:
                    if line.strip():
                        mapper.handle_line(line)
        finally:
            if stream is not sys.stdin:
                stream.close()
            engine.close()
        result: dict[str, Any] = {
            "received": mapper.counters.received,
            "rejected": mapper.counters.rejected,
            "submitted": engine.counters.submitted,
            "too_old": engine.counters.too_old,
            "duplicates": engine.counters.duplicates,
            "summaries_written": engine.counters.summaries_written,
        }
        if engine.instrument:
            result["latency"] = {
                kind.value: vars(stats) for kind, stats in engine.latency.report().items()
            }
        typer.echo(json.dumps(result))


@app.command("poll")
def cmd_poll(
    source: str = typer.Option(..., "--source", help="Poll sources YAML"),
    period: int | None = typer.Option(None, "--period", min=1, help="Override poll period (s)"),
    max_cycles: int = typer.Option(0, "--max-cycles", help="Stop after N cycles (0 = forever)"),
    topology: str | None = typer.Option(None, "--topology"),
    store: str | None = typer.Option(None, "--store"),
):
    """Poll vendor HTTP sources on their period and aggregate the new readings."""
    settings = _settings()
    with _domain_errors():
        cfg = _run_config("poll", settings, store, topology, source=source)
        sources = load_sources(source)
        for src in sources:
            if period:
                src.poll_period = period
        directory = _directory(cfg, settings)
        engine = _engine(cfg, settings, directory)
        try:
            with IngestPipeline(engine, settings.queue_size) as pipeline:
                mapper = PollingMapper(directory, sources, sink=pipeline.sink)
                forwarded = mapper.run(max_cycles or None)
        except KeyboardInterrupt:
            typer.echo("poll interrupted; exiting")
            forwarded = mapper.counters.forwarded
        finally:
            engine.close()
        cursors = {s.source_id: s.cursor for s in sources}
        typer.echo(json.dumps({"forwarded": forwarded, "cursors": cursors}))


@app.command("query")
def cmd_query(
    resource: str = typer.Option(..., "--resource"),
    granularity: str = typer.Option("day", "--granularity"),
    t0: str = typer.Option(..., "--from"),
    t1: str = typer.Option(..., "--to"),
    fields: str = typer.Option(",".join(FIELDS), "--fields"),
    as_csv: bool = typer.Option(False, "--csv", help="CSV to stdout (or --out)"),
    out: str | None = typer.Option(None, "--out"),
    topology: str | None = typer.Option(None, "--topology"),
    store: str | None = typer.Option(None, "--store"),
):
    """Historical summaries of one resource over [from, to)."""
    settings = _settings()
    with _domain_errors():
        cfg = _run_config("query", settings, store, topology, True, out=out)
        directory = _directory(cfg, settings)
        service = QueryService(
            directory, SummaryStore.at(cfg.store_dir), settings.max_query_span_days
        )
        q = QueryRequest(
            resource,
            Granularity.from_label(granularity),
            parse_instant(t0),
            parse_instant(t1),
            tuple(f.strip() for f in fields.split(",") if f.strip()),
        )
        rows = service.historical(q).rows()
        headers = ("resource_id", "granularity", "start", "end", *q.fields)
        if as_csv and not out:
            typer.echo(to_csv(rows, headers), nl=False)
            return
        _emit(rows, out, headers)


@analyze_app.command("outliers")
def cmd_outliers(
    resource: str = typer.Option(..., "--resource"),
    t0: str = typer.Option(..., "--from"),
    t1: str = typer.Option(..., "--to"),
    window_hours: float | None = typer.Option(None, "--window-hours"),
    out: str | None = typer.Option(None, "--out"),
    topology: str | None = typer.Option(None, "--topology"),
    store: str | None = typer.Option(None, "--store"),
):
    """Flag IQR outliers of one resource's raw readings."""
    settings = _settings()
    with _domain_errors():
        cfg = _run_config("analyze outliers", settings, store, topology, out=out)
        raw = RawLog(cfg.store_dir)
        series = _series(raw, resource, "", parse_instant(t0), parse_instant(t1))
        window_ms = int((window_hours or settings.outlier_window_hours) * HOUR_MS)
        rows = outlier_report(series, window_ms)
        _emit(rows, out, OUTLIER_HEADERS)


@analyze_app.command("availability")
def cmd_availability(
    t0: str | None = typer.Option(None, "--from", help="First local day (default: incorporation)"),
    t1: str | None = typer.Option(None, "--to", help="Last local day (default: today)"),
    matrix: str | None = typer.Option(None, "--matrix", help="Per sensor-day CSV"),
    kinds: str | None = typer.Option(None, "--kinds", help="Per sensor-kind CSV"),
    out: str | None = typer.Option(None, "--out"),
    topology: str | None = typer.Option(None, "--topology"),
    store: str | None = typer.Option(None, "--store"),
):
    """Outage and outlier percentages per site and per sensor kind."""
    settings = _settings()
    with _domain_errors():
        cfg = _run_config("analyze availability", settings, store, topology, True, out=out)
        window_ms = int(settings.outlier_window_hours * HOUR_MS)
        report = availability_report(
            _topology(cfg),
            RawLog(cfg.store_dir),
            _day(t0) if t0 else None,
            _day(t1) if t1 else None,
            window_ms,
        )
        if matrix:
            write_csv(matrix, report.matrix_rows(), MATRIX_HEADERS)
        if kinds:
            write_csv(kinds, report.kind_rows(), KIND_HEADERS)
        payload = {"sites": report.site_rows(), "kinds": report.kind_rows()}
        _emit(report.site_rows(), out, SITE_HEADERS, payload)


@analyze_app.command("comfort")
def cmd_comfort(
    t0: str = typer.Option(..., "--from", help="First local day"),
    t1: str = typer.Option(..., "--to", help="Last local day"),
    site_id: str | None = typer.Option(None, "--site"),
    acceptability: int | None = typer.Option(None, "--acceptability", help="80 or 90"),
    floor: float | None = typer.Option(None, "--floor", help="Flag room-days scoring below"),
    out: str | None = typer.Option(None, "--out"),
    topology: str | None = typer.Option(None, "--topology"),
    store: str | None = typer.Option(None, "--store"),
):
    """Daily adaptive-comfort score per classroom over school days."""
    settings = _settings()
    with _domain_errors():
        cfg = _run_config("analyze comfort", settings, store, topology, True, out=out)
        site = _site(_topology(cfg), site_id)
        first, last = _day(t0), _day(t1)
        raw = RawLog(cfg.store_dir)
        # the prevailing mean looks back a week
        lo = local_instant(first - timedelta(days=7), dtime(), site.timezone)
        hi = local_instant(last + timedelta(days=1), dtime(), site.timezone)
        rooms = _room_temperatures(site, raw, lo, hi)
        outdoor_id = _site_sensor(site, ("temperature",))
        wind_id = _site_sensor(site, ("wind_speed", "wind"))
        if outdoor_id is None:
            raise InvalidConfig(f"site {site.site_id} has no outdoor temperature sensor")
        outdoor = _series(raw, outdoor_id, "C", lo, hi)
        wind = _series(raw, wind_id, "m/s", lo, hi) if wind_id else None
        result = site_comfort(
            site,
            rooms,
            outdoor,
            wind,
            school_days(first, last),
            acceptability or settings.acceptability,
            floor,
        )
        payload = {
            "site_id": site.site_id,
            "site_mean": result.site_mean,
            "rows": result.rows(),
        }
        _emit(result.rows(), out, COMFORT_HEADERS, payload)


@analyze_app.command("performance")
def cmd_performance(
    t0: str = typer.Option(..., "--from", help="First local day"),
    t1: str = typer.Option(..., "--to", help="Last local day"),
    site_id: str | None = typer.Option(None, "--site"),
    window: str | None = typer.Option(None, "--window", help="Local window, e.g. 06:00-18:00"),
    poor_rise: float | None = typer.Option(None, "--poor-rise", help="°C of mean daily rise"),
    out: str | None = typer.Option(None, "--out"),
    topology: str | None = typer.Option(None, "--topology"),
    store: str | None = typer.Option(None, "--store"),
):
    """Weekend temperature rise of unoccupied classrooms, worst first."""
    settings = _settings()
    with _domain_errors():
        cfg = _run_config("analyze performance", settings, store, topology, True, out=out)
        site = _site(_topology(cfg), site_id)
        first, last = _day(t0), _day(t1)
        raw = RawLog(cfg.store_dir)
        lo = local_instant(first, dtime(), site.timezone)
        hi = local_instant(last + timedelta(days=1), dtime(), site.timezone)
        rooms = _room_temperatures(site, raw, lo, hi)
        outdoor_id = _site_sensor(site, ("temperature",))
        outdoor = _series(raw, outdoor_id, "C", lo, hi) if outdoor_id else None
        report = weekend_performance(
            {k: v for k, v in rooms.items() if not v.is_empty},
            site,
            outdoor,
            first,
            last,
            parse_window(window or settings.weekend_window),
            poor_rise if poor_rise is not None else settings.poor_rise_c,
            int(settings.gapfill_window_hours * HOUR_MS),
        )
        ranking = [r.row() for r in report.ranking]
        payload = {
            "site_id": site.site_id,
            "poor": report.poor_performers,
            "ranking": ranking,
            "days": [d.row() for d in report.days],
            "histograms": {
                room: temperature_histogram(s) for room, s in rooms.items() if not s.is_empty
            },
        }
        _emit(ranking, out, RANKING_HEADERS, payload)


@analyze_app.command("events")
def cmd_events(
    resource: str = typer.Option(..., "--resource"),
    t0: str = typer.Option(..., "--from"),
    t1: str = typer.Option(..., "--to"),
    threshold: float | None = typer.Option(None, "--threshold", help="°C"),
    span: int | None = typer.Option(None, "--span", help="Minutes"),
    out: str | None = typer.Option(None, "--out"),
    topology: str | None = typer.Option(None, "--topology"),
    store: str | None = typer.Option(None, "--store"),
):
    """Sudden temperature rises and drops (doors, windows, heating) of one resource."""
    settings = _settings()
    with _domain_errors():
        cfg = _run_config("analyze events", settings, store, topology, out=out)
        raw = RawLog(cfg.store_dir)
        series = _series(raw, resource, "C", parse_instant(t0), parse_instant(t1))
        events = detect_events(
            series,
            threshold if threshold is not None else settings.event_threshold_c,
            span or settings.event_span_min,
        )
        rows = [{"resource_id": resource, **e.row()} for e in events]
        _emit(rows, out, EVENT_HEADERS)


def _is_address(sink: str) -> bool:
    if "/" in sink or "\\" in sink or Path(sink).exists():
        return False
    try:
        parse_address(sink)
    except ValueError:
        return False
    return True


@app.command("simulate")
def cmd_simulate(
    config: str | None = typer.Option(None, "--config", help="Fleet config YAML"),
    seed: int | None = typer.Option(None, "--seed"),
    sink: str = typer.Option(..., "--sink", help="host:port of a listener, or a store directory"),
    days: int | None = typer.Option(None, "--days"),
):
    """Generate a synthetic school fleet and deliver its readings."""
    settings = _settings()
    with _domain_errors():
        cfg = FleetConfig.from_yaml(config) if config else FleetConfig()
        if seed is not None:
            cfg.seed = seed
        if days is not None:
            cfg.days = days
        cfg.validate()
        fleet = build_fleet(cfg)
        sent = 0
        if _is_address(sink):
            with LineClient(sink) as client:
                for msg in fleet.messages():
                    client.send(msg)
                    sent += 1
            typer.echo(json.dumps({"sent": sent, "expected": fleet.truth.expected_total}))
            return
        root = Path(sink)
        root.mkdir(parents=True, exist_ok=True)
        dump_topology(fleet.topology, root / "topology.yaml")
        directory = Directory.from_topology(fleet.topology)
        settings.flush_every = max(settings.flush_every, 1000)
        engine = Engine.from_settings(directory, settings, root)
        try:
            with IngestPipeline(engine, settings.queue_size) as pipeline:
                mapper = BusMapper(directory, pipeline.sink)
                for msg in fleet.messages():
                    mapper.handle(msg)
                    sent += 1
        finally:
            engine.close()
        truth = {
            "seed": cfg.seed,
            "expected_messages": fleet.truth.expected_total,
            "loss_calendar": {
                rid: sorted(d.isoformat() for d in days_lost)
                for rid, days_lost in sorted(fleet.truth.loss_calendar.items())
            },
            "outliers": {rid: sorted(ts) for rid, ts in sorted(fleet.truth.outliers.items())},
        }
        write_json(root / "ground_truth.json", truth)
        typer.echo(
            json.dumps(
                {"sent": sent, "expected": fleet.truth.expected_total, "store": str(root)}
            )
        )


@app.command("bench")
def cmd_bench(
    rate: float = typer.Option(500.0, "--rate", help="Readings per second"),
    duration: float = typer.Option(60.0, "--duration", help="Seconds"),
    per_type: int = typer.Option(10, "--resources-per-type", min=1),
    store: str | None = typer.Option(None, "--store", help="Write summaries here as well"),
    seed: int = typer.Option(0, "--seed"),
    out: str | None = typer.Option(None, "--out", help="Report file (.json or .csv)"),
):
    """Drive one engine worker at a fixed rate and report throughput and latency per type."""
    settings = _settings()
    with _domain_errors():
        _run_config("bench", settings, store, None, out=out)
        directory = bench_directory(per_type)
        if store:
            engine = Engine(
                directory,
                SummaryStore.at(store),
                RawLog(store, registered=directory),
                retention_slots=settings.retention_slots,
                nominal_voltage=settings.nominal_voltage,
                flush_every=settings.flush_every,
                instrument=True,
            )
        else:
            engine = Engine(directory, instrument=True, nominal_voltage=settings.nominal_voltage)
        try:
            report = bench(rate, duration, engine, queue_size=settings.queue_size, seed=seed)
        finally:
            engine.close()
        _emit(report.latency_rows(), out, LATENCY_HEADERS, report.as_dict())


@app.command("replay")
def cmd_replay(
    t0: str = typer.Option(..., "--from"),
    t1: str = typer.Option(..., "--to"),
    speed: str = typer.Option("max", "--speed", help="Multiplier, or 'max'"),
    sink: str | None = typer.Option(None, "--sink", help="host:port of a listener"),
    into: str | None = typer.Option(None, "--into", help="Fresh store to re-aggregate into"),
    topology: str | None = typer.Option(None, "--topology"),
    store: str | None = typer.Option(None, "--store", help="Store holding the raw log"),
):
    """Re-deliver stored raw readings in timestamp order."""
    settings = _settings()
    with _domain_errors():
        cfg = _run_config("replay", settings, store, topology, sink=sink, into=into)
        if bool(sink) == bool(into):
            raise InvalidConfig("exactly one of --sink and --into is required")
        factor = math.inf if speed.strip().lower() in ("max", "inf") else float(speed)
        raw = RawLog(cfg.store_dir)
        lo, hi = parse_instant(t0), parse_instant(t1)
        if sink:
            with LineClient(sink) as client:
                report = replay_log(raw, lo, hi, factor, client.send_reading)
        else:
            directory = _directory(cfg, settings)
            engine = Engine.from_settings(directory, settings, into)
            try:
                report = replay_log(raw, lo, hi, factor, engine.submit)
            finally:
                engine.close()
        typer.echo(json.dumps(vars(report)))


@app.command("export")
def cmd_export(
    out: str = typer.Option(..., "--out", help="JSON lines file"),
    store: str | None = typer.Option(None, "--store"),
):
    """Dump every stored summary as sorted JSON lines."""
    settings = _settings()
    with _domain_errors():
        cfg = _run_config("export", settings, store, None)
        summaries = SummaryStore.at(cfg.store_dir)
        try:
            n = summaries.export_jsonl(out)
        finally:
            summaries.close()
        typer.echo(json.dumps({"exported": n, "out": out}))


@app.command("serve")
def cmd_serve(
    host: str = typer.Option("127.0.0.1", "--host"),
    port: int = typer.Option(8000, "--port"),
):
    """Serve the Directory, Historical and Real-time APIs over HTTP."""
    import uvicorn

    _settings()
    uvicorn.run("schoolsense.api:app", host=host, port=port)


if __name__ == "__main__":
    app()
