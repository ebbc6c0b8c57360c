from __future__ import annotations

from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from datetime import date, time
from pathlib import Path
from typing import Any
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

import yaml

from .domain import (
    Orientation,
    ResourceDescriptor,
    Room,
    SchoolSenseError,
    SensorKind,
    SiteTopology,
)


class TopologyError(SchoolSenseError):
    pass


def default_resource_id(device: str, sensor: str) -> str:
    return f"{device}.{sensor}"


@dataclass(frozen=True)
class Topology:
    sites: tuple[SiteTopology, ...]

    def resources(self) -> Iterator[ResourceDescriptor]:
        for site in self.sites:
            yield from site.all_resources()

    def site(self, site_id: str) -> SiteTopology:
        for site in self.sites:
            if site.site_id == site_id:
                return site
        raise TopologyError(f"unknown site: {site_id}")

    def site_of(self, resource_id: str) -> SiteTopology:
        for site in self.sites:
            if any(r.resource_id == resource_id for r in site.all_resources()):
                return site
        raise TopologyError(f"resource not placed in any site: {resource_id}")


def _parse_clock(value: Any) -> time:
    if isinstance(value, time):
        return value
    if isinstance(value, int):
        # YAML 1.1 reads unquoted 08:30 as a base-60 integer (510)
        return time(value // 60, value % 60)
    hh, mm = str(value).split(":", 1)
    return time(int(hh), int(mm))


def _parse_date(value: Any) -> date:
    if isinstance(value, date):
        return value
    return date.fromisoformat(str(value))


def _parse_resource(
    raw: Mapping[str, Any], site_id: str, room_id: str | None
) -> ResourceDescriptor:
    try:
        device = str(raw["device"])
        sensor = str(raw["sensor"])
        kind = SensorKind(str(raw["kind"]).lower())
    except KeyError as exc:
        raise TopologyError(f"resource in site {site_id} missing field {exc}") from None
    except ValueError as exc:
        raise TopologyError(str(exc)) from None
    voltage = raw.get("nominal_voltage")
    return ResourceDescriptor(
        resource_id=str(raw.get("resource_id") or default_resource_id(device, sensor)),
        device=device,
        sensor=sensor,
        kind=kind,
        units=str(raw.get("units", "")),
        reporting_period=int(raw.get("reporting_period", 30)),
        site_id=site_id,
        room_id=room_id,
        nominal_voltage=float(voltage) if voltage is not None else None,
    )


def parse_topology(doc: Mapping[str, Any]) -> Topology:
    sites: list[SiteTopology] = []
    seen: set[str] = set()
    for raw_site in doc.get("sites") or []:
        site_id = str(raw_site.get("site_id") or "")
        if not site_id:
            raise TopologyError("site without site_id")
        tz = str(raw_site.get("timezone", "UTC"))
        try:
            ZoneInfo(tz)
        except ZoneInfoNotFoundError:
            raise TopologyError(f"site {site_id}: unknown timezone {tz}") from None
        incorporated = _parse_date(raw_site.get("incorporated", date.today()))
        if incorporated > date.today():
            raise TopologyError(f"site {site_id}: incorporated date lies in the future")
        hours = raw_site.get("school_hours") or ["08:30", "16:30"]
        rooms = tuple(
            Room(
                room_id=str(raw_room["room_id"]),
                orientation=Orientation(str(raw_room.get("orientation", "S")).upper()),
                resources=tuple(
                    _parse_resource(r, site_id, str(raw_room["room_id"]))
                    for r in raw_room.get("resources") or []
                ),
            )
            for raw_room in raw_site.get("rooms") or []
        )
        site = SiteTopology(
            site_id=site_id,
            name=str(raw_site.get("name", site_id)),
            timezone=tz,
            incorporated=incorporated,
            school_hours=(_parse_clock(hours[0]), _parse_clock(hours[1])),
            rooms=rooms,
            resources=tuple(
                _parse_resource(r, site_id, None) for r in raw_site.get("resources") or []
            ),
        )
        for res in site.all_resources():
            if res.resource_id in seen:
                raise TopologyError(f"resource {res.resource_id} appears in more than one place")
            seen.add(res.resource_id)
        sites.append(site)
    return Topology(sites=tuple(sites))


def load_topology(path: str | Path) -> Topology:
    try:
        with open(path, encoding="utf-8") as f:
            doc = yaml.safe_load(f) or {}
    except OSError as exc:
        raise TopologyError(f"cannot read topology {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise TopologyError("topology document must be a mapping with a 'sites' list")
    return parse_topology(doc)


def _resource_doc(res: ResourceDescriptor) -> dict[str, Any]:
    out: dict[str, Any] = {
        "resource_id": res.resource_id,
        "device": res.device,
        "sensor": res.sensor,
        "kind": res.kind.value,
        "units": res.units,
        "reporting_period": res.reporting_period,
    }
    if res.nominal_voltage is not None:
        out["nominal_voltage"] = res.nominal_voltage
    return out


def topology_to_doc(topology: Topology) -> dict[str, Any]:
    return {
        "sites": [
            {
                "site_id": s.site_id,
                "name": s.name,
                "timezone": s.timezone,
                "incorporated": s.incorporated.isoformat(),
                "school_hours": [t.strftime("%H:%M") for t in s.school_hours],
                "resources": [_resource_doc(r) for r in s.resources],
                "rooms": [
                    {
                        "room_id": room.room_id,
                        "orientation": room.orientation.value,
                        "resources": [_resource_doc(r) for r in room.resources],
                    }
                    for room in s.rooms
                ],
            }
            for s in topology.sites
        ]
    }


def dump_topology(topology: Topology, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(topology_to_doc(topology), f, sort_keys=False)
