from __future__ import annotations

import sys
from datetime import date
from pathlib import Path

import pytest


def _ensure_src_on_path() -> None:
    repo_root = Path(__file__).resolve().parents[1]
    src_path = repo_root / "src"
    if str(src_path) not in sys.path:
        sys.path.insert(0, str(src_path))


_ensure_src_on_path()

from schoolsense.directory import Directory  # noqa: E402
from schoolsense.topology import Topology, parse_topology  # noqa: E402

SITE_DOC = {
    "sites": [
        {
            "site_id": "site-a",
            "name": "School A",
            "timezone": "Europe/Athens",
            "incorporated": date(2017, 9, 1),
            "school_hours": ["08:30", "16:30"],
            "resources": [
                {"device": "WX", "sensor": "temperature", "kind": "weather", "units": "C"},
                {"device": "WX", "sensor": "wind_speed", "kind": "weather", "units": "m/s"},
                {"device": "WX", "sensor": "rain", "kind": "weather", "units": "mm"},
                {"device": "M1", "sensor": "current", "kind": "power", "units": "A"},
            ],
            "rooms": [
                {
                    "room_id": "R1",
                    "orientation": "S",
                    "resources": [
                        {"device": "R1", "sensor": "temperature", "kind": "environmental"},
                        {"device": "R1", "sensor": "humidity", "kind": "environmental"},
                    ],
                },
                {
                    "room_id": "R2",
                    "orientation": "N",
                    "resources": [
                        {"device": "R2", "sensor": "temperature", "kind": "environmental"},
                    ],
                },
            ],
        }
    ]
}


@pytest.fixture
def topology() -> Topology:
    return parse_topology(SITE_DOC)


@pytest.fixture
def directory(topology: Topology) -> Directory:
    return Directory.from_topology(topology)
