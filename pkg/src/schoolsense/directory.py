from __future__ import annotations

import logging
from threading import Lock

from .config import Settings
from .domain import ResourceDescriptor, SchoolSenseError, SensorKind
from .topology import Topology, default_resource_id, load_topology

logger = logging.getLogger(__name__)


class UnknownResource(SchoolSenseError):
    pass


class DuplicateResource(SchoolSenseError):
    pass


class Directory:
    """Registry of sensing endpoints, resolvable by (device, sensor) or by resource id."""

    def __init__(self, auto_register: bool = False) -> None:
        self.auto_register = auto_register
        self._lock = Lock()
        self._by_pair: dict[tuple[str, str], ResourceDescriptor] = {}
        self._by_id: dict[str, ResourceDescriptor] = {}

    @classmethod
    def from_topology(cls, topology: Topology, auto_register: bool = False) -> Directory:
        directory = cls(auto_register=auto_register)
        for res in topology.resources():
            directory.register(res)
        return directory

    def register(self, descriptor: ResourceDescriptor) -> str:
        pair = (descriptor.device, descriptor.sensor)
        with self._lock:
            if pair in self._by_pair or descriptor.resource_id in self._by_id:
                raise DuplicateResource(
                    f"{descriptor.device}/{descriptor.sensor} already registered"
                )
            self._by_pair[pair] = descriptor
            self._by_id[descriptor.resource_id] = descriptor
        return descriptor.resource_id

    def resolve(self, device: str, sensor: str) -> ResourceDescriptor:
        found = self._by_pair.get((device, sensor))
        if found is not None:
            return found
        if not self.auto_register:
            raise UnknownResource(f"{device}/{sensor} is not registered")
        descriptor = ResourceDescriptor(
            resource_id=default_resource_id(device, sensor),
            device=device,
            sensor=sensor,
            kind=SensorKind.ENVIRONMENTAL,
        )
        try:
            self.register(descriptor)
        except DuplicateResource:
            # another mapper registered it between the lookup and the lock
            return self._by_pair[(device, sensor)]
        logger.info("auto-registered resource_id=%s", descriptor.resource_id)
        return descriptor

    def get(self, resource_id: str) -> ResourceDescriptor:
        try:
            return self._by_id[resource_id]
        except KeyError:
            raise UnknownResource(f"unknown resource {resource_id}") from None

    def __contains__(self, resource_id: object) -> bool:
        return resource_id in self._by_id

    def __len__(self) -> int:
        return len(self._by_id)

    def list_resources(self, site_id: str | None = None) -> list[ResourceDescriptor]:
        with self._lock:
            items = list(self._by_id.values())
        if site_id is not None:
            items = [r for r in items if r.site_id == site_id]
        return sorted(items, key=lambda r: r.resource_id)


def directory_from_settings(settings: Settings) -> Directory:
    if settings.topology_path:
        topology = load_topology(settings.topology_path)
        return Directory.from_topology(topology, settings.auto_register)
    return Directory(auto_register=settings.auto_register)
