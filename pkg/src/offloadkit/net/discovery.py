"""Node registry: static JSON files and UDP beacon discovery."""

from __future__ import annotations

import json
import socket
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

from offloadkit.domain import InvalidProfile, LinkModel, NodeClass, NodeId, NodeProfile
from offloadkit.net.worker import BEACON_PORT

SIMULATED = "simulated"


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class RegistryEntry:
    node_id: NodeId
    address: str
    node_class: NodeClass
    link: LinkModel | None = None
    profile: NodeProfile | None = None
    local: bool = False
    # fault injection for simulated nodes: extra seconds before the reply
    stall_s: float = 0.0

    @property
    def simulated(self) -> bool:
        return self.address == SIMULATED

    def host_port(self) -> tuple[str, int]:
        host, sep, port = self.address.rpartition(":")
        if not sep or not host:
            raise ValueError(f"{self.node_id}: address {self.address!r} is not host:port")
        return host, int(port)

    def to_json(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "node_id": self.node_id,
            "address": self.address,
            "class": self.node_class.value,
            "link": None if self.link is None else self.link.to_json(),
            "profile": None if self.profile is None else self.profile.to_json(),
        }
        if self.local:
            data["local"] = True
        if self.stall_s:
            data["stall_s"] = self.stall_s
        return data

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> RegistryEntry:
        return cls(
            node_id=data["node_id"],
            address=data.get("address", SIMULATED),
            node_class=NodeClass(data["class"]),
            link=None if data.get("link") is None else LinkModel.from_json(data["link"]),
            profile=None if data.get("profile") is None else NodeProfile.from_json(data["profile"]),
            local=bool(data.get("local", False)),
            stall_s=float(data.get("stall_s", 0.0)),
        )


@dataclass(frozen=True)
class Registry:
    """Known nodes keyed by id, in insertion order; at most one is local."""

    entries: dict[NodeId, RegistryEntry] = field(default_factory=dict)

    def __post_init__(self) -> None:
        addresses: set[str] = set()
        locals_ = []
        for node_id, entry in self.entries.items():
            if node_id != entry.node_id or not node_id:
                raise ValueError(f"registry key {node_id!r} does not match entry {entry.node_id!r}")
            if entry.local:
                locals_.append(node_id)
            if entry.simulated:
                if entry.profile is None:
                    raise ValueError(f"{node_id}: simulated entries need a profile")
                if entry.link is None and not entry.local:
                    raise ValueError(f"{node_id}: simulated entries need a link model")
            else:
                if entry.address in addresses:
                    raise ValueError(f"duplicate address {entry.address!r}")
                addresses.add(entry.address)
            if entry.profile is not None and (
                entry.profile.node_id != node_id or entry.profile.node_class is not entry.node_class
            ):
                raise ValueError(f"{node_id}: profile id/class disagree with the entry")
        if len(locals_) > 1:
            raise ValueError(f"more than one local node: {locals_}")

    @classmethod
    def of(cls, entries: Iterable[RegistryEntry]) -> Registry:
        """Build from entries; a later entry with the same id replaces an earlier one."""
        table: dict[NodeId, RegistryEntry] = {}
        for entry in entries:
            table.pop(entry.node_id, None)
            table[entry.node_id] = entry
        return cls(table)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.entries

    def __getitem__(self, node_id: NodeId) -> RegistryEntry:
        return self.entries[node_id]

    @property
    def local_id(self) -> NodeId | None:
        return next((n for n, e in self.entries.items() if e.local), None)

    def offloadees(self) -> list[RegistryEntry]:
        return [e for e in self.entries.values() if not e.local]

    def merged(self, other: Registry) -> Registry:
        return Registry.of([*self.entries.values(), *other.entries.values()])

    def with_entry(self, node_id: NodeId, **changes: Any) -> Registry:
        entries = dict(self.entries)
        entries[node_id] = replace(entries[node_id], **changes)
        return Registry(entries)

    def to_json(self) -> list[dict[str, Any]]:
        return [e.to_json() for e in self.entries.values()]

    @classmethod
    def from_json(cls, data: Any) -> Registry:
        if not isinstance(data, list):
            raise ParseError("a registry is a JSON array of entries")
        try:
            return cls.of(RegistryEntry.from_json(item) for item in data)
        except (KeyError, TypeError, ValueError, InvalidProfile) as exc:
            raise ParseError(f"bad registry entry: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> Registry:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        return cls.from_json(data)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class BeaconListen:
    window_s: float = 2.0
    port: int = BEACON_PORT
    bind: str = ""


def parse_beacon(datagram: bytes, sender_host: str) -> RegistryEntry:
    data = json.loads(datagram.decode("utf-8"))
    if not isinstance(data, dict) or data.get("type") != "HELLO":
        raise ParseError("beacon is not a HELLO message")
    return RegistryEntry(
        node_id=str(data["node_id"]),
        address=f"{sender_host}:{int(data['port'])}",
        node_class=NodeClass(data["class"]),
    )


def listen_for_beacons(listen: BeaconListen) -> Registry:
    """Collect HELLO beacons for ``listen.window_s``; the last beacon per node wins."""
    found: list[RegistryEntry] = []
    deadline = time.monotonic() + listen.window_s
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((listen.bind, listen.port))
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                break
            sock.settimeout(remaining)
            try:
                datagram, (host, _port) = sock.recvfrom(65535)
            except socket.timeout:
                break
            try:
                found.append(parse_beacon(datagram, host))
            except (ParseError, ValueError, KeyError, UnicodeDecodeError):
                continue
    # beacons from one node may arrive from a changed address; keep the newest
    latest: dict[NodeId, RegistryEntry] = {}
    for entry in found:
        latest.pop(entry.node_id, None)
        latest[entry.node_id] = entry
    by_address: dict[str, RegistryEntry] = {}
    for entry in latest.values():
        by_address.pop(entry.address, None)
        by_address[entry.address] = entry
    return Registry.of(by_address.values())


def discover(source: str | Path | BeaconListen, base: Registry | None = None) -> Registry:
    """Static registry file, or a beacon listen window merged over ``base``."""
    if isinstance(source, BeaconListen):
        heard = listen_for_beacons(source)
        return heard if base is None else base.merged(heard)
    registry = Registry.load(source)
    return registry if base is None else base.merged(registry)
