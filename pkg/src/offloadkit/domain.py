"""Shared value types for profiling, scoring, partitioning and execution.

Every type is a frozen dataclass with a canonical JSON form produced by
``to_json`` (a plain dict, snake_case keys) and parsed back by ``from_json``.
"""

from __future__ import annotations

import base64
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

NodeId = str

SHARE_SUM_TOLERANCE = 1e-9


class NodeClass(str, Enum):
    MOBILE = "Mobile"
    CLOUDLET = "Cloudlet"
    REMOTE_CLOUD = "RemoteCloud"


class InvalidProfile(ValueError):
    """A NodeProfile violates one of its invariants."""

    def __init__(self, field_name: str, reason: str):
        super().__init__(f"{field_name}: {reason}")
        self.field = field_name
        self.reason = reason


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"), validate=True)


@dataclass(frozen=True)
class NodeProfile:
    node_id: NodeId
    node_class: NodeClass
    benchmark_gflops: float
    cpu_clock_ghz: float
    cpu_cores: int
    memory_gb: float
    battery_level_pct: float | None = None
    charging: bool | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "node_id": self.node_id,
            "class": self.node_class.value,
            "benchmark_gflops": self.benchmark_gflops,
            "cpu_clock_ghz": self.cpu_clock_ghz,
            "cpu_cores": self.cpu_cores,
            "memory_gb": self.memory_gb,
            "battery_level_pct": self.battery_level_pct,
            "charging": self.charging,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> NodeProfile:
        profile = cls(
            node_id=data["node_id"],
            node_class=NodeClass(data["class"]),
            benchmark_gflops=float(data["benchmark_gflops"]),
            cpu_clock_ghz=float(data["cpu_clock_ghz"]),
            cpu_cores=int(data["cpu_cores"]),
            memory_gb=float(data["memory_gb"]),
            battery_level_pct=(
                None if data.get("battery_level_pct") is None
                else float(data["battery_level_pct"])
            ),
            charging=data.get("charging"),
        )
        validate_profile(profile)
        return profile


def _finite_number(value: Any) -> bool:
    return (
        isinstance(value, (int, float))
        and not isinstance(value, bool)
        and math.isfinite(value)
    )


def validate_profile(p: NodeProfile) -> None:
    """Raise InvalidProfile for the first violated invariant of ``p``."""
    if not isinstance(p.node_id, str) or not p.node_id:
        raise InvalidProfile("node_id", "must be a non-empty string")
    if not isinstance(p.node_class, NodeClass):
        raise InvalidProfile("class", f"unknown node class {p.node_class!r}")
    for name in ("benchmark_gflops", "cpu_clock_ghz", "memory_gb"):
        if not _finite_number(getattr(p, name)):
            raise InvalidProfile(name, "must be a finite number")
    if p.benchmark_gflops < 0:
        raise InvalidProfile("benchmark_gflops", "must be >= 0")
    if p.cpu_clock_ghz <= 0:
        raise InvalidProfile("cpu_clock_ghz", "must be > 0")
    if p.memory_gb <= 0:
        raise InvalidProfile("memory_gb", "must be > 0")
    if isinstance(p.cpu_cores, bool) or not isinstance(p.cpu_cores, int) or p.cpu_cores < 1:
        raise InvalidProfile("cpu_cores", "must be an integer >= 1")

    mobile = p.node_class is NodeClass.MOBILE
    if mobile:
        if p.battery_level_pct is None:
            raise InvalidProfile("battery_level_pct", "required for Mobile nodes")
        if not _finite_number(p.battery_level_pct):
            raise InvalidProfile("battery_level_pct", "must be a finite number")
        if not 0 <= p.battery_level_pct <= 100:
            raise InvalidProfile("battery_level_pct", "must lie in [0, 100]")
        if not isinstance(p.charging, bool):
            raise InvalidProfile("charging", "required for Mobile nodes")
    else:
        if p.battery_level_pct is not None:
            raise InvalidProfile("battery_level_pct", f"not allowed for {p.node_class.value}")
        if p.charging is not None:
            raise InvalidProfile("charging", f"not allowed for {p.node_class.value}")


@dataclass(frozen=True)
class LinkModel:
    """One-way latency plus a constant-bandwidth pipe."""

    latency_s: float
    bandwidth_bytes_per_s: float

    def __post_init__(self) -> None:
        if not (_finite_number(self.latency_s) and self.latency_s >= 0):
            raise ValueError(f"latency_s must be finite and >= 0, got {self.latency_s!r}")
        if not (_finite_number(self.bandwidth_bytes_per_s) and self.bandwidth_bytes_per_s > 0):
            raise ValueError(
                f"bandwidth_bytes_per_s must be finite and > 0, got {self.bandwidth_bytes_per_s!r}"
            )

    def to_json(self) -> dict[str, Any]:
        return {"latency_s": self.latency_s, "bandwidth_bytes_per_s": self.bandwidth_bytes_per_s}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> LinkModel:
        return cls(float(data["latency_s"]), float(data["bandwidth_bytes_per_s"]))


@dataclass(frozen=True)
class OffloadingScore:
    node_id: NodeId
    score: float
    eligible: bool

    def to_json(self) -> dict[str, Any]:
        return {"node_id": self.node_id, "score": self.score, "eligible": self.eligible}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> OffloadingScore:
        return cls(data["node_id"], float(data["score"]), bool(data["eligible"]))


@dataclass(frozen=True)
class PartitionPlan:
    """Task share per node, in percent. Insertion order is the chunk order."""

    shares: dict[NodeId, float]

    def __post_init__(self) -> None:
        if not self.shares:
            raise ValueError("a partition plan needs at least one node")
        total = sum(self.shares.values())
        if abs(total - 100.0) > SHARE_SUM_TOLERANCE:
            raise ValueError(f"shares sum to {total!r}, expected 100")
        for node, share in self.shares.items():
            if not 0 <= share <= 100:
                raise ValueError(f"share for {node!r} out of range: {share!r}")
            if share == 0 and len(self.shares) > 1:
                raise ValueError(f"zero share for {node!r}")

    @property
    def nodes(self) -> list[NodeId]:
        return list(self.shares)

    def to_json(self) -> dict[str, Any]:
        return {"shares": dict(self.shares)}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> PartitionPlan:
        return cls({str(k): float(v) for k, v in data["shares"].items()})


@dataclass(frozen=True)
class SearchTask:
    task_id: str
    text: bytes
    pattern: bytes

    def __post_init__(self) -> None:
        if len(self.pattern) < 1:
            raise ValueError("pattern must be at least one byte")

    def to_json(self) -> dict[str, Any]:
        return {"task_id": self.task_id, "text": _b64(self.text), "pattern": _b64(self.pattern)}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> SearchTask:
        return cls(data["task_id"], _unb64(data["text"]), _unb64(data["pattern"]))


@dataclass(frozen=True)
class SubTask:
    task_id: str
    chunk_index: int
    chunk_offset_bytes: int
    chunk: bytes
    pattern: bytes

    def to_json(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "chunk_index": self.chunk_index,
            "chunk_offset_bytes": self.chunk_offset_bytes,
            "chunk": _b64(self.chunk),
            "pattern": _b64(self.pattern),
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> SubTask:
        return cls(
            task_id=data["task_id"],
            chunk_index=int(data["chunk_index"]),
            chunk_offset_bytes=int(data["chunk_offset_bytes"]),
            chunk=_unb64(data["chunk"]),
            pattern=_unb64(data["pattern"]),
        )


class ModeKind(str, Enum):
    LOCAL_ONLY = "LocalOnly"
    FULL_OFFLOAD = "FullOffload"
    PARTIAL_EQUAL = "PartialEqual"
    PARTIAL_ENGINE_SINGLE_SITE = "PartialEngineSingleSite"
    PARTIAL_ENGINE_MULTI_SITE = "PartialEngineMultiSite"


_TARGETED = {ModeKind.FULL_OFFLOAD, ModeKind.PARTIAL_ENGINE_SINGLE_SITE}


@dataclass(frozen=True)
class ExecutionMode:
    kind: ModeKind
    target: NodeId | None = None

    def __post_init__(self) -> None:
        if (self.kind in _TARGETED) != (self.target is not None):
            raise ValueError(f"{self.kind.value} {'requires' if self.kind in _TARGETED else 'takes no'} target")

    @classmethod
    def local_only(cls) -> ExecutionMode:
        return cls(ModeKind.LOCAL_ONLY)

    @classmethod
    def full_offload(cls, target: NodeId) -> ExecutionMode:
        return cls(ModeKind.FULL_OFFLOAD, target)

    @classmethod
    def partial_equal(cls) -> ExecutionMode:
        return cls(ModeKind.PARTIAL_EQUAL)

    @classmethod
    def single_site(cls, target: NodeId) -> ExecutionMode:
        return cls(ModeKind.PARTIAL_ENGINE_SINGLE_SITE, target)

    @classmethod
    def multi_site(cls) -> ExecutionMode:
        return cls(ModeKind.PARTIAL_ENGINE_MULTI_SITE)

    @classmethod
    def parse(cls, text: str) -> ExecutionMode:
        """Parse ``Kind`` or ``Kind:target``, e.g. ``FullOffload:cloudlet``."""
        kind, _, target = text.partition(":")
        return cls(ModeKind(kind.strip()), target.strip() or None)

    def __str__(self) -> str:
        return self.kind.value if self.target is None else f"{self.kind.value}:{self.target}"

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "target": self.target}

    @classmethod
    def from_json(cls, data: Mapping[str, Any] | str) -> ExecutionMode:
        if isinstance(data, str):
            return cls.parse(data)
        return cls(ModeKind(data["kind"]), data.get("target"))


@dataclass(frozen=True)
class NodeRecord:
    node_id: NodeId
    bytes_sent: int = 0
    bytes_received: int = 0
    transfer_out_s: float = 0.0
    compute_s: float = 0.0
    transfer_back_s: float = 0.0
    timed_out: bool = False
    reprocessed_locally: bool = False
    chunk_bytes: int = 0

    @property
    def elapsed_s(self) -> float:
        return self.transfer_out_s + self.compute_s + self.transfer_back_s

    def to_json(self) -> dict[str, Any]:
        return {
            "node_id": self.node_id,
            "bytes_sent": self.bytes_sent,
            "bytes_received": self.bytes_received,
            "transfer_out_s": self.transfer_out_s,
            "compute_s": self.compute_s,
            "transfer_back_s": self.transfer_back_s,
            "timed_out": self.timed_out,
            "reprocessed_locally": self.reprocessed_locally,
            "chunk_bytes": self.chunk_bytes,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> NodeRecord:
        return cls(
            node_id=data["node_id"],
            bytes_sent=int(data["bytes_sent"]),
            bytes_received=int(data["bytes_received"]),
            transfer_out_s=float(data["transfer_out_s"]),
            compute_s=float(data["compute_s"]),
            transfer_back_s=float(data["transfer_back_s"]),
            timed_out=bool(data["timed_out"]),
            reprocessed_locally=bool(data["reprocessed_locally"]),
            chunk_bytes=int(data.get("chunk_bytes", 0)),
        )


@dataclass(frozen=True)
class ExecutionReport:
    mode: ExecutionMode
    records: tuple[NodeRecord, ...]
    total_makespan_s: float
    plan: PartitionPlan | None = None
    matches: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        for rec in self.records:
            if rec.timed_out and not rec.reprocessed_locally:
                raise ValueError(f"{rec.node_id}: timed out but not reprocessed locally")

    @property
    def timeouts(self) -> int:
        return sum(rec.timed_out for rec in self.records)

    def to_json(self) -> dict[str, Any]:
        return {
            "mode": self.mode.to_json(),
            "records": [rec.to_json() for rec in self.records],
            "total_makespan_s": self.total_makespan_s,
            "plan": None if self.plan is None else self.plan.to_json(),
            "matches": list(self.matches),
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> ExecutionReport:
        return cls(
            mode=ExecutionMode.from_json(data["mode"]),
            records=tuple(NodeRecord.from_json(r) for r in data["records"]),
            total_makespan_s=float(data["total_makespan_s"]),
            plan=None if data.get("plan") is None else PartitionPlan.from_json(data["plan"]),
            matches=tuple(int(o) for o in data.get("matches", ())),
        )
