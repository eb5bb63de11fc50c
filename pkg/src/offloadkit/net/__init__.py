"""Transports: simulated links, the framed TCP protocol, workers and discovery."""

from offloadkit.net.discovery import BeaconListen, ParseError, Registry, RegistryEntry, discover
from offloadkit.net.endpoints import (
    Endpoint,
    LocalEndpoint,
    RemoteEndpoint,
    SimulatedEndpoint,
    SubtaskOutcome,
    TransportTimeout,
    Unreachable,
)
from offloadkit.net.link import DEFAULT_PROBE_BYTES, simulated_rtt, transfer_time
from offloadkit.net.protocol import (
    FrameTooLarge,
    MalformedBody,
    MessageType,
    TruncatedFrame,
    decode_frame,
    encode_frame,
)
from offloadkit.net.worker import Worker, WorkerConfig, worker_serve


def estimate_rtt(node: Endpoint, probe_bytes: int = DEFAULT_PROBE_BYTES, task_bytes: int = 0):
    return node.estimate_rtt(probe_bytes, task_bytes)


__all__ = [
    "BeaconListen", "DEFAULT_PROBE_BYTES", "Endpoint", "FrameTooLarge", "LocalEndpoint", "MalformedBody",
    "MessageType", "ParseError", "Registry", "RegistryEntry", "RemoteEndpoint", "SimulatedEndpoint",
    "SubtaskOutcome", "TransportTimeout", "TruncatedFrame", "Unreachable", "Worker", "WorkerConfig",
    "decode_frame", "discover", "encode_frame", "estimate_rtt", "simulated_rtt", "transfer_time", "worker_serve",
]
