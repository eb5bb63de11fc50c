"""Node endpoints with a common surface for simulated, local and TCP nodes.

The orchestrator only calls ``get_profile``, ``estimate_rtt``, ``benchmark``
and ``run_subtask``; the three implementations differ in where the timing
numbers come from.
"""

from __future__ import annotations

import os
import socket
import statistics
import time
from dataclasses import dataclass
from typing import Any, Protocol

from offloadkit.decision import RttEstimate
from offloadkit.domain import LinkModel, NodeClass, NodeId, NodeProfile, SubTask
from offloadkit.net.link import DEFAULT_PROBE_BYTES, simulated_rtt, transfer_time
from offloadkit.net.protocol import (
    HEADER,
    MessageType,
    ProtocolError,
    header_length,
    recv_exact,
    b64,
    check_fields,
    encode_frame,
    message,
    parse_body,
    read_frame,
    unb64,
    write_frame,
)
from offloadkit.profiler import WorkloadResult, WorkloadSpec, local_runner, simulated_runner
from offloadkit.workload import MatchSet, kmp_search

RESULT_BYTES_PER_MATCH = 16
DEFAULT_TIMEOUT_S = 5.0
PING_ROUNDS = 3


class Unreachable(ConnectionError):
    pass


class TransportTimeout(TimeoutError):
    pass


class RemoteError(RuntimeError):
    """The peer answered with an ERROR frame."""


def simulated_compute_s(nbytes: int, cost_per_byte: float, gflops: float) -> float:
    if gflops <= 0:
        raise ValueError("simulated compute needs benchmark_gflops > 0")
    return nbytes * cost_per_byte / (gflops * 1e9)


@dataclass(frozen=True)
class SubtaskOutcome:
    matches: MatchSet
    bytes_sent: int = 0
    bytes_received: int = 0
    transfer_out_s: float = 0.0
    compute_s: float = 0.0
    transfer_back_s: float = 0.0

    @property
    def elapsed_s(self) -> float:
        return self.transfer_out_s + self.compute_s + self.transfer_back_s


class Endpoint(Protocol):
    node_id: NodeId
    node_class: NodeClass
    simulated: bool

    def get_profile(self) -> NodeProfile: ...

    def estimate_rtt(self, probe_bytes: int = DEFAULT_PROBE_BYTES, task_bytes: int = 0) -> RttEstimate: ...

    def benchmark(self, man_spec: WorkloadSpec, fft_spec: WorkloadSpec) -> tuple[WorkloadResult, WorkloadResult]: ...

    def run_subtask(self, subtask: SubTask, timeout_s: float | None = None) -> SubtaskOutcome: ...


class LocalEndpoint:
    """The offloader itself. Compute time is measured, or modelled when ``simulated``."""

    def __init__(self, profile: NodeProfile, cost_per_byte: float = 100.0, simulated: bool = False):
        self.profile = profile
        self.node_id = profile.node_id
        self.node_class = profile.node_class
        self.cost_per_byte = cost_per_byte
        self.simulated = simulated

    def get_profile(self) -> NodeProfile:
        return self.profile

    def estimate_rtt(self, probe_bytes: int = DEFAULT_PROBE_BYTES, task_bytes: int = 0) -> RttEstimate:
        return RttEstimate(self.node_id, 0.0)

    def benchmark(self, man_spec, fft_spec):
        if self.simulated:
            return simulated_runner(self.profile.benchmark_gflops)(man_spec, fft_spec)
        return local_runner(man_spec, fft_spec)

    def compute_time(self, nbytes: int) -> float:
        return simulated_compute_s(nbytes, self.cost_per_byte, self.profile.benchmark_gflops)

    def run_subtask(self, subtask: SubTask, timeout_s: float | None = None) -> SubtaskOutcome:
        start = time.perf_counter()
        matches = kmp_search(subtask.chunk, subtask.pattern)
        elapsed = time.perf_counter() - start
        compute = self.compute_time(len(subtask.chunk)) if self.simulated else elapsed
        return SubtaskOutcome(matches, compute_s=compute)


class SimulatedEndpoint:
    """A remote node described by a profile and a link model.

    The search really runs (in this process) so results are exact; all
    reported times come from the link and compute models. ``stall_s`` adds
    a fixed delay before the reply, for fault-injection scenarios.
    """

    simulated = True

    def __init__(self, profile: NodeProfile, link: LinkModel, cost_per_byte: float = 100.0, stall_s: float = 0.0):
        self.profile = profile
        self.node_id = profile.node_id
        self.node_class = profile.node_class
        self.link = link
        self.cost_per_byte = cost_per_byte
        self.stall_s = stall_s

    def get_profile(self) -> NodeProfile:
        return self.profile

    def estimate_rtt(self, probe_bytes: int = DEFAULT_PROBE_BYTES, task_bytes: int = 0) -> RttEstimate:
        return RttEstimate(self.node_id, simulated_rtt(self.link, probe_bytes, task_bytes))

    def benchmark(self, man_spec, fft_spec):
        return simulated_runner(self.profile.benchmark_gflops)(man_spec, fft_spec)

    def run_subtask(self, subtask: SubTask, timeout_s: float | None = None) -> SubtaskOutcome:
        matches = kmp_search(subtask.chunk, subtask.pattern)
        sent = len(subtask.chunk)
        received = RESULT_BYTES_PER_MATCH * len(matches)
        return SubtaskOutcome(
            matches,
            bytes_sent=sent,
            bytes_received=received,
            transfer_out_s=transfer_time(sent, self.link),
            compute_s=simulated_compute_s(sent, self.cost_per_byte, self.profile.benchmark_gflops) + self.stall_s,
            transfer_back_s=transfer_time(received, self.link),
        )


class RemoteEndpoint:
    """A worker daemon reached over TCP; one connection per request stream."""

    simulated = False

    def __init__(self, node_id: NodeId, node_class: NodeClass, host: str, port: int,
                 timeout_s: float = DEFAULT_TIMEOUT_S):
        self.node_id = node_id
        self.node_class = node_class
        self.host = host
        self.port = port
        self.timeout_s = timeout_s

    def _connect(self, timeout_s: float | None = None) -> socket.socket:
        try:
            sock = socket.create_connection((self.host, self.port), timeout=timeout_s or self.timeout_s)
        except socket.timeout as exc:
            raise TransportTimeout(f"{self.node_id}: connect to {self.host}:{self.port} timed out") from exc
        except OSError as exc:
            raise Unreachable(f"{self.node_id}: cannot reach {self.host}:{self.port}: {exc}") from exc
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return sock

    def _exchange(self, sock: socket.socket, msg: dict[str, Any], expect: MessageType) -> dict[str, Any]:
        try:
            write_frame(sock, msg)
            reply = read_frame(sock)
        except socket.timeout as exc:
            raise TransportTimeout(f"{self.node_id}: no reply to {msg['type']}") from exc
        except (ProtocolError, OSError) as exc:
            raise Unreachable(f"{self.node_id}: {exc}") from exc
        return self._check(reply, expect)

    def _check(self, reply: dict[str, Any] | None, expect: MessageType) -> dict[str, Any]:
        if reply is None:
            raise Unreachable(f"{self.node_id}: connection closed")
        kind = check_fields(reply)
        if kind is MessageType.ERROR:
            raise RemoteError(f"{self.node_id}: {reply['reason']}")
        if kind is not expect:
            raise ProtocolError(f"{self.node_id}: expected {expect.value}, got {kind.value}")
        return reply

    def request(self, msg: dict[str, Any], expect: MessageType, timeout_s: float | None = None) -> dict[str, Any]:
        with self._connect(timeout_s) as sock:
            return self._exchange(sock, msg, expect)

    def hello(self) -> dict[str, Any]:
        return self.request(message(MessageType.HELLO, node_id="", **{"class": ""}), MessageType.HELLO)

    def get_profile(self) -> NodeProfile:
        reply = self.request(message(MessageType.PROFILE_REQUEST), MessageType.PROFILE_RESPONSE)
        return NodeProfile.from_json(reply["profile"])

    def benchmark(self, man_spec: WorkloadSpec, fft_spec: WorkloadSpec,
                  timeout_s: float | None = None) -> tuple[WorkloadResult, WorkloadResult]:
        reply = self.request(
            message(MessageType.BENCH_REQUEST, mandelbrot=man_spec.to_json(), fft=fft_spec.to_json()),
            MessageType.BENCH_RESULT,
            timeout_s,
        )
        return WorkloadResult.from_json(reply["mandelbrot"]), WorkloadResult.from_json(reply["fft"])

    def ping(self, payload: bytes = b"") -> bytes:
        reply = self.request(message(MessageType.PING, payload=b64(payload)), MessageType.PONG)
        return unb64(reply["payload"])

    def estimate_rtt(self, probe_bytes: int = DEFAULT_PROBE_BYTES, task_bytes: int = 0) -> RttEstimate:
        """Median of three PING round trips, plus ``task_bytes`` at the throughput they imply."""
        msg = message(MessageType.PING, payload=b64(os.urandom(probe_bytes)))
        wire_bytes = 2 * len(encode_frame(msg))
        samples = []
        with self._connect() as sock:
            for _ in range(PING_ROUNDS):
                start = time.perf_counter()
                self._exchange(sock, msg, MessageType.PONG)
                samples.append(time.perf_counter() - start)
        rtt = statistics.median(samples)
        throughput = wire_bytes / max(rtt, 1e-9)
        return RttEstimate(self.node_id, rtt + task_bytes / throughput)

    def run_subtask(self, subtask: SubTask, timeout_s: float | None = None) -> SubtaskOutcome:
        """Ship one chunk and wait for its matches.

        ``compute_s`` is the wait between finishing the send and the first
        reply byte, so it includes one network latency.
        """
        frame = encode_frame(message(MessageType.TASK_ASSIGN, **subtask.to_json()))
        with self._connect(timeout_s) as sock:
            try:
                t0 = time.perf_counter()
                sock.sendall(frame)
                t1 = time.perf_counter()
                header = recv_exact(sock, HEADER.size)
                t2 = time.perf_counter()
                body = recv_exact(sock, header_length(header))
                t3 = time.perf_counter()
            except socket.timeout as exc:
                raise TransportTimeout(f"{self.node_id}: chunk {subtask.chunk_index} not returned") from exc
            except (ProtocolError, OSError) as exc:
                raise Unreachable(f"{self.node_id}: {exc}") from exc
        reply = self._check(parse_body(body), MessageType.TASK_RESULT)
        if reply["task_id"] != subtask.task_id or int(reply["chunk_index"]) != subtask.chunk_index:
            raise ProtocolError(f"{self.node_id}: reply for a different subtask")
        return SubtaskOutcome(
            MatchSet(tuple(int(o) for o in reply["offsets"])),
            bytes_sent=len(frame),
            bytes_received=HEADER.size + len(body),
            transfer_out_s=t1 - t0,
            compute_s=t2 - t1,
            transfer_back_s=t3 - t2,
        )
