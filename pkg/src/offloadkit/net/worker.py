"""Worker daemon: the offloadee side of the wire protocol."""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading
import time
from collections import Counter
from dataclasses import dataclass
from typing import Any

from offloadkit.domain import NodeProfile
from offloadkit.net.protocol import (
    FrameTooLarge,
    MalformedBody,
    MessageType,
    ProtocolError,
    check_fields,
    message,
    parse_body,
    read_frame_bytes,
    unb64,
    write_frame,
)
from offloadkit.profiler import WorkloadSpec, WorkloadKind, benchmark_score, local_runner
from offloadkit.workload import kmp_search

log = logging.getLogger(__name__)

BEACON_PORT = 47474


@dataclass
class WorkerConfig:
    profile: NodeProfile
    host: str = "127.0.0.1"
    port: int = 0
    beacon: bool = False
    beacon_address: str = "<broadcast>"
    beacon_port: int = BEACON_PORT
    beacon_interval_s: float = 1.0
    # fault injection: delay before every TASK_RESULT
    task_delay_s: float = 0.0


class _Handler(socketserver.BaseRequestHandler):
    server: _Server

    def handle(self) -> None:
        sock: socket.socket = self.request
        worker = self.server.worker
        while not worker.stopping.is_set():
            try:
                body = read_frame_bytes(sock)
            except FrameTooLarge as exc:
                # the stream cannot be resynchronised past an unread body
                self._send(sock, message(MessageType.ERROR, reason=str(exc)))
                return
            except (ProtocolError, OSError):
                return
            if body is None:
                return
            try:
                reply = worker.dispatch(parse_body(body))
            except (MalformedBody, KeyError, ValueError, TypeError) as exc:
                reply = message(MessageType.ERROR, reason=f"{type(exc).__name__}: {exc}")
            if not self._send(sock, reply):
                return

    def _send(self, sock: socket.socket, reply: dict[str, Any]) -> bool:
        worker = self.server.worker
        try:
            write_frame(sock, reply)
        except OSError:
            worker.count(f"undelivered:{reply['type']}")
            return False
        worker.count(reply["type"])
        return True


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True
    worker: Worker


class Worker:
    """Serves PROFILE, BENCH, PING and TASK_ASSIGN requests over TCP.

    Each connection runs on its own thread and handles one request at a
    time; benchmark runs are serialised across the whole daemon.
    """

    def __init__(self, config: WorkerConfig):
        self.config = config
        self.stopping = threading.Event()
        self.sent: Counter[str] = Counter()
        self._count_lock = threading.Lock()
        self._server = _Server((config.host, config.port), _Handler)
        self._server.worker = self
        self._threads: list[threading.Thread] = []

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return host, port

    @property
    def address_text(self) -> str:
        host, port = self.address
        return f"{host}:{port}"

    def count(self, key: str) -> None:
        with self._count_lock:
            self.sent[key] += 1

    def dispatch(self, msg: dict[str, Any]) -> dict[str, Any]:
        kind = check_fields(msg)
        profile = self.config.profile
        if kind is MessageType.HELLO:
            return message(MessageType.HELLO, node_id=profile.node_id,
                           **{"class": profile.node_class.value}, port=self.address[1])
        if kind is MessageType.PROFILE_REQUEST:
            return message(MessageType.PROFILE_RESPONSE, profile=profile.to_json())
        if kind is MessageType.PING:
            unb64(msg["payload"])
            return message(MessageType.PONG, payload=msg["payload"])
        if kind is MessageType.BENCH_REQUEST:
            man_spec = WorkloadSpec.from_json(msg["mandelbrot"])
            fft_spec = WorkloadSpec.from_json(msg["fft"])
            if man_spec.kind is not WorkloadKind.MANDELBROT or fft_spec.kind is not WorkloadKind.FFT:
                raise MalformedBody("BENCH_REQUEST needs a Mandelbrot and an Fft spec")
            man, fft = local_runner(man_spec, fft_spec)
            return message(MessageType.BENCH_RESULT, mandelbrot=man.to_json(), fft=fft.to_json(),
                           benchmark_gflops=benchmark_score(man, fft))
        if kind is MessageType.TASK_ASSIGN:
            chunk = unb64(msg["chunk"])
            pattern = unb64(msg["pattern"])
            matches = kmp_search(chunk, pattern)
            if self.config.task_delay_s > 0:
                time.sleep(self.config.task_delay_s)
            return message(MessageType.TASK_RESULT, task_id=msg["task_id"],
                           chunk_index=int(msg["chunk_index"]), offsets=list(matches.offsets))
        raise MalformedBody(f"{kind.value} is not a request")

    def beacon_body(self) -> bytes:
        profile = self.config.profile
        return json.dumps(message(MessageType.HELLO, node_id=profile.node_id,
                                  **{"class": profile.node_class.value},
                                  port=self.address[1])).encode("utf-8")

    def _beacon_loop(self) -> None:
        cfg = self.config
        with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_BROADCAST, 1)
            while not self.stopping.is_set():
                try:
                    sock.sendto(self.beacon_body(), (cfg.beacon_address, cfg.beacon_port))
                except OSError as exc:
                    log.debug("beacon send failed: %s", exc)
                self.stopping.wait(cfg.beacon_interval_s)

    def start(self) -> Worker:
        """Serve from background threads; returns immediately."""
        self._spawn(lambda: self._server.serve_forever(poll_interval=0.05), "serve")
        if self.config.beacon:
            self._spawn(self._beacon_loop, "beacon")
        return self

    def _spawn(self, target, name: str) -> None:
        thread = threading.Thread(target=target, name=f"worker-{name}", daemon=True)
        thread.start()
        self._threads.append(thread)

    def stop(self) -> None:
        self.stopping.set()
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> Worker:
        return self.start()

    def __exit__(self, *exc: object) -> None:
        self.stop()


def worker_serve(config: WorkerConfig) -> None:
    """Run a worker in the foreground until interrupted."""
    worker = Worker(config)
    log.info("worker %s listening on %s", config.profile.node_id, worker.address_text)
    if config.beacon:
        worker._spawn(worker._beacon_loop, "beacon")
    try:
        worker._server.serve_forever()
    finally:
        worker.stopping.set()
        worker._server.server_close()
