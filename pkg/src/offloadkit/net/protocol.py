"""Length-prefixed JSON frames.

A frame is a 4-byte big-endian unsigned body length followed by a UTF-8
JSON object whose ``"type"`` names a :class:`MessageType`.
"""

from __future__ import annotations

import base64
import json
import socket
import struct
from enum import Enum
from typing import Any, Iterator

MAX_FRAME_BYTES = 64 * 1024 * 1024
HEADER = struct.Struct(">I")


class MessageType(str, Enum):
    HELLO = "HELLO"
    PROFILE_REQUEST = "PROFILE_REQUEST"
    PROFILE_RESPONSE = "PROFILE_RESPONSE"
    BENCH_REQUEST = "BENCH_REQUEST"
    BENCH_RESULT = "BENCH_RESULT"
    PING = "PING"
    PONG = "PONG"
    TASK_ASSIGN = "TASK_ASSIGN"
    TASK_RESULT = "TASK_RESULT"
    ERROR = "ERROR"


REQUIRED_FIELDS: dict[MessageType, tuple[str, ...]] = {
    MessageType.HELLO: ("node_id", "class"),
    MessageType.PROFILE_REQUEST: (),
    MessageType.PROFILE_RESPONSE: ("profile",),
    MessageType.BENCH_REQUEST: ("mandelbrot", "fft"),
    MessageType.BENCH_RESULT: ("mandelbrot", "fft", "benchmark_gflops"),
    MessageType.PING: ("payload",),
    MessageType.PONG: ("payload",),
    MessageType.TASK_ASSIGN: ("task_id", "chunk_index", "chunk_offset_bytes", "pattern", "chunk"),
    MessageType.TASK_RESULT: ("task_id", "chunk_index", "offsets"),
    MessageType.ERROR: ("reason",),
}


class ProtocolError(Exception):
    pass


class FrameTooLarge(ProtocolError):
    pass


class MalformedBody(ProtocolError):
    pass


class TruncatedFrame(ProtocolError):
    pass


def message(kind: MessageType, **fields: Any) -> dict[str, Any]:
    return {"type": kind.value, **fields}


def b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def unb64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"), validate=True)


def message_type(msg: dict[str, Any]) -> MessageType:
    try:
        return MessageType(msg.get("type"))
    except ValueError:
        raise MalformedBody(f"unknown message type {msg.get('type')!r}") from None


def check_fields(msg: dict[str, Any]) -> MessageType:
    """Return the message type, raising MalformedBody if required fields are missing."""
    kind = message_type(msg)
    missing = [name for name in REQUIRED_FIELDS[kind] if name not in msg]
    if missing:
        raise MalformedBody(f"{kind.value} missing {', '.join(missing)}")
    return kind


def encode_frame(msg: dict[str, Any]) -> bytes:
    if not isinstance(msg, dict) or "type" not in msg:
        raise MalformedBody("a message is a JSON object with a 'type' field")
    body = json.dumps(msg, separators=(",", ":"), ensure_ascii=False, allow_nan=False).encode("utf-8")
    if len(body) > MAX_FRAME_BYTES:
        raise FrameTooLarge(f"frame body of {len(body)} bytes exceeds {MAX_FRAME_BYTES}")
    return HEADER.pack(len(body)) + body


def parse_body(body: bytes) -> dict[str, Any]:
    try:
        msg = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedBody(f"body is not UTF-8 JSON: {exc}") from None
    if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
        raise MalformedBody("body must be a JSON object with a string 'type'")
    return msg


def header_length(header: bytes) -> int:
    (length,) = HEADER.unpack(header)
    if length > MAX_FRAME_BYTES:
        raise FrameTooLarge(f"announced frame body of {length} bytes exceeds {MAX_FRAME_BYTES}")
    return length


def decode_frame(data: bytes) -> dict[str, Any]:
    """Decode exactly one complete frame."""
    if len(data) < HEADER.size:
        raise TruncatedFrame(f"need {HEADER.size} header bytes, have {len(data)}")
    length = header_length(data[: HEADER.size])
    end = HEADER.size + length
    if len(data) < end:
        raise TruncatedFrame(f"need {length} body bytes, have {len(data) - HEADER.size}")
    if len(data) > end:
        raise MalformedBody(f"{len(data) - end} trailing bytes after frame")
    return parse_body(data[HEADER.size:end])


class FrameDecoder:
    """Incremental decoder: ``feed`` arbitrary byte slices, iterate whole messages.

    A malformed body raises MalformedBody after it has been consumed, so
    calling ``feed(b"")`` again resumes at the next frame.
    """

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> Iterator[dict[str, Any]]:
        self._buf += data
        while len(self._buf) >= HEADER.size:
            length = header_length(bytes(self._buf[: HEADER.size]))
            end = HEADER.size + length
            if len(self._buf) < end:
                return
            body = bytes(self._buf[HEADER.size:end])
            del self._buf[:end]
            yield parse_body(body)

    @property
    def pending(self) -> int:
        return len(self._buf)


def recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(min(remaining, 1 << 20))
        if not chunk:
            raise TruncatedFrame(f"connection closed with {remaining} of {n} bytes outstanding")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame_bytes(sock: socket.socket) -> bytes | None:
    """Return the next frame body, or None on a clean close between frames."""
    first = sock.recv(HEADER.size)
    if not first:
        return None
    header = first if len(first) == HEADER.size else first + recv_exact(sock, HEADER.size - len(first))
    return recv_exact(sock, header_length(header))


def read_frame(sock: socket.socket) -> dict[str, Any] | None:
    body = read_frame_bytes(sock)
    return None if body is None else parse_body(body)


def write_frame(sock: socket.socket, msg: dict[str, Any]) -> int:
    frame = encode_frame(msg)
    sock.sendall(frame)
    return len(frame)
