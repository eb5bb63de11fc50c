"""Random well-formed protocol messages for codec fuzzing."""

from __future__ import annotations

import base64
import random
import string

from offloadkit.net.protocol import REQUIRED_FIELDS, MessageType


def _text(rng: random.Random, limit: int = 12) -> str:
    alphabet = string.ascii_letters + string.digits + " -_:é漢\n\"\\"
    return "".join(rng.choice(alphabet) for _ in range(rng.randint(0, limit)))


def _b64(rng: random.Random, limit: int = 64) -> str:
    return base64.b64encode(rng.randbytes(rng.randint(0, limit))).decode("ascii")


def _scalar(rng: random.Random):
    pick = rng.randrange(5)
    if pick == 0:
        return rng.randint(-2**53, 2**53)
    if pick == 1:
        return rng.uniform(-1e9, 1e9)
    if pick == 2:
        return rng.choice([True, False, None])
    if pick == 3:
        return _text(rng)
    return [rng.randint(0, 10**6) for _ in range(rng.randint(0, 5))]


def _value(rng: random.Random, field: str):
    if field in ("payload", "chunk", "pattern"):
        return _b64(rng)
    if field in ("chunk_index", "chunk_offset_bytes"):
        return rng.randint(0, 10**9)
    if field == "offsets":
        return sorted(rng.sample(range(10**6), rng.randint(0, 20)))
    if field in ("profile", "mandelbrot", "fft"):
        return {_text(rng, 6): _scalar(rng) for _ in range(rng.randint(0, 5))}
    if field == "benchmark_gflops":
        return rng.uniform(0, 100)
    return _text(rng)


def random_message(rng: random.Random, kind: MessageType | None = None) -> dict:
    kind = kind or rng.choice(list(MessageType))
    msg = {"type": kind.value}
    for field in REQUIRED_FIELDS[kind]:
        msg[field] = _value(rng, field)
    for _ in range(rng.randint(0, 2)):
        msg.setdefault("x_" + _text(rng, 5), _scalar(rng))
    return msg
