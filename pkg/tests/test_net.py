import json
import random
import socket
import threading
import time

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fuzz import random_message
from offloadkit.domain import LinkModel, NodeClass, SubTask
from offloadkit.harness.testbed import node_profiles, simulated_testbed
from offloadkit.net import estimate_rtt
from offloadkit.net.discovery import BeaconListen, ParseError, Registry, discover, parse_beacon
from offloadkit.net.endpoints import (
    LocalEndpoint,
    RemoteEndpoint,
    RemoteError,
    SimulatedEndpoint,
    Unreachable,
)
from offloadkit.net.link import simulated_rtt, transfer_time
from offloadkit.net.protocol import (
    HEADER,
    MAX_FRAME_BYTES,
    FrameDecoder,
    FrameTooLarge,
    MalformedBody,
    MessageType,
    TruncatedFrame,
    decode_frame,
    encode_frame,
    message,
    read_frame,
    write_frame,
)
from offloadkit.net.worker import Worker, WorkerConfig
from offloadkit.profiler import WorkloadSpec

CLOUDLET = node_profiles()["cloudlet"]


@pytest.fixture
def worker():
    with Worker(WorkerConfig(CLOUDLET)) as w:
        yield w


def remote(w, timeout_s=5.0):
    host, port = w.address
    return RemoteEndpoint("cloudlet", NodeClass.CLOUDLET, host, port, timeout_s)


def free_port(kind=socket.SOCK_STREAM):
    with socket.socket(socket.AF_INET, kind) as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


# links

def test_transfer_time_examples():
    assert transfer_time(0, LinkModel(0.05, 1e6)) == pytest.approx(0.05)
    assert transfer_time(1_000_000, LinkModel(0.0, 1e6)) == pytest.approx(1.0)
    assert transfer_time(6_000_000, LinkModel(0.02, 3e6)) == pytest.approx(2.02)


@given(st.integers(0, 10**9), st.integers(0, 10**9), st.floats(0, 1), st.floats(1, 1e9))
def test_transfer_time_monotone(a, b, latency, bandwidth):
    lo, hi = sorted((a, b))
    link = LinkModel(latency, bandwidth)
    assert transfer_time(lo, link) <= transfer_time(hi, link)
    assert transfer_time(lo, LinkModel(latency, bandwidth * 2)) <= transfer_time(lo, link)
    assert transfer_time(lo, link) <= transfer_time(lo, LinkModel(latency + 0.1, bandwidth))


def test_simulated_rtt_examples():
    link = LinkModel(0.05, 1e6)
    assert simulated_rtt(link, probe_bytes=0, task_bytes=10**6) == pytest.approx(1.1)
    assert simulated_rtt(link, probe_bytes=0) == pytest.approx(0.1)


def test_estimate_rtt_surface_is_shared():
    sim = SimulatedEndpoint(CLOUDLET, LinkModel(0.05, 1e6))
    est = estimate_rtt(sim, 0, 10**6)
    assert est.node_id == "cloudlet" and est.rtt_s == pytest.approx(1.1)
    assert LocalEndpoint(CLOUDLET).estimate_rtt().rtt_s == 0.0
    for name in ("get_profile", "estimate_rtt", "benchmark", "run_subtask"):
        assert callable(getattr(RemoteEndpoint, name))
        assert callable(getattr(SimulatedEndpoint, name))


# codec

def test_empty_ping_frame():
    msg = message(MessageType.PING, payload="")
    frame = encode_frame(msg)
    assert HEADER.unpack(frame[:4])[0] == len(frame) - 4
    assert decode_frame(frame) == msg


def test_oversized_body_is_rejected():
    with pytest.raises(FrameTooLarge):
        decode_frame(HEADER.pack(MAX_FRAME_BYTES + 1))
    with pytest.raises(FrameTooLarge):
        encode_frame({"type": "PING", "payload": "A" * MAX_FRAME_BYTES})


def test_truncated_and_trailing_frames():
    frame = encode_frame(message(MessageType.PING, payload="QUJD"))
    with pytest.raises(TruncatedFrame):
        decode_frame(frame[:2])
    with pytest.raises(TruncatedFrame):
        decode_frame(frame[:-1])
    with pytest.raises(MalformedBody):
        decode_frame(frame + b"\x00")


def test_malformed_bodies():
    for body in (b"{not json", b"[1,2]", b'{"type": 3}', b"\xff\xfe"):
        with pytest.raises(MalformedBody):
            decode_frame(HEADER.pack(len(body)) + body)


@given(st.integers(0, 2**32 - 1), st.integers(1, 40))
def test_codec_roundtrip_fuzz(seed, pieces):
    rng = random.Random(seed)
    msgs = [random_message(rng) for _ in range(3)]
    for msg in msgs:
        assert decode_frame(encode_frame(msg)) == msg
    # incremental decoding over arbitrary cut points
    stream = b"".join(encode_frame(m) for m in msgs)
    cuts = sorted(rng.sample(range(len(stream) + 1), min(pieces, len(stream) + 1)))
    decoder = FrameDecoder()
    out = []
    prev = 0
    for cut in cuts + [len(stream)]:
        out.extend(decoder.feed(stream[prev:cut]))
        prev = cut
    assert out == msgs
    assert decoder.pending == 0


def test_every_type_roundtrips():
    rng = random.Random(7)
    for kind in MessageType:
        msg = random_message(rng, kind)
        assert decode_frame(encode_frame(msg)) == msg


# worker

def test_loopback_profile(worker):
    assert remote(worker).get_profile() == CLOUDLET


def test_loopback_bench(worker):
    man, fft = remote(worker).benchmark(WorkloadSpec.mandelbrot(16, 16, 16, runs=1),
                                        WorkloadSpec.fft(64, runs=1))
    assert man.gflops > 0 and fft.gflops > 0
    assert fft.flops == 5 * 64 * 6


def test_loopback_ping(worker):
    payload = bytes(range(256)) * 4
    assert remote(worker).ping(payload) == payload


def test_loopback_task(worker):
    sub = SubTask("t1", 0, 0, b"abcab", b"ab")
    outcome = remote(worker).run_subtask(sub)
    assert outcome.matches.offsets == (0, 3)
    assert outcome.bytes_received > 0 and outcome.bytes_sent > 0


def test_loopback_hello(worker):
    reply = remote(worker).hello()
    assert reply["node_id"] == "cloudlet"
    assert reply["class"] == "Cloudlet"


def test_malformed_json_keeps_connection(worker):
    with socket.create_connection(worker.address, timeout=5) as sock:
        bad = b"{oops"
        sock.sendall(HEADER.pack(len(bad)) + bad)
        reply = read_frame(sock)
        assert reply["type"] == "ERROR" and reply["reason"]
        write_frame(sock, message(MessageType.PING, payload="QUJD"))
        assert read_frame(sock) == message(MessageType.PONG, payload="QUJD")


def test_unknown_and_incomplete_requests_get_error(worker):
    with socket.create_connection(worker.address, timeout=5) as sock:
        for bad in ({"type": "NOPE"}, {"type": "TASK_ASSIGN"}, {"type": "PONG", "payload": ""}):
            write_frame(sock, bad)
            assert read_frame(sock)["type"] == "ERROR"
    with pytest.raises(RemoteError):
        remote(worker).request(message(MessageType.PING, payload="***"), MessageType.PONG)


def test_oversized_announcement_gets_error_then_close(worker):
    with socket.create_connection(worker.address, timeout=5) as sock:
        sock.sendall(HEADER.pack(MAX_FRAME_BYTES + 1))
        assert read_frame(sock)["type"] == "ERROR"
        assert read_frame(sock) is None


def test_worker_is_deterministic(worker):
    frame = encode_frame(message(MessageType.TASK_ASSIGN, **SubTask("t", 2, 10, b"abababa", b"aba").to_json()))
    replies = []
    for _ in range(2):
        with socket.create_connection(worker.address, timeout=5) as sock:
            sock.sendall(frame)
            replies.append(read_frame(sock))
    assert replies[0] == replies[1]
    assert replies[0]["offsets"] == [0, 2, 4]


def test_loopback_rtt_estimate(worker):
    est = remote(worker).estimate_rtt(probe_bytes=1024, task_bytes=10_000)
    assert est.node_id == "cloudlet"
    assert 0 < est.rtt_s < 1


def test_unreachable_address():
    port = free_port()
    with pytest.raises(Unreachable):
        RemoteEndpoint("gone", NodeClass.CLOUDLET, "127.0.0.1", port, 1.0).get_profile()


# discovery

def test_static_registry_of_testbed(tmp_path):
    path = tmp_path / "registry.json"
    simulated_testbed().dump(path)
    registry = discover(path)
    assert len(registry) == 6
    assert registry.local_id == "mobile-small"
    assert registry["cloud-medium"].profile.memory_gb == 7.5


def test_malformed_registry(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{")
    with pytest.raises(ParseError):
        discover(path)
    path.write_text(json.dumps([{"node_id": "x"}]))
    with pytest.raises(ParseError):
        discover(path)


def test_empty_beacon_window():
    registry = discover(BeaconListen(window_s=0.2, port=free_port(socket.SOCK_DGRAM), bind="127.0.0.1"))
    assert len(registry) == 0


def send_beacons(port, bodies, delay=0.05):
    def run():
        time.sleep(delay)
        with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as s:
            for body in bodies:
                s.sendto(body, ("127.0.0.1", port))
    thread = threading.Thread(target=run, daemon=True)
    thread.start()
    return thread


def test_duplicate_beacons_last_wins():
    port = free_port(socket.SOCK_DGRAM)
    bodies = [json.dumps({"type": "HELLO", "node_id": "w", "class": "Cloudlet", "port": p}).encode()
              for p in (9001, 9002)] + [b"garbage"]
    thread = send_beacons(port, bodies)
    registry = discover(BeaconListen(window_s=0.5, port=port, bind="127.0.0.1"))
    thread.join()
    assert len(registry) == 1
    assert registry["w"].address == "127.0.0.1:9002"


def test_worker_beacon_is_heard():
    port = free_port(socket.SOCK_DGRAM)
    cfg = WorkerConfig(CLOUDLET, beacon=True, beacon_address="127.0.0.1", beacon_port=port,
                       beacon_interval_s=0.05)
    with Worker(cfg) as w:
        registry = discover(BeaconListen(window_s=0.4, port=port, bind="127.0.0.1"))
    assert registry["cloudlet"].address == w.address_text
    assert registry["cloudlet"].node_class is NodeClass.CLOUDLET


def test_beacons_merge_over_base():
    base = simulated_testbed()
    heard = Registry.of([parse_beacon(b'{"type":"HELLO","node_id":"extra","class":"Cloudlet","port":1}',
                                      "10.0.0.9")])
    merged = base.merged(heard)
    assert len(merged) == 7
    assert merged["extra"].address == "10.0.0.9:1"


def test_parse_beacon_rejects_non_hello():
    with pytest.raises(ParseError):
        parse_beacon(b'{"type":"PING"}', "h")
