"""Checkpoint serving over the length-prefixed socket protocol, exercised
with raw sockets so the wire format itself is what's under test."""

import json
import socket
import struct

import numpy as np
import pytest

from seekertrain import TrainConfig, save_checkpoint, train_il
from seekertrain.serve import CheckpointPolicy, ProtocolError, serve_checkpoint

from helpers import TINY


@pytest.fixture(scope="module")
def ckpt(tmp_path_factory):
    out = tmp_path_factory.mktemp("ckpt") / "il"
    cfg = TrainConfig(
        horizon=1, batch_size=8, epochs=1, steps_per_epoch=4, lr=1e-3, preset="desk", seed=0
    )
    net, meta = train_il(TINY, cfg)
    save_checkpoint(out, "il", cfg, net, meta)
    return out


@pytest.fixture(scope="module")
def server(ckpt):
    srv = serve_checkpoint(ckpt, "il", "127.0.0.1", 0)
    srv.start_background()
    yield srv
    srv.shutdown()
    srv.server_close()


def _send(sock: socket.socket, payload: bytes) -> None:
    sock.sendall(struct.pack("<Q", len(payload)) + payload)


def _recv(sock: socket.socket) -> bytes:
    raw = b""
    while len(raw) < 8:
        chunk = sock.recv(8 - len(raw))
        if not chunk:
            return b""
        raw += chunk
    n = struct.unpack("<Q", raw)[0]
    out = b""
    while len(out) < n:
        chunk = sock.recv(n - len(out))
        if not chunk:
            return b""
        out += chunk
    return out


def _request(policy="il", n=5, h=156, w=156, c=4, seed=9):
    header = json.dumps(
        {"policy": policy, "agent_id": 0, "n": n, "h": h, "w": w, "c": c, "dtype": "u8"}
    ).encode()
    rng = np.random.default_rng(seed)
    body = rng.integers(0, 256, size=n * h * w * c, dtype=np.uint8).tobytes()
    return header + body


def _connect(server) -> socket.socket:
    host, port = server.server_address[:2]
    sock = socket.create_connection((host, port), timeout=10)
    return sock


def test_round_trip_returns_bounded_action(server):
    with _connect(server) as sock:
        _send(sock, _request())
        reply = json.loads(_recv(sock))
    assert set(reply) == {"x", "y", "sin_o", "cos_o"}
    for v in reply.values():
        assert -1.0 <= v <= 1.0


def test_identical_requests_get_identical_bytes(server):
    with _connect(server) as sock:
        _send(sock, _request(seed=3))
        first = _recv(sock)
        _send(sock, _request(seed=3))
        second = _recv(sock)
    assert first == second
    # and across separate connections
    with _connect(server) as sock:
        _send(sock, _request(seed=3))
        third = _recv(sock)
    assert third == first


def test_fresh_server_from_same_checkpoint_agrees(ckpt, server):
    with _connect(server) as sock:
        _send(sock, _request(seed=4))
        baseline = _recv(sock)
    other = serve_checkpoint(ckpt, "il", "127.0.0.1", 0)
    other.start_background()
    try:
        with _connect(other) as sock:
            _send(sock, _request(seed=4))
            reloaded = _recv(sock)
    finally:
        other.shutdown()
        other.server_close()
    assert reloaded == baseline


def test_wrong_frame_count_is_error_then_close(server):
    with _connect(server) as sock:
        _send(sock, _request(n=3))
        reply = json.loads(_recv(sock))
        assert "error" in reply
        # server hangs up after a protocol error
        assert _recv(sock) == b"" or sock.recv(1) == b""


def test_wrong_policy_name_is_error(server):
    with _connect(server) as sock:
        _send(sock, _request(policy="pe-h"))
        reply = json.loads(_recv(sock))
    assert "error" in reply
    assert "il" in reply["error"]


def test_byte_count_mismatch_is_error(server):
    header = json.dumps(
        {"policy": "il", "agent_id": 0, "n": 5, "h": 156, "w": 156, "c": 4, "dtype": "u8"}
    ).encode()
    with _connect(server) as sock:
        _send(sock, header + b"\x00" * 17)
        reply = json.loads(_recv(sock))
    assert "error" in reply


def test_unparseable_header_is_error(server):
    with _connect(server) as sock:
        _send(sock, b"not json at all")
        reply = json.loads(_recv(sock))
    assert "error" in reply


def test_policy_rejects_bad_dtype(server):
    header = json.dumps(
        {"policy": "il", "agent_id": 0, "n": 5, "h": 156, "w": 156, "c": 4, "dtype": "f32"}
    ).encode()
    with _connect(server) as sock:
        _send(sock, header + b"\x00" * (5 * 156 * 156 * 4))
        reply = json.loads(_recv(sock))
    assert "error" in reply


def test_checkpoint_policy_downsamples_to_preset(ckpt):
    policy = CheckpointPolicy(ckpt)
    assert policy.expected_px == 78
    assert policy.downsample == 2
    tensor = np.zeros((5, 156, 156, 4), dtype=np.uint8)
    action = policy({}, tensor)
    assert len(action) == 4
    with pytest.raises(ProtocolError):
        policy({}, np.zeros((5, 100, 100, 4), dtype=np.uint8))
