"""Serve a checkpoint over the policy wire protocol.

Framing, both directions: an 8-byte little-endian payload length, then the
payload. Requests are a JSON header {policy, agent_id, n, h, w, c, dtype}
immediately followed by raw row-major uint8 tensor bytes. Responses are
JSON {x, y, sin_o, cos_o} with coordinates in [-1, 1]; failures are JSON
{error} after which the connection closes.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading

import numpy as np
import torch

from .datasetio import to_input
from .train import load_checkpoint

_LEN_BYTES = 8


class ProtocolError(Exception):
    pass


def read_frame(sock: socket.socket) -> bytes:
    head = _read_exact(sock, _LEN_BYTES)
    return _read_exact(sock, int.from_bytes(head, "little"))


def _read_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(min(1 << 20, n - got))
        if not chunk:
            raise ProtocolError(f"connection closed after {got}/{n} bytes")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def _frame(payload: bytes) -> bytes:
    return len(payload).to_bytes(_LEN_BYTES, "little") + payload


def split_request(payload: bytes) -> tuple[dict, np.ndarray]:
    """Parse the JSON header (scanning to its balanced closing brace) and
    reshape the remaining bytes into the declared tensor."""
    if not payload.startswith(b"{"):
        raise ProtocolError("request does not start with a JSON header")
    depth = 0
    in_str = False
    escape = False
    header = None
    body = b""
    for i, byte in enumerate(payload):
        ch = chr(byte)
        if in_str:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"':
            in_str = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                header = json.loads(payload[: i + 1])
                body = payload[i + 1 :]
                break
    if header is None:
        raise ProtocolError("unterminated JSON header")
    for key in ("policy", "agent_id", "n", "h", "w", "c", "dtype"):
        if key not in header:
            raise ProtocolError(f"header missing {key!r}")
    if header["dtype"] != "u8":
        raise ProtocolError(f"unsupported dtype {header['dtype']!r}")
    shape = (header["n"], header["h"], header["w"], header["c"])
    if len(body) != int(np.prod(shape)):
        raise ProtocolError(f"tensor bytes {len(body)} do not match shape {shape}")
    return header, np.frombuffer(body, dtype=np.uint8).reshape(shape)


class CheckpointPolicy:
    """Deterministic inference wrapper around a loaded checkpoint."""

    def __init__(self, ckpt_dir):
        self.net, self.predictor, self.meta = load_checkpoint(ckpt_dir)
        self.net.eval()
        self.expected_px = int(self.meta["input_px"])
        self.expected_n = int(self.meta["frame_stack"])
        self.downsample = 156 // self.expected_px
        self._lock = threading.Lock()

    def __call__(self, header: dict, tensor: np.ndarray) -> tuple[float, float, float, float]:
        n, h, w, c = tensor.shape
        if n != self.expected_n or c != 4:
            raise ProtocolError(
                f"expected {self.expected_n}x156x156x4 input, got {tensor.shape}"
            )
        if self.downsample > 1:
            tensor = tensor[:, :: self.downsample, :: self.downsample, :]
        if tensor.shape[1] != self.expected_px or tensor.shape[2] != self.expected_px:
            raise ProtocolError(
                f"frame size {h}x{w} does not reduce to {self.expected_px}px"
            )
        frames = torch.from_numpy(to_input(tensor)).unsqueeze(0)
        # model weights are shared state; serialize inference per checkpoint
        with self._lock, torch.no_grad():
            if self.meta["method"] == "pe-n":
                teammate_actions = self.predictor(frames)[:, 1:, :]
                out = self.net(frames, teammate_actions)
            else:
                out = self.net(frames)
        action = out.reshape(-1, 4)[0] if out.dim() == 3 else out[0]
        x, y, sin_o, cos_o = (float(v) for v in action)
        return x, y, sin_o, cos_o


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        self.request.settimeout(30.0)
        while True:
            try:
                payload = read_frame(self.request)
            except (ProtocolError, OSError):
                return
            try:
                header, tensor = split_request(payload)
                if header["policy"] != self.server.policy_name:
                    raise ProtocolError(
                        f"this server serves {self.server.policy_name!r}, "
                        f"not {header['policy']!r}"
                    )
                action = self.server.policy(header, tensor)
            except ProtocolError as exc:
                try:
                    self.request.sendall(_frame(json.dumps({"error": str(exc)}).encode()))
                finally:
                    return  # shape/protocol errors close the connection
            else:
                reply = json.dumps(
                    dict(zip(("x", "y", "sin_o", "cos_o"), action)),
                    separators=(",", ":"),
                ).encode()
                try:
                    self.request.sendall(_frame(reply))
                except OSError:
                    return


class PolicyServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, policy, policy_name: str, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _Handler)
        self.policy = policy
        self.policy_name = policy_name

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


def serve_checkpoint(ckpt_dir, policy_name: str, host: str, port: int) -> PolicyServer:
    return PolicyServer(CheckpointPolicy(ckpt_dir), policy_name, host, port)
