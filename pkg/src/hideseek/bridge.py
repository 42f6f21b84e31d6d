"""Wire protocol for serving seeker policies over TCP and binding them
into episodes.

Framing, both directions: an 8-byte little-endian unsigned payload length,
then the payload. A request payload is a JSON header object immediately
followed by raw row-major uint8 tensor bytes; the header carries
{policy, agent_id, n, h, w, c, dtype}. A response payload is a JSON object
{x, y, sin_o, cos_o} with coordinates normalized to [-1, 1].
"""

from __future__ import annotations

import json
import math
import socket
import socketserver
import threading
from dataclasses import dataclass

import numpy as np

from .episode import PolicyError
from .world import Waypoint, parse_setting

DEFAULT_DEADLINE_MS = 100.0
_LEN_BYTES = 8

KIND_HEURISTIC_SEEKER = "HeuristicSeeker"
KIND_HEURISTIC_HIDER = "HeuristicHider"
KIND_REMOTE = "Remote"


class BridgeError(PolicyError):
    """Base for bridge failures; episodes abort on these."""


class BridgeTimeout(BridgeError):
    pass


class MalformedFrame(BridgeError):
    pass


class ShapeMismatch(BridgeError):
    pass


def encode_request(policy: str, agent_id: int, tensor: np.ndarray) -> bytes:
    if tensor.dtype != np.uint8 or tensor.ndim != 4:
        raise ShapeMismatch(f"expected NxHxWxC uint8 tensor, got {tensor.dtype} {tensor.shape}")
    n, h, w, c = tensor.shape
    header = json.dumps(
        {"policy": policy, "agent_id": agent_id, "n": n, "h": h, "w": w, "c": c, "dtype": "u8"},
        separators=(",", ":"),
    ).encode()
    body = tensor.tobytes(order="C")
    payload = header + body
    return len(payload).to_bytes(_LEN_BYTES, "little") + payload


def _split_header(payload: bytes) -> tuple[dict, bytes]:
    """Split a payload into its leading JSON object and the remainder by
    scanning for the balanced closing brace."""
    if not payload.startswith(b"{"):
        raise MalformedFrame("payload does not start with a JSON header")
    depth = 0
    in_str = False
    escape = False
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
                try:
                    header = json.loads(payload[: i + 1])
                except json.JSONDecodeError as exc:
                    raise MalformedFrame(f"bad header JSON: {exc}") from exc
                return header, payload[i + 1 :]
    raise MalformedFrame("unterminated JSON header")


def decode_request(payload: bytes) -> tuple[dict, np.ndarray]:
    header, body = _split_header(payload)
    for key in ("policy", "agent_id", "n", "h", "w", "c", "dtype"):
        if key not in header:
            raise MalformedFrame(f"header missing {key!r}")
    if header["dtype"] != "u8":
        raise MalformedFrame(f"unsupported dtype {header['dtype']!r}")
    shape = (header["n"], header["h"], header["w"], header["c"])
    expected = int(np.prod(shape))
    if len(body) != expected:
        raise ShapeMismatch(f"tensor bytes {len(body)} != {expected} for shape {shape}")
    tensor = np.frombuffer(body, dtype=np.uint8).reshape(shape)
    return header, tensor


def encode_response(x: float, y: float, sin_o: float, cos_o: float) -> bytes:
    payload = json.dumps(
        {"x": x, "y": y, "sin_o": sin_o, "cos_o": cos_o}, separators=(",", ":")
    ).encode()
    return len(payload).to_bytes(_LEN_BYTES, "little") + payload


def decode_response(payload: bytes) -> dict:
    try:
        resp = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise MalformedFrame(f"bad response JSON: {exc}") from exc
    if "error" in resp:
        # server-side failure report; the caller turns it into a BridgeError
        return resp
    for key in ("x", "y", "sin_o", "cos_o"):
        if key not in resp:
            raise MalformedFrame(f"response missing {key!r}")
    return resp


def read_frame(sock: socket.socket) -> bytes:
    """Read one length-prefixed payload from a socket."""
    head = _read_exact(sock, _LEN_BYTES)
    length = int.from_bytes(head, "little")
    return _read_exact(sock, length)


def _read_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    got = 0
    while got < n:
        try:
            chunk = sock.recv(min(1 << 20, n - got))
        except socket.timeout as exc:
            raise BridgeTimeout(f"timed out reading {n} bytes (got {got})") from exc
        if not chunk:
            raise MalformedFrame(f"connection closed after {got}/{n} bytes")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


@dataclass
class PolicyBinding:
    agent_id: int
    kind: str                       # HeuristicSeeker | HeuristicHider | Remote
    policy_name: str = ""
    endpoint: str = ""              # host:port for Remote
    frame_stack_n: int = 5

    def __post_init__(self):
        if self.kind not in (KIND_HEURISTIC_SEEKER, KIND_HEURISTIC_HIDER, KIND_REMOTE):
            raise ValueError(f"unknown binding kind {self.kind!r}")
        if self.kind == KIND_REMOTE and not self.endpoint:
            raise ValueError("Remote binding requires an endpoint")


def bind_team(
    setting: str, spec: str, endpoint: str = "", frame_stack_n: int = 5
) -> list[PolicyBinding]:
    """Parse a team spec like 'il-long:2,pe-t:1' into per-seeker bindings in
    agent-id order. Counts must sum to the setting's seeker count; the name
    'heuristic' binds the builtin policy, anything else binds remotely."""

    n_seekers, n_hiders = parse_setting(setting)
    bindings: list[PolicyBinding] = []
    agent_id = 0
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        name, _, count_s = part.partition(":")
        name = name.strip()
        if not count_s:
            raise ValueError(f"malformed team spec part {part!r} (want name:count)")
        try:
            count = int(count_s)
        except ValueError as exc:
            raise ValueError(f"bad count in {part!r}") from exc
        if count < 1:
            raise ValueError(f"count must be >= 1 in {part!r}")
        for _ in range(count):
            if name == "heuristic":
                bindings.append(
                    PolicyBinding(agent_id, KIND_HEURISTIC_SEEKER, policy_name=name)
                )
            else:
                if not endpoint:
                    raise ValueError(f"policy {name!r} needs an endpoint")
                bindings.append(
                    PolicyBinding(
                        agent_id,
                        KIND_REMOTE,
                        policy_name=name,
                        endpoint=endpoint,
                        frame_stack_n=frame_stack_n,
                    )
                )
            agent_id += 1
    if agent_id != n_seekers:
        raise ValueError(f"team spec binds {agent_id} seekers, setting has {n_seekers}")
    for hid in range(n_seekers, n_seekers + n_hiders):
        bindings.append(PolicyBinding(hid, KIND_HEURISTIC_HIDER, policy_name="heuristic"))
    return bindings


class RemotePolicyClient:
    """Episode policy that forwards frame stacks to a served policy.
    One TCP connection per bound agent; requests are sequential."""

    needs_frames = True
    source_label = "Heuristic"

    def __init__(
        self,
        endpoint: str,
        policy_name: str,
        agent_id: int,
        deadline_ms: float = DEFAULT_DEADLINE_MS,
    ):
        self.endpoint = endpoint
        self.policy_name = policy_name
        self.agent_id = agent_id
        self.deadline_ms = deadline_ms
        self._sock: socket.socket | None = None

    def _connect(self) -> socket.socket:
        if self._sock is None:
            host, _, port_s = self.endpoint.rpartition(":")
            try:
                sock = socket.create_connection((host, int(port_s)), timeout=1.0)
            except OSError as exc:
                raise BridgeError(f"cannot connect to {self.endpoint}: {exc}") from exc
            sock.settimeout(self.deadline_ms / 1000.0)
            self._sock = sock
        return self._sock

    def decide(self, ctx) -> Waypoint:
        if ctx.frames is None:
            raise ShapeMismatch("remote policy needs frames; none were rendered")
        sock = self._connect()
        try:
            sock.sendall(encode_request(self.policy_name, self.agent_id, ctx.frames))
            payload = read_frame(sock)
        except socket.timeout as exc:
            raise BridgeTimeout(
                f"policy {self.policy_name!r} missed the {self.deadline_ms:.0f} ms deadline"
            ) from exc
        except OSError as exc:
            raise BridgeError(f"transport failure: {exc}") from exc
        resp = decode_response(payload)
        if "error" in resp:
            raise BridgeError(f"served policy error: {resp['error']}")
        side = ctx.world.config.arena_side
        x = (float(resp["x"]) + 1.0) / 2.0 * side
        y = (float(resp["y"]) + 1.0) / 2.0 * side
        o = math.atan2(float(resp["sin_o"]), float(resp["cos_o"]))
        x = min(max(x, 0.0), side)
        y = min(max(y, 0.0), side)
        return Waypoint(x, y, o)

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None


def make_team_policies(bindings: list[PolicyBinding], deadline_ms: float = DEFAULT_DEADLINE_MS) -> dict:
    """Instantiate policy objects for EpisodeEngine from bindings. Builtin
    kinds return None so the engine falls back to its role heuristic."""
    policies: dict[int, object] = {}
    for b in bindings:
        if b.kind == KIND_REMOTE:
            policies[b.agent_id] = RemotePolicyClient(
                b.endpoint, b.policy_name, b.agent_id, deadline_ms
            )
    return policies


class _PolicyRequestHandler(socketserver.BaseRequestHandler):
    def handle(self):
        self.request.settimeout(10.0)
        while True:
            try:
                payload = read_frame(self.request)
            except (MalformedFrame, BridgeTimeout, OSError):
                return
            try:
                header, tensor = decode_request(payload)
                action = self.server.policy_fn(header, tensor)
                reply = encode_response(*action)
            except BridgeError as exc:
                body = json.dumps({"error": str(exc)}).encode()
                reply = len(body).to_bytes(_LEN_BYTES, "little") + body
            try:
                self.request.sendall(reply)
            except OSError:
                return


class PolicyServer(socketserver.ThreadingTCPServer):
    """Serves policy_fn(header, tensor) -> (x, y, sin_o, cos_o) over the
    bridge protocol. Intended for tests and for serving trained models."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, policy_fn, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _PolicyRequestHandler)
        self.policy_fn = policy_fn

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread
