"""HTTP/WebSocket session front: lifecycle, message ordering, command acks,
and error surfacing. The runner's wall-clock pacing is shrunk so episodes
finish in milliseconds."""

import time

import pytest
from fastapi.testclient import TestClient

import hideseek.server as server_mod
from hideseek.server import create_app

TINY = {
    "config": {"n_seekers": 2, "n_hiders": 1, "max_time": 2.0},
    "seed": 77,
}


@pytest.fixture
def client(monkeypatch):
    monkeypatch.setattr(server_mod, "DECISION_WALL_SECONDS", 0.001)
    app = create_app()
    with TestClient(app) as c:
        yield c


def start_session(client, body=None):
    resp = client.post("/sessions", json=body or TINY)
    assert resp.status_code == 200
    return resp.json()["session_id"]


def wait_result(client, sid, timeout=15.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        data = client.get(f"/sessions/{sid}/result").json()
        if data["finished"]:
            return data
        time.sleep(0.02)
    raise AssertionError("session did not finish in time")


class TestSessionLifecycle:
    def test_create_returns_id(self, client):
        sid = start_session(client)
        assert isinstance(sid, str) and sid

    def test_bad_config_is_422(self, client):
        resp = client.post(
            "/sessions", json={"config": {"n_hiders": 9}, "seed": 1}
        )
        assert resp.status_code == 422
        assert "1..4" in resp.json()["detail"]

    def test_unknown_session_result_404(self, client):
        assert client.get("/sessions/nope/result").status_code == 404

    def test_result_reports_outcome(self, client):
        sid = start_session(client)
        data = wait_result(client, sid)
        assert data["outcome"] in ("success", "timeout")
        assert data["duration"] <= TINY["config"]["max_time"] + 1e-9
        assert isinstance(data["catch_times"], dict)
        assert data["interventions"] == 0


class TestWebSocket:
    def test_map_then_state_first(self, client):
        sid = start_session(client)
        with client.websocket_connect(f"/session/{sid}") as ws:
            first = ws.receive_json()
            second = ws.receive_json()
        assert first["type"] == "map"
        assert first["arena_side"] == 50.0
        assert len(first["obstacles"]) == 5
        assert second["type"] == "state"
        assert len(second["agents"]) == 3

    def test_commands_acked(self, client):
        sid = start_session(client)
        with client.websocket_connect(f"/session/{sid}") as ws:
            ws.receive_json()  # map
            ws.receive_json()  # state
            ws.send_json({"type": "select", "id": 0})
            assert self._next_of_type(ws, "ack")["of"] == "select"
            ws.send_json({"type": "waypoint", "x": 25.0, "y": 25.0})
            assert self._next_of_type(ws, "ack")["of"] == "waypoint"
            ws.send_json({"type": "release"})
            assert self._next_of_type(ws, "ack")["of"] == "release"

    def test_command_errors_reported(self, client):
        sid = start_session(client)
        with client.websocket_connect(f"/session/{sid}") as ws:
            ws.receive_json()
            ws.receive_json()
            # waypoint with nothing selected is a session-level error
            ws.send_json({"type": "waypoint", "x": 1.0, "y": 1.0})
            err = self._next_of_type(ws, "error")
            assert "selected" in err["reason"]
            ws.send_json({"type": "warp", "x": 0})
            err = self._next_of_type(ws, "error")
            assert "warp" in err["reason"]
            ws.send_text("not json")
            assert self._next_of_type(ws, "error")

    def test_state_stream_reaches_result(self, client):
        sid = start_session(client)
        with client.websocket_connect(f"/session/{sid}") as ws:
            ticks = []
            for _ in range(300):
                msg = ws.receive_json()
                if msg["type"] == "state":
                    ticks.append(msg["tick"])
                if msg["type"] == "result":
                    break
            else:
                raise AssertionError("no result message seen")
            assert msg["outcome"] in ("success", "timeout")
        assert ticks == sorted(ticks)

    def test_pause_stops_progress(self, client):
        sid = start_session(
            client, {"config": {"n_seekers": 2, "n_hiders": 1, "max_time": 60.0}, "seed": 3}
        )
        with client.websocket_connect(f"/session/{sid}") as ws:
            ws.receive_json()
            ws.receive_json()
            ws.send_json({"type": "pause"})
            self._next_of_type(ws, "ack")
            time.sleep(0.1)
            data = client.get(f"/sessions/{sid}/result").json()
            assert data["finished"] is False
            ws.send_json({"type": "resume"})
            self._next_of_type(ws, "ack")

    def test_unknown_session_socket_closed(self, client):
        from starlette.websockets import WebSocketDisconnect

        with pytest.raises(WebSocketDisconnect) as exc:
            with client.websocket_connect("/session/ghost") as ws:
                ws.receive_json()
        assert exc.value.code == 4404

    @staticmethod
    def _next_of_type(ws, wanted, limit=200):
        # acks share the socket with broadcast state frames
        for _ in range(limit):
            msg = ws.receive_json()
            if msg["type"] == wanted:
                return msg
            assert msg["type"] in ("state", "result")
        raise AssertionError(f"no {wanted!r} message within {limit}")


class TestGuidedRunViaSocket:
    def test_waypoint_click_governs_seeker(self, client):
        body = {
            "config": {"n_seekers": 2, "n_hiders": 1, "max_time": 4.0},
            "seed": 5,
        }
        sid = start_session(client, body)
        with client.websocket_connect(f"/session/{sid}") as ws:
            ws.receive_json()
            state = ws.receive_json()
            target = dict(x=25.0, y=25.0)
            ws.send_json({"type": "select", "id": 0})
            ws.send_json({"type": "waypoint", **target})
            seen_intervention = False
            for _ in range(300):
                msg = ws.receive_json()
                if msg["type"] == "state" and msg["interventions"]:
                    iv = msg["interventions"][0]
                    assert iv["seeker_id"] == 0
                    assert (iv["x"], iv["y"]) == (25.0, 25.0)
                    assert iv["state"] == "Active"
                    seen_intervention = True
                if msg["type"] == "result":
                    break
        data = wait_result(client, sid)
        assert seen_intervention
        assert data["interventions"] >= 1
