"""HTTP + WebSocket front for guided sessions: start an episode, watch it
at 2 Hz, click waypoints for one seeker at a time."""

from __future__ import annotations

import asyncio
import json
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .guidance import Command, CommandError, Session
from .world import WorldConfig

DECISION_WALL_SECONDS = 0.5


class SessionRunner:
    """Owns one session and paces it: one control period per half second of
    wall clock, broadcasting state after every decision."""

    def __init__(self, session: Session, record_dir: str | None = None):
        self.session = session
        self.record_dir = record_dir
        self.paused = False
        self.finished = False
        self.result = None
        self._watchers: list[asyncio.Queue] = []
        self._task: asyncio.Task | None = None

    def start(self) -> None:
        self._task = asyncio.get_event_loop().create_task(self._loop())

    async def _loop(self) -> None:
        while True:
            if self.paused:
                await asyncio.sleep(0.05)
                continue
            alive = await asyncio.to_thread(self.session.step_decision)
            self._broadcast(self.session.state_message())
            if not alive:
                break
            await asyncio.sleep(DECISION_WALL_SECONDS)
        self.result = self.session.engine.result()
        engine = self.session.engine
        if engine.recorder is not None:
            engine.recorder.on_episode_end(self.result, engine.trajectory_hash)
            if self.record_dir:
                from .data import write_episode

                await asyncio.to_thread(
                    write_episode, engine.recorder.log, self.record_dir
                )
        self.finished = True
        self._broadcast(
            {
                "type": "result",
                "outcome": self.result.outcome.value,
                "duration": self.result.duration,
            }
        )

    def _broadcast(self, message: dict) -> None:
        for q in list(self._watchers):
            q.put_nowait(message)

    def watch(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue()
        self._watchers.append(q)
        return q

    def unwatch(self, q: asyncio.Queue) -> None:
        if q in self._watchers:
            self._watchers.remove(q)


def create_app(
    static_dir: str | None = None, record_dir: str | None = None
) -> FastAPI:
    app = FastAPI(title="hideseek guidance")
    runners: dict[str, SessionRunner] = {}

    @app.post("/sessions")
    async def create_session(body: dict):
        try:
            config = WorldConfig.from_dict(body.get("config", {}))
            seed = int(body.get("seed", 0))
        except (TypeError, ValueError) as e:
            raise HTTPException(status_code=422, detail=str(e))
        recorder = None
        if record_dir:
            from .data import DatasetRecorder

            recorder = DatasetRecorder()
        session = Session(config, seed, recorder=recorder)
        runner = SessionRunner(session, record_dir=record_dir)
        runners[session.id] = runner
        runner.start()
        return {"session_id": session.id}

    @app.get("/sessions/{session_id}/result")
    async def session_result(session_id: str):
        runner = runners.get(session_id)
        if runner is None:
            raise HTTPException(status_code=404, detail="unknown session")
        if not runner.finished:
            return {"finished": False}
        res = runner.result
        return {
            "finished": True,
            "outcome": res.outcome.value,
            "duration": res.duration,
            "catch_times": {str(k): v for k, v in res.catch_times.items()},
            "interventions": len(runner.session.history)
            + (1 if runner.session.active else 0),
        }

    @app.websocket("/session/{session_id}")
    async def session_socket(ws: WebSocket, session_id: str):
        runner = runners.get(session_id)
        if runner is None:
            await ws.close(code=4404)
            return
        await ws.accept()
        await ws.send_text(json.dumps(runner.session.map_message()))
        await ws.send_text(json.dumps(runner.session.state_message()))
        queue = runner.watch()

        async def pump_out():
            while True:
                msg = await queue.get()
                await ws.send_text(json.dumps(msg))

        out_task = asyncio.get_event_loop().create_task(pump_out())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                    reply = handle_client_message(runner, msg)
                except (json.JSONDecodeError, CommandError, KeyError, TypeError) as e:
                    reply = {"type": "error", "reason": str(e)}
                await ws.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass
        finally:
            out_task.cancel()
            runner.unwatch(queue)

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app


def handle_client_message(runner: SessionRunner, msg: dict) -> dict:
    kind = msg["type"]
    session = runner.session
    if kind == "select":
        session.apply_command(Command("select", agent_id=int(msg["id"])))
    elif kind == "waypoint":
        session.apply_command(
            Command("waypoint", x=float(msg["x"]), y=float(msg["y"]))
        )
    elif kind == "release":
        session.apply_command(
            Command("release", agent_id=msg.get("id"))
        )
    elif kind == "pause":
        runner.paused = True
    elif kind == "resume":
        runner.paused = False
    else:
        raise CommandError(f"unknown message type {kind!r}")
    return {"type": "ack", "of": kind}
