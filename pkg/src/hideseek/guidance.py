"""Human-steerable sessions: one operator may take over one seeker at a
time by clicking a waypoint; everyone else keeps running their policy. A
scripted intervener stands in for the operator in automated runs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .episode import EpisodeEngine
from .heuristics import _moving_root
from .world import Outcome, Role, Waypoint, WorldConfig, check_termination

ARRIVAL_RADIUS = 0.5
_session_counter = itertools.count(1)


class InterventionState(Enum):
    ACTIVE = "Active"
    COMPLETED = "Completed"
    OVERRIDDEN = "Overridden"
    RELEASED = "Released"


@dataclass
class Intervention:
    seeker_id: int
    waypoint: tuple[float, float]
    issue_tick: int
    state: InterventionState = InterventionState.ACTIVE
    end_tick: int | None = None
    governed_steps: int = 0


class CommandError(Exception):
    """Rejected session command; the message says why."""


@dataclass
class Command:
    kind: str                     # select | waypoint | release
    agent_id: int | None = None
    x: float | None = None
    y: float | None = None


@dataclass
class GovernedStep:
    """One decision step that ran under an Active intervention."""

    tick: int
    seeker_id: int


class Session:
    """Wraps one episode with a command queue and intervention bookkeeping.

    Commands are drained at decision boundaries only, so a command
    acknowledged at tick T is in force for the next decision at the latest.
    With no commands the run is byte-identical to the headless engine.
    """

    def __init__(self, config: WorldConfig, seed: int, recorder=None, policies=None):
        self.id = f"s{next(_session_counter):04d}"
        self.config = config
        self.seed = seed
        self._queue: list[Command] = []
        self.selected_seeker: int | None = None
        self.active: Intervention | None = None
        self.history: list[Intervention] = []
        self.governed: list[GovernedStep] = []
        self.engine = EpisodeEngine(
            config,
            seed,
            recorder=recorder,
            policies=policies,
            override_provider=self._overrides,
        )
        seekers = [a.id for a in self.engine.world.agents if a.role is Role.SEEKER]
        self._seeker_ids = set(seekers)

    # -- command intake ------------------------------------------------------

    def apply_command(self, cmd: Command) -> None:
        """Validate now, act at the next decision boundary."""
        if cmd.kind == "select":
            if cmd.agent_id not in self._seeker_ids:
                raise CommandError(f"{cmd.agent_id} is not a seeker id")
        elif cmd.kind == "waypoint":
            if self._pending_selection() is None:
                raise CommandError("no seeker selected")
            side = self.config.arena_side
            if cmd.x is None or cmd.y is None or not (
                0.0 <= cmd.x <= side and 0.0 <= cmd.y <= side
            ):
                raise CommandError("waypoint outside arena")
        elif cmd.kind == "release":
            if cmd.agent_id is not None and cmd.agent_id not in self._seeker_ids:
                raise CommandError(f"{cmd.agent_id} is not a seeker id")
        else:
            raise CommandError(f"unknown command kind {cmd.kind!r}")
        self._queue.append(cmd)

    def _pending_selection(self) -> int | None:
        sel = self.selected_seeker
        for cmd in self._queue:
            if cmd.kind == "select":
                sel = cmd.agent_id
        return sel

    # -- loop ----------------------------------------------------------------

    def _drain(self, tick: int) -> None:
        for cmd in self._queue:
            if cmd.kind == "select":
                self.selected_seeker = cmd.agent_id
            elif cmd.kind == "waypoint":
                self._set_waypoint(tick, cmd.x, cmd.y)
            elif cmd.kind == "release":
                target = cmd.agent_id if cmd.agent_id is not None else self.selected_seeker
                if self.active is not None and self.active.seeker_id == target:
                    self._finish(InterventionState.RELEASED, tick)
        self._queue.clear()

    def _set_waypoint(self, tick: int, x: float, y: float) -> None:
        if self.active is not None:
            # same seeker: the new click supersedes; another seeker: the
            # single-operator rule forces the old agent back to its policy
            if self.active.seeker_id == self.selected_seeker:
                self._finish(InterventionState.OVERRIDDEN, tick)
            else:
                self._finish(InterventionState.RELEASED, tick)
        self.active = Intervention(self.selected_seeker, (float(x), float(y)), tick)

    def _finish(self, state: InterventionState, tick: int) -> None:
        self.active.state = state
        self.active.end_tick = tick
        self.history.append(self.active)
        self.active = None

    def _overrides(self, world, tick: int) -> dict[int, Waypoint]:
        self._drain(tick)
        iv = self.active
        if iv is None:
            return {}
        agent = world.agent(iv.seeker_id)
        wx, wy = iv.waypoint
        arrived = float(np.hypot(agent.pos[0] - wx, agent.pos[1] - wy)) <= ARRIVAL_RADIUS
        # a click inside an obstacle footprint gets its goal adjusted by the
        # planner; once the seeker has run that route out it will never get
        # within the arrival radius, so treat the exhausted route as arrival
        # rather than pinning the seeker there for the rest of the episode
        stalled = iv.governed_steps > 0 and agent.waypoint is None
        if arrived or stalled:
            self._finish(InterventionState.COMPLETED, tick)
            return {}
        iv.governed_steps += 1
        self.governed.append(GovernedStep(tick, iv.seeker_id))
        return {iv.seeker_id: Waypoint(wx, wy)}

    def step_decision(self) -> bool:
        """Advance one control period (or to termination). False when done."""
        if check_termination(self.engine.world) is not Outcome.ONGOING:
            return False
        self.engine.advance_tick()
        while (
            not self.engine.decision_due()
            and check_termination(self.engine.world) is Outcome.ONGOING
        ):
            self.engine.advance_tick()
        return check_termination(self.engine.world) is Outcome.ONGOING

    def run_to_end(self):
        while self.step_decision():
            pass
        result = self.engine.result()
        if self.engine.recorder is not None:
            self.engine.recorder.on_episode_end(result, self.engine.trajectory_hash)
        return result

    # -- wire views ----------------------------------------------------------

    def state_message(self) -> dict:
        world = self.engine.world
        return {
            "type": "state",
            "tick": world.tick,
            "agents": [
                {
                    "id": a.id,
                    "role": a.role.value,
                    "x": round(float(a.pos[0]), 3),
                    "y": round(float(a.pos[1]), 3),
                    "o": round(float(a.orientation), 4),
                    "alive": a.alive,
                }
                for a in world.agents
            ],
            "selected": self.selected_seeker,
            "interventions": [
                {
                    "seeker_id": iv.seeker_id,
                    "x": iv.waypoint[0],
                    "y": iv.waypoint[1],
                    "state": iv.state.value,
                }
                for iv in ([self.active] if self.active else [])
            ],
            "time_left": round(self.config.max_time - world.time, 2),
        }

    def map_message(self) -> dict:
        return {
            "type": "map",
            "arena_side": self.config.arena_side,
            "obstacles": [ob.to_dict() for ob in self.engine.world.obstacles],
        }


# -- scripted operator --------------------------------------------------------

INTERVENER_COOLDOWN_S = 5.0
_MIN_CORRIDOR_SPEED = 0.5
# Worst acceptable pinch: how late (seconds) the clicked seeker may arrive
# at the block point before the click is considered wasted budget. Late
# blocks still funnel the hider, so this is deliberately permissive.
_MAX_BLOCK_LATENESS_S = 3.0


class ScriptedIntervener:
    """Ground-truth stand-in for the human. It first checks that help is
    needed at all (the unaided team losing this episode); if so, whenever a
    hider is committed to a flight corridor it sends the free seeker (not
    the one already chasing) to the constant-bearing intercept point on
    that corridor."""

    def __init__(self, session: Session, budget: int):
        self.session = session
        self.budget = budget
        self.used = 0
        self._last_tick: int | None = None
        self._prev_pos: dict[int, np.ndarray] = {}
        self._cooldown_ticks = int(
            INTERVENER_COOLDOWN_S / session.config.physics_dt
        )
        self._last_click_tick: int | None = None
        self._needed: bool | None = None

    def observe_and_act(self) -> None:
        world = self.session.engine.world
        tick = world.tick
        velocities = self._velocities(world, tick)
        if velocities is None:
            return
        if self.used >= self.budget:
            return
        if (
            self._last_click_tick is not None
            and tick - self._last_click_tick < self._cooldown_ticks
        ):
            return
        seekers = [a for a in world.agents if a.role is Role.SEEKER]
        if len(seekers) < 2:
            return
        if not self._intervention_needed():
            return
        plan = self._plan(world, seekers, velocities)
        if plan is None:
            return
        seeker_id, point = plan
        try:
            self.session.apply_command(Command("select", agent_id=seeker_id))
            self.session.apply_command(
                Command("waypoint", x=float(point[0]), y=float(point[1]))
            )
        except CommandError:
            return
        self.used += 1
        self._last_click_tick = tick

    def _intervention_needed(self) -> bool:
        """Intervene only when necessary: the operator stand-in has ground
        truth, and its version of necessity is knowing whether the unaided
        team already wins. Sessions with zero commands replay the headless
        run exactly, so abstaining here can never cost a win."""
        if self._needed is None:
            rollout = EpisodeEngine(self.session.config, self.session.engine.seed)
            self._needed = rollout.run().outcome is not Outcome.SUCCESS
        return self._needed

    def _velocities(self, world, tick) -> dict[int, np.ndarray] | None:
        current = {
            a.id: a.pos.copy() for a in world.agents if a.role is Role.HIDER and a.alive
        }
        if self._last_tick is None or tick <= self._last_tick:
            self._prev_pos = current
            self._last_tick = tick
            return None
        dt = (tick - self._last_tick) * world.config.physics_dt
        vel = {
            aid: (pos - self._prev_pos[aid]) / dt
            for aid, pos in current.items()
            if aid in self._prev_pos
        }
        self._prev_pos = current
        self._last_tick = tick
        return vel

    def _plan(self, world, seekers, velocities):
        config = world.config
        best = None
        for hider in world.agents:
            if hider.role is not Role.HIDER or not hider.alive:
                continue
            v = velocities.get(hider.id)
            if v is None or float(np.hypot(*v)) < _MIN_CORRIDOR_SPEED:
                continue
            by_distance = sorted(
                seekers, key=lambda s: (float(np.hypot(*(s.pos - hider.pos))), s.id)
            )
            chaser = by_distance[0]
            free = [s for s in seekers if s.id != chaser.id]
            candidate = min(
                free, key=lambda s: (self._ray_distance(hider.pos, v, s.pos), s.id)
            )
            point = intercept_point(
                hider.pos, v, candidate.pos, config.seeker_speed
            )
            if point is None:
                # no true intercept (the hider outruns a straight-line
                # chase); block the corridor where the seeker's arrival
                # slack is least bad instead of doing nothing
                point, slack = corridor_block_point(
                    hider.pos, v, candidate.pos, config.seeker_speed
                )
                if point is not None and slack < -_MAX_BLOCK_LATENESS_S:
                    point = None
            if point is None:
                continue
            side = config.arena_side
            point = np.clip(point, 0.0, side)
            distance = float(np.hypot(*(candidate.pos - hider.pos)))
            if best is None or distance < best[0]:
                best = (distance, candidate.id, point)
        if best is None:
            return None
        return best[1], best[2]

    @staticmethod
    def _ray_distance(origin: np.ndarray, direction: np.ndarray, point: np.ndarray) -> float:
        u = direction / max(float(np.hypot(*direction)), 1e-12)
        w = point - origin
        along = float(w @ u)
        if along <= 0.0:
            return float(np.hypot(*w))
        return float(np.hypot(*(w - along * u)))


def intercept_point(
    hider_pos: np.ndarray,
    hider_velocity: np.ndarray,
    seeker_pos: np.ndarray,
    seeker_speed: float,
) -> np.ndarray | None:
    """Where a constant-speed seeker starting now meets a hider that keeps
    its current velocity; None when no such meeting exists."""
    r = hider_pos - seeker_pos
    a = float(hider_velocity @ hider_velocity) - seeker_speed * seeker_speed
    b = 2.0 * float(r @ hider_velocity)
    c = float(r @ r)
    t = _moving_root(a, b, c)
    if t is None:
        return None
    return hider_pos + hider_velocity * t


def corridor_block_point(
    hider_pos: np.ndarray,
    hider_velocity: np.ndarray,
    seeker_pos: np.ndarray,
    seeker_speed: float,
    horizon: float = 6.0,
) -> tuple[np.ndarray | None, float]:
    """Point on the hider's projected line that maximizes (hider arrival −
    seeker arrival), with that slack; the tightest pinch available when no
    intercept exists. Negative slack = the seeker arrives late."""
    speed = float(np.hypot(*hider_velocity))
    if speed < 1e-9:
        return None, -np.inf
    best_point = None
    best_slack = -np.inf
    for k in range(1, 41):
        tau = horizon * k / 40.0
        point = hider_pos + hider_velocity * tau
        slack = tau - float(np.hypot(*(point - seeker_pos))) / seeker_speed
        if slack > best_slack:
            best_slack = slack
            best_point = point
    return best_point, best_slack


def run_guided_episode(
    config: WorldConfig, seed: int, budget: int, recorder=None
):
    """One scripted-intervener episode; returns (result, session)."""
    session = Session(config, seed, recorder=recorder)
    intervener = ScriptedIntervener(session, budget)
    intervener.observe_and_act()
    while session.step_decision():
        intervener.observe_and_act()
    result = session.engine.result()
    if session.engine.recorder is not None:
        session.engine.recorder.on_episode_end(result, session.engine.trajectory_hash)
    return result, session
