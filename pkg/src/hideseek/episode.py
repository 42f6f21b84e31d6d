"""Episode lifecycle: map + spawn from seed, policy queries every
control_period ticks, physics stepping, trajectory hashing, and optional
per-decision recording."""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .geometry import SeenGrid, update_seen
from .heuristics import DecisionContext, make_policy
from .observation import OBS_SIZE, FrameStack, Renderer
from .world import (
    AgentState,
    EpisodeResult,
    Outcome,
    Role,
    Waypoint,
    WorldConfig,
    WorldState,
    check_termination,
    make_world,
    step,
)

_POLICY_SALT = 3

SOURCE_HEURISTIC = "Heuristic"
SOURCE_HUMAN = "Human"


class PolicyError(Exception):
    """Base for failures inside a policy (remote bridge errors subclass it)."""


class EpisodeAborted(Exception):
    """Episode could not finish; distinct from a Timeout outcome."""

    def __init__(self, message: str, tick: int = -1, cause: Exception | None = None):
        super().__init__(message)
        self.tick = tick
        self.cause = cause


@dataclass
class DecisionRecord:
    """Snapshot handed to a recorder at one decision boundary, before the
    world advances."""

    tick: int
    time: float
    poses: dict[int, tuple[float, float, float]]
    alive: dict[int, bool]
    commands: dict[int, Waypoint | None]
    sources: dict[int, str]
    frames: dict[int, np.ndarray] = field(default_factory=dict)


class EpisodeEngine:
    """Runs one episode. Deterministic given (config, seed, policies):
    all randomness flows from per-agent substreams of the episode seed.

    override_provider, when given, is called at every decision boundary and
    may force waypoints for specific agents (returns {agent_id: Waypoint});
    forced agents skip their policy and are labeled human-controlled.
    """

    def __init__(
        self,
        config: WorldConfig,
        seed: int,
        policies: dict[int, object] | None = None,
        spawns: list[AgentState] | None = None,
        recorder=None,
        override_provider=None,
        frame_stack_n: int = 5,
        collect_segments: bool = False,
        obs_size: int | None = None,
        mask_teammates: bool = False,
    ):
        self.config = config
        self.seed = seed
        self.world: WorldState = make_world(config, seed, spawns=spawns)
        self.recorder = recorder
        self.override_provider = override_provider
        self.collect_segments = collect_segments
        self.segments: list[tuple[int, int, np.ndarray, np.ndarray]] = []

        self.policies: dict[int, object] = {}
        for agent in self.world.agents:
            given = (policies or {}).get(agent.id)
            self.policies[agent.id] = given if given is not None else make_policy(agent.role)

        self.rngs = {
            a.id: np.random.Generator(
                np.random.PCG64(np.random.SeedSequence((seed, _POLICY_SALT, a.id)))
            )
            for a in self.world.agents
        }
        self.seen: dict[int, SeenGrid] = {
            a.id: SeenGrid.empty(config.arena_side, self.world.occupancy.resolution)
            for a in self.world.agents
            if a.role is Role.SEEKER
        }

        framed = set()
        for a in self.world.agents:
            if a.role is Role.SEEKER and (
                recorder is not None or getattr(self.policies[a.id], "needs_frames", False)
            ):
                framed.add(a.id)
        if framed:
            size = obs_size if obs_size else OBS_SIZE
            self.renderer = Renderer(self.world, size, mask_teammates=mask_teammates)
        else:
            self.renderer = None
        self.stacks = {i: FrameStack(frame_stack_n) for i in framed}

        self._hash = hashlib.sha256()
        self._update_seen()
        self._hash_tick()
        if self.recorder is not None:
            self.recorder.on_episode_start(self)

    # -- per-tick pipeline ---------------------------------------------------

    def decision_due(self) -> bool:
        return self.world.tick % self.config.control_period == 0

    def advance_tick(self) -> None:
        commands = self._decide() if self.decision_due() else None
        step(self.world, commands)
        self._update_seen()
        self._hash_tick()
        if self.collect_segments:
            for agent_id, p0, p1 in self.world.last_segments:
                self.segments.append((self.world.tick, agent_id, p0, p1))

    def run(self) -> EpisodeResult:
        while check_termination(self.world) is Outcome.ONGOING:
            self.advance_tick()
        result = self.result()
        if self.recorder is not None:
            self.recorder.on_episode_end(result, self.trajectory_hash)
        self._close_policies()
        return result

    def result(self) -> EpisodeResult:
        outcome = check_termination(self.world)
        return EpisodeResult(
            outcome=outcome,
            catch_times={
                h.id: self.world.catch_times.get(h.id) for h in self.world.hiders()
            },
            duration=self.world.time,
            seed=self.seed,
        )

    @property
    def trajectory_hash(self) -> str:
        return self._hash.hexdigest()

    # -- internals -------------------------------------------------------------

    def _decide(self) -> dict[int, Waypoint]:
        world = self.world
        frames: dict[int, np.ndarray] = {}
        stacked: dict[int, np.ndarray] = {}
        for agent_id, stack in self.stacks.items():
            obs = self.renderer.render(world, agent_id, self.seen[agent_id])
            frames[agent_id] = obs
            stacked[agent_id] = stack.push(obs)

        overrides: dict[int, Waypoint] = {}
        if self.override_provider is not None:
            overrides = self.override_provider(world, world.tick) or {}

        commands: dict[int, Waypoint] = {}
        issued: dict[int, Waypoint | None] = {}
        sources: dict[int, str] = {}
        for agent in world.agents:
            if not agent.alive:
                continue
            if agent.id in overrides:
                wp = overrides[agent.id]
                sources[agent.id] = SOURCE_HUMAN
            else:
                ctx = DecisionContext(
                    world=world,
                    agent=agent,
                    seen=self.seen.get(agent.id),
                    rng=self.rngs[agent.id],
                    frames=stacked.get(agent.id),
                )
                policy = self.policies[agent.id]
                try:
                    wp = policy.decide(ctx)
                except PolicyError as e:
                    self._close_policies()
                    raise EpisodeAborted(
                        f"policy for agent {agent.id} failed at tick {world.tick}: {e}",
                        tick=world.tick,
                        cause=e,
                    ) from e
                sources[agent.id] = getattr(policy, "source_label", SOURCE_HEURISTIC)
            issued[agent.id] = wp
            if wp is not None:
                commands[agent.id] = wp

        if self.recorder is not None:
            self.recorder.on_decision(
                DecisionRecord(
                    tick=world.tick,
                    time=world.time,
                    poses={a.id: a.pose for a in world.agents},
                    alive={a.id: a.alive for a in world.agents},
                    commands=issued,
                    sources=sources,
                    frames=frames,
                )
            )
        return commands

    def _update_seen(self) -> None:
        for agent_id, grid in self.seen.items():
            agent = self.world.agent(agent_id)
            update_seen(grid, agent.pose, self.world.obstacles, self.config.seeker_range)

    def _hash_tick(self) -> None:
        chunks = []
        for a in self.world.agents:
            chunks.append(
                struct.pack(
                    "<qBddd",
                    a.id,
                    1 if a.alive else 0,
                    float(a.pos[0]),
                    float(a.pos[1]),
                    float(a.orientation),
                )
            )
        self._hash.update(b"".join(chunks))

    def _close_policies(self) -> None:
        seen = set()
        for policy in self.policies.values():
            if id(policy) in seen:
                continue
            seen.add(id(policy))
            close = getattr(policy, "close", None)
            if callable(close):
                close()


def run_episode(
    config: WorldConfig,
    seed: int,
    policies: dict[int, object] | None = None,
    recorder=None,
    spawns: list[AgentState] | None = None,
) -> EpisodeResult:
    """Run one full episode; agents without an explicit policy fall back to
    their role's heuristic. Raises EpisodeAborted on policy failure."""
    return EpisodeEngine(
        config, seed, policies=policies, spawns=spawns, recorder=recorder
    ).run()
