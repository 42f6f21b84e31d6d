"""Deterministic discrete-time world: map generation, agent kinematics via
waypoint following, catch detection, episode clocking."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import geometry
from .geometry import Obstacle, OccupancyGrid, ShapeKind
from .planning import PathResult, plan_path

AGENT_RADIUS = 0.5
WALL_CLEARANCE = 1.0
OBSTACLE_CLEARANCE = 4.0
SPAWN_BAND = 5.0
SPAWN_MIN_SEPARATION = 10.0
MAX_PLACEMENT_ATTEMPTS = 100

# Salts for deriving independent RNG substreams from an episode seed.
_MAP_SALT = 1
_SPAWN_SALT = 2
_POLICY_SALT = 3


class Role(str, Enum):
    SEEKER = "seeker"
    HIDER = "hider"


class Outcome(str, Enum):
    ONGOING = "ongoing"
    SUCCESS = "success"
    TIMEOUT = "timeout"


class UnsatisfiableConfig(Exception):
    pass


class CommandError(Exception):
    pass


@dataclass
class WorldConfig:
    arena_side: float = 50.0
    n_obstacles: int = 5
    obstacle_types: tuple[ShapeKind, ...] = (
        ShapeKind.CROSS,
        ShapeKind.RECTANGLE,
        ShapeKind.LSHAPE,
        ShapeKind.CYLINDER,
    )
    max_time: float = 120.0
    seeker_speed: float = 5.0
    hider_speed: float = 8.0
    seeker_range: float = 16.0
    hider_range: float = 10.0
    n_seekers: int = 3
    n_hiders: int = 3
    physics_dt: float = 0.1
    control_period: int = 5
    catch_radius: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.obstacle_types = tuple(
            ShapeKind(t) if not isinstance(t, ShapeKind) else t for t in self.obstacle_types
        )
        self.validate()

    def validate(self) -> None:
        if self.arena_side <= 0:
            raise ValueError("arena_side must be positive")
        if self.n_obstacles < 0:
            raise ValueError("n_obstacles must be >= 0")
        if self.n_obstacles > 0 and not self.obstacle_types:
            raise ValueError("obstacle_types empty but n_obstacles > 0")
        if not (1 <= self.n_seekers <= 4 and 1 <= self.n_hiders <= 4):
            raise ValueError("agent counts must be in 1..4")
        if self.physics_dt <= 0 or self.max_time <= 0:
            raise ValueError("time parameters must be positive")
        ratio = self.max_time / self.physics_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("max_time must be an integer number of physics ticks")
        if self.control_period < 1:
            raise ValueError("control_period must be >= 1")
        if min(self.seeker_speed, self.hider_speed, self.seeker_range, self.hider_range) <= 0:
            raise ValueError("speeds and ranges must be positive")
        if self.catch_radius <= 0:
            raise ValueError("catch_radius must be positive")
        # The canonical task gives hiders the speed edge and seekers the
        # sensing edge. The workbench still allows counterfactual settings
        # (slowed hiders etc.), so flag rather than refuse.
        if self.hider_speed <= self.seeker_speed:
            warnings.warn("non-canonical config: hider_speed <= seeker_speed", stacklevel=2)
        if self.seeker_range <= self.hider_range:
            warnings.warn("non-canonical config: seeker_range <= hider_range", stacklevel=2)

    @property
    def max_ticks(self) -> int:
        return int(round(self.max_time / self.physics_dt))

    @property
    def setting(self) -> str:
        return f"{self.n_seekers}v{self.n_hiders}"

    def speed_of(self, role: Role) -> float:
        return self.seeker_speed if role is Role.SEEKER else self.hider_speed

    def range_of(self, role: Role) -> float:
        return self.seeker_range if role is Role.SEEKER else self.hider_range

    def with_setting(self, setting: str) -> "WorldConfig":
        ns, nh = parse_setting(setting)
        return replace(self, n_seekers=ns, n_hiders=nh)

    def to_dict(self) -> dict:
        return {
            "arena_side": self.arena_side,
            "n_obstacles": self.n_obstacles,
            "obstacle_types": [t.value for t in self.obstacle_types],
            "max_time": self.max_time,
            "seeker_speed": self.seeker_speed,
            "hider_speed": self.hider_speed,
            "seeker_range": self.seeker_range,
            "hider_range": self.hider_range,
            "n_seekers": self.n_seekers,
            "n_hiders": self.n_hiders,
            "physics_dt": self.physics_dt,
            "control_period": self.control_period,
            "catch_radius": self.catch_radius,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorldConfig":
        kwargs = dict(d)
        if "obstacle_types" in kwargs:
            kwargs["obstacle_types"] = tuple(ShapeKind(t) for t in kwargs["obstacle_types"])
        return cls(**kwargs)


def parse_setting(setting: str) -> tuple[int, int]:
    """'3v3' -> (3, 3)."""
    try:
        s, h = setting.lower().split("v")
        return int(s), int(h)
    except ValueError as e:
        raise ValueError(f"bad setting {setting!r}; expected like '3v3'") from e


@dataclass
class Waypoint:
    x: float
    y: float
    o: float | None = None  # target orientation; None = face travel direction

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass
class AgentState:
    id: int
    role: Role
    pos: np.ndarray
    orientation: float
    speed: float
    alive: bool = True
    waypoint: Waypoint | None = None
    path: list[np.ndarray] = field(default_factory=list)

    @property
    def pose(self) -> tuple[float, float, float]:
        return float(self.pos[0]), float(self.pos[1]), float(self.orientation)


@dataclass
class WorldState:
    config: WorldConfig
    obstacles: tuple[Obstacle, ...]
    agents: list[AgentState]
    tick: int
    rng: np.random.Generator
    occupancy: OccupancyGrid
    catch_times: dict[int, float] = field(default_factory=dict)
    # Movement segments of the current tick, for safety auditing.
    last_segments: list[tuple[int, np.ndarray, np.ndarray]] = field(default_factory=list)

    @property
    def time(self) -> float:
        return self.tick * self.config.physics_dt

    def seekers(self) -> list[AgentState]:
        return [a for a in self.agents if a.role is Role.SEEKER]

    def hiders(self) -> list[AgentState]:
        return [a for a in self.agents if a.role is Role.HIDER]

    def agent(self, agent_id: int) -> AgentState:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise CommandError(f"unknown agent id {agent_id}")


@dataclass
class EpisodeResult:
    outcome: Outcome
    catch_times: dict[int, float | None]
    duration: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "catch_times": {str(k): v for k, v in self.catch_times.items()},
            "duration": self.duration,
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# Map generation
# ---------------------------------------------------------------------------


def _sample_obstacle(rng: np.random.Generator, kinds, side: float) -> Obstacle:
    kind = kinds[int(rng.integers(len(kinds)))]
    yaw = float(rng.uniform(0.0, 2.0 * math.pi))
    if kind is ShapeKind.CYLINDER:
        size = (float(rng.uniform(1.5, 3.0)),)
        reach = size[0]
    elif kind is ShapeKind.RECTANGLE:
        size = (float(rng.uniform(4.0, 8.0)), float(rng.uniform(4.0, 8.0)))
        reach = math.hypot(size[0], size[1]) / 2
    else:  # cross / lshape: bounding box L x L, arm thickness t
        length = float(rng.uniform(4.0, 8.0))
        size = (length, float(rng.uniform(1.0, 2.0)))
        reach = length * math.sqrt(2.0) / 2
    lo = WALL_CLEARANCE + reach
    hi = side - WALL_CLEARANCE - reach
    if hi <= lo:
        lo, hi = side * 0.25, side * 0.75  # tiny arena; rely on the exact check below
    center = (float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi)))
    return Obstacle(shape=kind, center=center, yaw=yaw, size_params=size)


def _wall_clearance(ob: Obstacle, side: float) -> float:
    best = math.inf
    for part in ob.parts:
        if isinstance(part, geometry.CirclePart):
            ext_x = ext_y = part.r
            cx, cy = part.cx, part.cy
        else:
            cs = part.corners()
            cx = cy = 0.0
            ext_x = float(np.max(np.abs(cs[:, 0] - part.cx)))
            ext_y = float(np.max(np.abs(cs[:, 1] - part.cy)))
            cx, cy = part.cx, part.cy
        best = min(best, cx - ext_x, side - cx - ext_x, cy - ext_y, side - cy - ext_y)
    return best


def _obstacle_gap(a: Obstacle, b: Obstacle) -> float:
    best = math.inf
    for pa in a.parts:
        for pb in b.parts:
            best = min(best, _part_gap(pa, pb))
    return best


def _part_gap(pa, pb) -> float:
    ca, cb = geometry.CirclePart, geometry.RectPart
    if isinstance(pa, ca) and isinstance(pb, ca):
        d = math.hypot(pa.cx - pb.cx, pa.cy - pb.cy) - pa.r - pb.r
        return max(d, 0.0)
    if isinstance(pa, ca):
        return max(float(pb.distance(np.array([[pa.cx, pa.cy]]))[0]) - pa.r, 0.0)
    if isinstance(pb, ca):
        return max(float(pa.distance(np.array([[pb.cx, pb.cy]]))[0]) - pb.r, 0.0)
    # rect vs rect: containment or min edge-to-edge distance
    if pa.contains(np.array([[pb.cx, pb.cy]]))[0] or pb.contains(np.array([[pa.cx, pa.cy]]))[0]:
        return 0.0
    ca_ = pa.corners()
    cb_ = pb.corners()
    best = math.inf
    for i in range(4):
        for j in range(4):
            best = min(
                best,
                geometry._segment_segment_distance(
                    ca_[i], ca_[(i + 1) % 4], cb_[j], cb_[(j + 1) % 4]
                ),
            )
    return best


def generate_map(config: WorldConfig, seed: int) -> list[Obstacle]:
    """Place obstacles with wall/pairwise clearance and connected free space.

    Each failed attempt moves to the next RNG substream, so the result is a
    pure function of (config, seed).
    """
    if config.n_obstacles == 0:
        return []
    kinds = sorted(config.obstacle_types, key=lambda k: k.value)
    streams = np.random.SeedSequence((seed, _MAP_SALT)).spawn(MAX_PLACEMENT_ATTEMPTS)
    for attempt in range(MAX_PLACEMENT_ATTEMPTS):
        rng = np.random.Generator(np.random.PCG64(streams[attempt]))
        obstacles: list[Obstacle] = []
        ok = True
        for _ in range(config.n_obstacles):
            placed = False
            for _ in range(200):
                ob = _sample_obstacle(rng, kinds, config.arena_side)
                if _wall_clearance(ob, config.arena_side) < WALL_CLEARANCE:
                    continue
                if any(_obstacle_gap(ob, other) < OBSTACLE_CLEARANCE for other in obstacles):
                    continue
                obstacles.append(ob)
                placed = True
                break
            if not placed:
                ok = False
                break
        if not ok:
            continue
        grid = OccupancyGrid.build(config.arena_side, obstacles, inflation=AGENT_RADIUS)
        if grid.free_space_connected():
            return obstacles
    raise UnsatisfiableConfig(
        f"could not place {config.n_obstacles} obstacles after {MAX_PLACEMENT_ATTEMPTS} attempts"
    )


# ---------------------------------------------------------------------------
# Spawning
# ---------------------------------------------------------------------------


def spawn_agents(obstacles, config: WorldConfig, seed: int) -> list[AgentState]:
    """Spawn all agents in the boundary band, mutually far apart, in free space.

    Seekers take ids 0..n_seekers-1, hiders follow.
    """
    side = config.arena_side
    streams = np.random.SeedSequence((seed, _SPAWN_SALT)).spawn(MAX_PLACEMENT_ATTEMPTS)
    n_total = config.n_seekers + config.n_hiders
    for attempt in range(MAX_PLACEMENT_ATTEMPTS):
        rng = np.random.Generator(np.random.PCG64(streams[attempt]))
        positions: list[np.ndarray] = []
        headings: list[float] = []
        ok = True
        for _ in range(n_total):
            placed = False
            for _ in range(200):
                pos = _sample_band_position(rng, side)
                if geometry.point_clearance(obstacles, pos) <= AGENT_RADIUS:
                    continue
                if any(float(np.hypot(*(pos - p))) < SPAWN_MIN_SEPARATION for p in positions):
                    continue
                positions.append(pos)
                headings.append(float(rng.uniform(0.0, 2.0 * math.pi)))
                placed = True
                break
            if not placed:
                ok = False
                break
        if ok:
            agents = []
            for i in range(n_total):
                role = Role.SEEKER if i < config.n_seekers else Role.HIDER
                agents.append(
                    AgentState(
                        id=i,
                        role=role,
                        pos=positions[i],
                        orientation=headings[i],
                        speed=config.speed_of(role),
                    )
                )
            return agents
    raise UnsatisfiableConfig(
        f"could not spawn {n_total} agents after {MAX_PLACEMENT_ATTEMPTS} attempts"
    )


def _sample_band_position(rng: np.random.Generator, side: float) -> np.ndarray:
    # Sample uniformly in the arena, then fold the off-band coordinate into
    # the 5 m boundary band on a random wall; keeps the density simple and
    # the draw count fixed per attempt.
    wall = int(rng.integers(4))
    along = float(rng.uniform(AGENT_RADIUS, side - AGENT_RADIUS))
    depth = float(rng.uniform(AGENT_RADIUS, SPAWN_BAND))
    if wall == 0:
        return np.array([along, depth])
    if wall == 1:
        return np.array([along, side - depth])
    if wall == 2:
        return np.array([depth, along])
    return np.array([side - depth, along])


def make_world(config: WorldConfig, seed: int, spawns: list[AgentState] | None = None) -> WorldState:
    obstacles = tuple(generate_map(config, seed))
    grid = OccupancyGrid.build(config.arena_side, obstacles, inflation=AGENT_RADIUS)
    agents = spawns if spawns is not None else spawn_agents(obstacles, config, seed)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, _POLICY_SALT))))
    return WorldState(
        config=config, obstacles=obstacles, agents=agents, tick=0, rng=rng, occupancy=grid
    )


# ---------------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------------


def set_waypoint(world: WorldState, agent: AgentState, wp: Waypoint) -> None:
    """Assign a waypoint and plan the path the agent will follow to it."""
    side = world.config.arena_side
    if not (0.0 <= wp.x <= side and 0.0 <= wp.y <= side):
        raise CommandError(f"waypoint ({wp.x}, {wp.y}) outside arena")
    agent.waypoint = wp
    result: PathResult = plan_path(agent.pos, wp.xy, world.occupancy)
    agent.path = result.waypoints


def step(world: WorldState, commands: dict[int, Waypoint] | None = None) -> WorldState:
    """Advance one physics tick. Agents without a new command keep following
    their current waypoint. Mutates and returns the world."""
    if commands:
        side = world.config.arena_side
        for agent_id, wp in commands.items():
            agent = world.agent(agent_id)  # raises on unknown id
            if not agent.alive:
                raise CommandError(f"agent {agent_id} is not alive")
            if not (0.0 <= wp.x <= side and 0.0 <= wp.y <= side):
                raise CommandError(f"waypoint ({wp.x}, {wp.y}) outside arena")
        for agent_id, wp in commands.items():
            set_waypoint(world, world.agent(agent_id), wp)

    dt = world.config.physics_dt
    world.last_segments = []
    for agent in world.agents:
        if not agent.alive or not agent.path:
            continue
        start = agent.pos.copy()
        _advance_along_path(agent, agent.speed * dt)
        np.clip(agent.pos, 0.0, world.config.arena_side, out=agent.pos)
        world.last_segments.append((agent.id, start, agent.pos.copy()))

    world.tick += 1
    _detect_catches(world)
    return world


def _advance_along_path(agent: AgentState, budget: float) -> None:
    while budget > 1e-12 and agent.path:
        target = agent.path[0]
        delta = target - agent.pos
        dist = float(np.hypot(*delta))
        if dist <= budget:
            agent.pos = target.copy()
            budget -= dist
            agent.path.pop(0)
            if dist > 1e-12:
                agent.orientation = math.atan2(delta[1], delta[0])
            if not agent.path:
                if agent.waypoint is not None and agent.waypoint.o is not None:
                    agent.orientation = agent.waypoint.o
                agent.waypoint = None
        else:
            agent.pos = agent.pos + delta * (budget / dist)
            agent.orientation = math.atan2(delta[1], delta[0])
            budget = 0.0


def _detect_catches(world: WorldState) -> None:
    seekers = [a for a in world.seekers()]
    if not seekers:
        return
    spos = np.stack([s.pos for s in seekers])
    for hider in world.hiders():
        if not hider.alive:
            continue
        d = np.min(np.hypot(spos[:, 0] - hider.pos[0], spos[:, 1] - hider.pos[1]))
        if d <= world.config.catch_radius:
            hider.alive = False
            hider.path = []
            hider.waypoint = None
            world.catch_times[hider.id] = world.time


def check_termination(world: WorldState) -> Outcome:
    if all(not h.alive for h in world.hiders()):
        return Outcome.SUCCESS
    if world.tick >= world.config.max_ticks:
        return Outcome.TIMEOUT
    return Outcome.ONGOING
