"""Scripted baseline policies: seekers chase or explore, hiders flee along
the direction that maximizes time-to-intercept."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    Obstacle,
    SeenGrid,
    point_clearance,
    ray_obstacle_distance,
    ray_wall_distance,
    visible,
)
from .world import AGENT_RADIUS, AgentState, Role, Waypoint, WorldState

N_ESCAPE_DIRECTIONS = 32
ESCAPE_LOOKAHEAD = 5.0
LAM_WALL = 2.0
LAM_OBS = 2.0
# Ceiling on per-seeker intercept time. Directions a faster hider cannot be
# intercepted along are equally "safe"; what separates them is clearance.
INTERCEPT_CAP = 3.5
# Weight of the chase-to-stop tie grader added on top of the capped
# intercept time. Small, so clearance penalties dominate among safe
# directions but exact ties cannot occur in open space.
ESCAPE_TIME_WEIGHT = 0.01


@dataclass
class DecisionContext:
    world: WorldState
    agent: AgentState
    seen: SeenGrid | None
    rng: np.random.Generator
    frames: np.ndarray | None = None  # stacked observation, remote policies only


def visible_opponents(world: WorldState, agent: AgentState) -> list[AgentState]:
    """Alive opposite-role agents within this agent's visual range and LOS."""
    rng_limit = world.config.range_of(agent.role)
    want = Role.HIDER if agent.role is Role.SEEKER else Role.SEEKER
    out = []
    for other in world.agents:
        if other.role is not want or not other.alive:
            continue
        if visible(agent.pose, (other.pos[0], other.pos[1]), world.obstacles, rng_limit):
            out.append(other)
    return out


class SeekerHeuristic:
    """Chase the nearest visible hider; otherwise walk to the nearest cell the
    seeker has not yet seen; once everything is seen, patrol at random."""

    def __init__(self):
        # (row, col) frontier or patrol cell; kept until reached or a hider
        # shows up, so exploration commits instead of dithering.
        self._target: tuple[int, int] | None = None

    def decide(self, ctx: DecisionContext) -> Waypoint | None:
        world, agent = ctx.world, ctx.agent
        hiders = visible_opponents(world, agent)
        if hiders:
            self._target = None
            target = min(
                hiders, key=lambda h: (float(np.hypot(*(h.pos - agent.pos))), h.id)
            )
            return Waypoint(float(target.pos[0]), float(target.pos[1]))
        return self._explore(ctx)

    def _explore(self, ctx: DecisionContext) -> Waypoint | None:
        grid = ctx.world.occupancy
        if self._target is not None:
            r, c = self._target
            if float(np.hypot(*(grid.center_of(r, c) - ctx.agent.pos))) < grid.resolution:
                self._target = None
        if self._target is None:
            self._target = self._nearest_unseen(ctx) or self._patrol(ctx)
        if self._target is None:
            return None
        x, y = grid.center_of(*self._target)
        return Waypoint(float(x), float(y))

    def _nearest_unseen(self, ctx: DecisionContext) -> tuple[int, int] | None:
        grid = ctx.world.occupancy
        candidates = ~ctx.seen.grid & ~grid.blocked
        if not candidates.any():
            return None
        rows, cols = np.nonzero(candidates)
        res = grid.resolution
        xs = (cols + 0.5) * res
        ys = (rows + 0.5) * res
        d2 = (xs - ctx.agent.pos[0]) ** 2 + (ys - ctx.agent.pos[1]) ** 2
        best = int(np.argmin(d2))  # first minimum: lowest flat cell index
        return int(rows[best]), int(cols[best])

    def _patrol(self, ctx: DecisionContext) -> tuple[int, int] | None:
        rows, cols = np.nonzero(~ctx.world.occupancy.blocked)
        if len(rows) == 0:
            return None
        i = int(ctx.rng.integers(len(rows)))
        return int(rows[i]), int(cols[i])


class HiderHeuristic:
    """Hold position until a seeker is visible, then flee along the absolute
    direction with the best escape score."""

    def decide(self, ctx: DecisionContext) -> Waypoint | None:
        world, agent = ctx.world, ctx.agent
        seekers = visible_opponents(world, agent)
        if not seekers:
            return Waypoint(float(agent.pos[0]), float(agent.pos[1]))  # hold
        direction = best_escape_direction(
            agent.pos, seekers, world.obstacles, world.config
        )
        return self._project(ctx, direction)

    def _project(self, ctx: DecisionContext, direction: float) -> Waypoint:
        """Project the lookahead endpoint into free space along the chosen
        ray: walk the endpoint back until it is traversable. A mostly
        blocked ray therefore yields a short hop, not a detour."""
        world = ctx.world
        u = np.array([math.cos(direction), math.sin(direction)])
        side = world.config.arena_side
        for frac in (1.0, 0.75, 0.5, 0.25):
            target = ctx.agent.pos + u * (ESCAPE_LOOKAHEAD * frac)
            target = np.clip(target, AGENT_RADIUS, side - AGENT_RADIUS)
            if point_clearance(world.obstacles, target) > AGENT_RADIUS:
                return Waypoint(float(target[0]), float(target[1]))
        return Waypoint(float(ctx.agent.pos[0]), float(ctx.agent.pos[1]))


def intercept_time(
    hider_pos: np.ndarray,
    direction: np.ndarray,
    hider_speed: float,
    seeker_pos: np.ndarray,
    seeker_speed: float,
    cap: float = INTERCEPT_CAP,
) -> float:
    """Constant-bearing time-to-intercept of a hider running along
    direction, capped at `cap` seconds: a strictly faster hider has no
    intercept along most rays, and an uncapped time would drown out the
    clearance penalties that actually discriminate between safe routes.
    """
    r = hider_pos - seeker_pos
    vh = direction * hider_speed
    a = hider_speed * hider_speed - seeker_speed * seeker_speed
    b = 2.0 * float(r @ vh)
    c = float(r @ r)
    if c <= 1e-18:
        return 0.0
    t = _moving_root(a, b, c)
    return cap if t is None else min(t, cap)


def chase_time_to_stop(
    hider_pos: np.ndarray,
    direction: np.ndarray,
    seeker_pos: np.ndarray,
    seeker_speed: float,
    run_length: float = ESCAPE_LOOKAHEAD,
) -> float:
    """Time for a seeker to walk to the point where this hop ends."""
    stop = hider_pos + direction * run_length
    return float(np.hypot(stop[0] - seeker_pos[0], stop[1] - seeker_pos[1])) / seeker_speed


def _moving_root(a: float, b: float, c: float) -> float | None:
    """Smallest t >= 0 with a t^2 + b t + c = 0, else None."""
    if abs(a) < 1e-12:
        if b >= 0.0:
            return None
        return -c / b
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return None
    sq = math.sqrt(disc)
    roots = [t for t in ((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)) if t >= 0.0]
    return min(roots) if roots else None


def escape_score(
    pos: np.ndarray,
    direction: float,
    seekers: list[AgentState],
    obstacles: tuple[Obstacle, ...],
    config,
    lam_wall: float = LAM_WALL,
    lam_obs: float = LAM_OBS,
    run_length: float = ESCAPE_LOOKAHEAD,
) -> float:
    """Worst-case time-to-intercept along a direction, discounted by the
    proximity of the wall and the nearest obstacle along that ray.

    The small chase-to-stop term grades directions the intercept cap left
    tied, so the argmax is strict: fleeing straight away from a lone seeker
    beats every other capped direction."""
    u = np.array([math.cos(direction), math.sin(direction)])
    t_min = min(
        intercept_time(pos, u, config.hider_speed, s.pos, config.seeker_speed)
        for s in seekers
    )
    t_min += ESCAPE_TIME_WEIGHT * min(
        chase_time_to_stop(pos, u, s.pos, config.seeker_speed, run_length)
        for s in seekers
    )
    d_wall = ray_wall_distance(pos, u, config.arena_side, config.hider_range)
    d_obs = ray_obstacle_distance(pos, u, config.hider_range, obstacles)
    score = t_min
    if d_wall > 1e-9:
        score -= lam_wall / d_wall
    else:
        score = -math.inf
    if d_obs > 1e-9:
        score -= lam_obs / d_obs
    else:
        score = -math.inf
    return score


def best_escape_direction(
    pos: np.ndarray,
    seekers: list[AgentState],
    obstacles: tuple[Obstacle, ...],
    config,
    n_directions: int = N_ESCAPE_DIRECTIONS,
) -> float:
    """Argmax of the escape score over evenly spaced absolute directions.
    Ties break toward the lower direction index."""
    best_dir = 0.0
    best_score = -math.inf
    for k in range(n_directions):
        theta = 2.0 * math.pi * k / n_directions
        s = escape_score(pos, theta, seekers, obstacles, config)
        if s > best_score:
            best_score = s
            best_dir = theta
    return best_dir


def make_policy(role: Role):
    return SeekerHeuristic() if role is Role.SEEKER else HiderHeuristic()
