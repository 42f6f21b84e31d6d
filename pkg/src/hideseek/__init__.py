"""Deterministic multi-agent hide-and-seek workbench: simulation, scripted
baselines, observation rendering, episode datasets, live guided sessions,
remote policy serving, and batch evaluation."""

from .bridge import BridgeError, BridgeTimeout, PolicyBinding, PolicyServer, bind_team
from .data import DatasetRecorder, make_pairs, read_episode, write_episode
from .episode import EpisodeAborted, EpisodeEngine, PolicyError, run_episode
from .evaluate import config_hash, emit_report, episode_seed, paired_sign_test, run_eval
from .geometry import Obstacle, OccupancyGrid, SeenGrid, ShapeKind, visible
from .guidance import ScriptedIntervener, Session, run_guided_episode
from .observation import FrameStack, render_seeker_obs
from .planning import GoalUnreachable, plan_path
from .world import (
    AgentState,
    EpisodeResult,
    Outcome,
    Role,
    Waypoint,
    WorldConfig,
    WorldState,
    check_termination,
    generate_map,
    spawn_agents,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "AgentState",
    "BridgeError",
    "BridgeTimeout",
    "DatasetRecorder",
    "EpisodeAborted",
    "EpisodeEngine",
    "EpisodeResult",
    "FrameStack",
    "GoalUnreachable",
    "Obstacle",
    "OccupancyGrid",
    "Outcome",
    "PolicyBinding",
    "PolicyError",
    "PolicyServer",
    "Role",
    "ScriptedIntervener",
    "SeenGrid",
    "Session",
    "ShapeKind",
    "Waypoint",
    "WorldConfig",
    "WorldState",
    "bind_team",
    "check_termination",
    "config_hash",
    "emit_report",
    "episode_seed",
    "generate_map",
    "make_pairs",
    "paired_sign_test",
    "plan_path",
    "read_episode",
    "render_seeker_obs",
    "run_episode",
    "run_eval",
    "run_guided_episode",
    "spawn_agents",
    "step",
    "visible",
    "write_episode",
    "__version__",
]
