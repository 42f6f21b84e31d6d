"""Plain key=value config files mirroring WorldConfig plus the scripted
policy constants. Lines are `key = value`; `#` starts a comment;
obstacle_types is a comma-separated list.

    arena_side = 50.0
    n_obstacles = 5
    obstacle_types = Cross, Rectangle, LShape, Cylinder
    ...
    lam_wall = 2.0
"""

from __future__ import annotations

from pathlib import Path

from . import heuristics
from .world import ShapeKind, WorldConfig

HEURISTIC_KEYS = {
    "n_escape_directions": ("N_ESCAPE_DIRECTIONS", int),
    "escape_lookahead": ("ESCAPE_LOOKAHEAD", float),
    "lam_wall": ("LAM_WALL", float),
    "lam_obs": ("LAM_OBS", float),
    "intercept_cap": ("INTERCEPT_CAP", float),
    "escape_time_weight": ("ESCAPE_TIME_WEIGHT", float),
}

_INT_FIELDS = {"n_obstacles", "n_seekers", "n_hiders", "control_period", "seed"}
_FLOAT_FIELDS = {
    "arena_side",
    "max_time",
    "seeker_speed",
    "hider_speed",
    "seeker_range",
    "hider_range",
    "physics_dt",
    "catch_radius",
}


class ConfigFileError(ValueError):
    pass


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigFileError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip().lower()
        if key in out:
            raise ConfigFileError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def load_config(path) -> tuple[WorldConfig, dict[str, float]]:
    """Read a config file; returns the world config and the scripted-policy
    constants found (already applied to the policy module)."""
    pairs = parse_config_text(Path(path).read_text())
    kwargs: dict = {}
    heuristic: dict[str, float] = {}
    unknown = []
    for key, value in pairs.items():
        try:
            if key in _INT_FIELDS:
                kwargs[key] = int(value)
            elif key in _FLOAT_FIELDS:
                kwargs[key] = float(value)
            elif key == "obstacle_types":
                kwargs[key] = tuple(
                    ShapeKind(v.strip()) for v in value.split(",") if v.strip()
                )
            elif key in HEURISTIC_KEYS:
                attr, cast = HEURISTIC_KEYS[key]
                heuristic[key] = cast(value)
                setattr(heuristics, attr, cast(value))
            else:
                unknown.append(key)
        except ValueError as e:
            raise ConfigFileError(f"key {key!r}: bad value {value!r} ({e})") from e
    if unknown:
        raise ConfigFileError(f"unknown keys: {', '.join(sorted(unknown))}")
    try:
        return WorldConfig(**kwargs), heuristic
    except ValueError as e:
        raise ConfigFileError(str(e)) from e


def dump_config(config: WorldConfig, include_heuristics: bool = True) -> str:
    lines = ["# world"]
    for key, value in config.to_dict().items():
        if key == "obstacle_types":
            value = ", ".join(value)
        lines.append(f"{key} = {value}")
    if include_heuristics:
        lines.append("")
        lines.append("# scripted policies")
        for key, (attr, _) in HEURISTIC_KEYS.items():
            lines.append(f"{key} = {getattr(heuristics, attr)}")
    return "\n".join(lines) + "\n"


def save_config(config: WorldConfig, path, include_heuristics: bool = True) -> None:
    Path(path).write_text(dump_config(config, include_heuristics))
