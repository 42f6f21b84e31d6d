"""Synthetic dataset fixtures written in the recorded-episode layout.

Real recorded data lives in fixtures/tiny (three short 2v1 episodes); the
writers here fabricate arbitrarily shaped datasets for tests that need
controlled poses, sources, or agent counts without running a simulator.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from PIL import Image

FIXTURES = Path(__file__).parent / "fixtures"
TINY = FIXTURES / "tiny"


def linear_pose(episode: int, agent_id: int, tick_index: int):
    x = 5.0 + (1.3 * tick_index + 7.0 * episode) % 38.0
    y = 8.0 + 6.0 * agent_id + 0.4 * tick_index % 30.0
    return (x, y, 0.2 * tick_index)


def constant_pose(episode: int, agent_id: int, tick_index: int):
    return (32.5, 40.0, 0.7)


def _frame(px: int, pose, side: float, rng) -> np.ndarray:
    """Noise frame with a bright blob at the agent's pixel position, so the
    pose is in principle recoverable from pixels."""
    rgb = rng.integers(0, 60, size=(px, px, 3), dtype=np.uint8)
    cx = min(px - 1, int(pose[0] / side * px))
    cy = min(px - 1, int(pose[1] / side * px))
    lo_y, hi_y = max(0, cy - 1), min(px, cy + 2)
    lo_x, hi_x = max(0, cx - 1), min(px, cx + 2)
    rgb[lo_y:hi_y, lo_x:hi_x] = 255
    mask = np.zeros((px, px), dtype=np.uint8)
    mask[lo_y:hi_y, lo_x:hi_x] = 255
    return rgb, mask


def write_synthetic_dataset(
    root,
    n_episodes: int = 3,
    n_ticks: int = 12,
    n_seekers: int = 2,
    side: float = 50.0,
    px: int = 16,
    pose_fn=linear_pose,
    source_fn=None,
    control_period: int = 5,
    seed: int = 0,
) -> Path:
    """Write `n_episodes` fabricated episodes under `root` and return it.

    source_fn(episode, agent_id, tick_index) -> "Human" | "Heuristic";
    default marks everything Heuristic.
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    if source_fn is None:
        source_fn = lambda e, a, t: "Heuristic"

    entries = []
    for e in range(n_episodes):
        eid = f"syn{e:03d}"
        ep_dir = root / f"ep_{eid}"
        (ep_dir / "frames").mkdir(parents=True, exist_ok=True)
        lines = []
        for t in range(n_ticks):
            tick = t * control_period
            for aid in range(n_seekers):
                pose = pose_fn(e, aid, t)
                stem = f"frames/t{tick:05d}_a{aid}"
                rgb, mask = _frame(px, pose, side, rng)
                Image.fromarray(rgb).save(ep_dir / f"{stem}_rgb.png")
                Image.fromarray(mask, mode="L").save(ep_dir / f"{stem}_mask.png")
                lines.append(
                    json.dumps(
                        {
                            "episode_id": eid,
                            "tick": tick,
                            "agent_id": aid,
                            "obs_ref": stem,
                            "pose": list(pose),
                            "issued_waypoint": None,
                            "control_source": source_fn(e, aid, t),
                            "setting": [n_seekers, 1],
                        }
                    )
                )
        (ep_dir / "steps.jsonl").write_text("\n".join(lines) + "\n")
        meta = {
            "format_version": 1,
            "episode_id": eid,
            "seed": e,
            "setting": [n_seekers, 1],
            "config": {"arena_side": side},
            "outcome": "timeout",
            "catch_times": [],
            "trajectory_hash": "",
            "n_decision_ticks": n_ticks,
            "n_steps": n_ticks * n_seekers,
        }
        (ep_dir / "meta.json").write_text(json.dumps(meta, indent=1))
        entries.append(
            {
                "episode_id": eid,
                "setting": [n_seekers, 1],
                "n_steps": n_ticks * n_seekers,
                "n_decision_ticks": n_ticks,
            }
        )

    manifest = {
        "name": "synthetic",
        "format_version": 1,
        "config": {"arena_side": side},
        "episodes": entries,
        "settings": [[n_seekers, 1]],
        "episode_count": len(entries),
        "total_samples": sum(e["n_steps"] for e in entries),
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return root


def expected_normalized(pose, side: float = 50.0) -> np.ndarray:
    x, y, o = pose
    return np.array(
        [2 * x / side - 1, 2 * y / side - 1, math.sin(o), math.cos(o)], dtype=np.float32
    )
