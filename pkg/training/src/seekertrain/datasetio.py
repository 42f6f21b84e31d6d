"""Reader for the recorded-episode dataset layout.

The simulator writes `root/manifest.json`, `root/ep_<id>/meta.json`,
`root/ep_<id>/steps.jsonl` and `root/ep_<id>/frames/*_{rgb,mask}.png`.
This module consumes those files directly; it has no dependency on the
simulator package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

FORMAT_VERSION = 1
FRAME_STACK = 5

SOURCE_HUMAN = "Human"
SOURCE_HEURISTIC = "Heuristic"


class DatasetReadError(Exception):
    """Missing or inconsistent dataset files; the message names the file."""


def load_manifest(root) -> dict:
    path = Path(root) / "manifest.json"
    if not path.exists():
        raise DatasetReadError(f"no manifest at {path}")
    manifest = json.loads(path.read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DatasetReadError(
            f"dataset format {manifest.get('format_version')} unsupported "
            f"(reader expects {FORMAT_VERSION})"
        )
    return manifest


def normalize_pose(pose, arena_side: float) -> np.ndarray:
    """(x, y, o) -> (x_hat, y_hat, sin o, cos o), coordinates in [-1, 1]."""
    x, y, o = pose
    return np.array(
        [
            2.0 * x / arena_side - 1.0,
            2.0 * y / arena_side - 1.0,
            math.sin(o),
            math.cos(o),
        ],
        dtype=np.float32,
    )


def _load_frame(stem: Path) -> np.ndarray:
    rgb = np.asarray(Image.open(f"{stem}_rgb.png").convert("RGB"), dtype=np.uint8)
    mask = np.asarray(Image.open(f"{stem}_mask.png").convert("L"), dtype=np.uint8)
    return np.concatenate([rgb, mask[:, :, None]], axis=2)


@dataclass
class SeekerTrack:
    """One seeker's decision-tick sequence in one episode."""

    episode_id: str
    agent_id: int
    ticks: list[int]
    frames: np.ndarray             # D x H x W x 4 uint8
    poses: np.ndarray              # D x 3 raw (x, y, o)
    labels: np.ndarray             # D x 4 normalized pose
    sources: list[str]

    def __len__(self) -> int:
        return len(self.ticks)


@dataclass
class EpisodeData:
    episode_id: str
    arena_side: float
    tracks: dict[int, SeekerTrack] = field(default_factory=dict)

    def seeker_ids(self) -> list[int]:
        return sorted(self.tracks)


def read_episode(root, episode_id: str, downsample: int = 1) -> EpisodeData:
    """Load one episode's seeker tracks. `downsample` strides frame pixels
    (2 turns the stored 156px frames into the 78px desk input)."""
    ep_dir = Path(root) / f"ep_{episode_id}"
    meta_path = ep_dir / "meta.json"
    if not meta_path.exists():
        raise DatasetReadError(f"no episode at {ep_dir}")
    meta = json.loads(meta_path.read_text())
    if meta.get("format_version") != FORMAT_VERSION:
        raise DatasetReadError(f"episode {episode_id}: bad format version")
    side = float(meta["config"]["arena_side"])

    by_agent: dict[int, list[dict]] = {}
    with open(ep_dir / "steps.jsonl") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                step = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetReadError(
                    f"episode {episode_id}: bad step at line {lineno}: {exc}"
                ) from exc
            by_agent.setdefault(int(step["agent_id"]), []).append(step)

    episode = EpisodeData(episode_id=episode_id, arena_side=side)
    for aid, steps in by_agent.items():
        steps.sort(key=lambda s: s["tick"])
        frames = []
        for step in steps:
            frame = _load_frame(ep_dir / step["obs_ref"])
            if downsample > 1:
                frame = frame[::downsample, ::downsample]
            frames.append(frame)
        episode.tracks[aid] = SeekerTrack(
            episode_id=episode_id,
            agent_id=aid,
            ticks=[int(s["tick"]) for s in steps],
            frames=np.stack(frames),
            poses=np.array([s["pose"] for s in steps], dtype=np.float64),
            labels=np.stack([normalize_pose(s["pose"], side) for s in steps]),
            sources=[s["control_source"] for s in steps],
        )
    return episode


def read_dataset(root, downsample: int = 1, limit: int | None = None) -> list[EpisodeData]:
    manifest = load_manifest(root)
    ids = [e["episode_id"] for e in manifest["episodes"]]
    if limit is not None:
        ids = ids[:limit]
    return [read_episode(root, eid, downsample) for eid in ids]


def stack_frames(track: SeekerTrack, index: int, n: int = FRAME_STACK) -> np.ndarray:
    """Frames n-1..0 steps back from index, earliest first, padded with the
    first frame at the episode start. Shape n x H x W x 4 uint8."""
    lo = max(0, index - n + 1)
    window = track.frames[lo : index + 1]
    if len(window) < n:
        pad = np.repeat(window[:1], n - len(window), axis=0)
        window = np.concatenate([pad, window])
    return window


def to_input(stacked: np.ndarray) -> np.ndarray:
    """uint8 n x H x W x 4 -> float32 (n*4) x H x W in [0, 1] for the nets."""
    n, h, w, c = stacked.shape
    arr = stacked.astype(np.float32) / 255.0
    return arr.transpose(0, 3, 1, 2).reshape(n * c, h, w)


def teammate_order(ref_xy, teammate_xy: dict[int, tuple[float, float]]) -> list[int]:
    """Teammate ids by ascending distance from ref_xy; ties by ascending id."""
    rx, ry = float(ref_xy[0]), float(ref_xy[1])
    return sorted(
        teammate_xy,
        key=lambda aid: (math.hypot(teammate_xy[aid][0] - rx, teammate_xy[aid][1] - ry), aid),
    )


@dataclass
class Sample:
    """Index card for one training sample; tensors are built lazily."""

    track: SeekerTrack
    index: int
    horizon: int
    self_label: np.ndarray            # (4,)
    team_labels: np.ndarray           # (3, 4) zero-filled where absent
    presence: np.ndarray              # (4,) bool, slot 0 = self
    source: str

    def input_tensor(self) -> np.ndarray:
        return to_input(stack_frames(self.track, self.index))


def make_self_samples(episode: EpisodeData, horizon: int) -> list[Sample]:
    """One sample per (seeker, decision index t) with t+horizon inside the
    episode; the label is that seeker's realized pose horizon steps later."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1 decision step")
    out: list[Sample] = []
    for aid in episode.seeker_ids():
        track = episode.tracks[aid]
        for t in range(len(track) - horizon):
            out.append(
                Sample(
                    track=track,
                    index=t,
                    horizon=horizon,
                    self_label=track.labels[t + horizon],
                    team_labels=np.zeros((3, 4), dtype=np.float32),
                    presence=np.array([True, False, False, False]),
                    source=track.sources[t],
                )
            )
    return out


def make_team_samples(episode: EpisodeData, horizon: int) -> list[Sample]:
    """Self samples extended with teammate future poses in distance order
    computed at the sample tick; absent slots stay zero with presence False."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1 decision step")
    out: list[Sample] = []
    ids = episode.seeker_ids()
    for aid in ids:
        track = episode.tracks[aid]
        for t in range(len(track) - horizon):
            tick = track.ticks[t]
            mates: dict[int, tuple[float, float]] = {}
            future: dict[int, np.ndarray] = {}
            for other in ids:
                if other == aid:
                    continue
                mate = episode.tracks[other]
                try:
                    idx = mate.ticks.index(tick)
                except ValueError:
                    continue
                if idx + horizon >= len(mate):
                    continue
                mates[other] = (mate.poses[idx][0], mate.poses[idx][1])
                future[other] = mate.labels[idx + horizon]
            team = np.zeros((3, 4), dtype=np.float32)
            presence = np.array([True, False, False, False])
            for slot, mid in enumerate(teammate_order(track.poses[t][:2], mates)):
                team[slot] = future[mid]
                presence[slot + 1] = True
            out.append(
                Sample(
                    track=track,
                    index=t,
                    horizon=horizon,
                    self_label=track.labels[t + horizon],
                    team_labels=team,
                    presence=presence,
                    source=track.sources[t],
                )
            )
    return out


def split_by_episode(samples: list[Sample], val_fraction: float, seed: int):
    """Deterministic train/validation split on episode identity, never on
    steps, so no episode leaks across the boundary."""
    ids = sorted({s.track.episode_id for s in samples})
    rng = np.random.default_rng(seed)
    rng.shuffle(ids)
    n_val = max(1, int(round(len(ids) * val_fraction))) if len(ids) > 1 else 0
    val_ids = set(ids[:n_val])
    train = [s for s in samples if s.track.episode_id not in val_ids]
    val = [s for s in samples if s.track.episode_id in val_ids]
    return train, val


def balanced_batches(samples: list[Sample], batch_size: int, epochs_len: int, rng):
    """Yield index batches with exactly half Human and half Heuristic
    samples, drawn uniformly with replacement within class."""
    if batch_size % 2 != 0:
        raise ValueError("balanced batches need an even batch size")
    human = [i for i, s in enumerate(samples) if s.source == SOURCE_HUMAN]
    heuristic = [i for i, s in enumerate(samples) if s.source == SOURCE_HEURISTIC]
    if not human or not heuristic:
        raise ValueError(
            "balanced sampling needs both control sources; "
            "use plain uniform batches for single-source data"
        )
    half = batch_size // 2
    for _ in range(epochs_len):
        picks = [human[int(rng.integers(len(human)))] for _ in range(half)]
        picks += [heuristic[int(rng.integers(len(heuristic)))] for _ in range(half)]
        yield picks
