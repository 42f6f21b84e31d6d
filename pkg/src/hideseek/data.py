"""Episode recording, on-disk dataset layout, and training-sample assembly.

A dataset root looks like:

    root/manifest.json
    root/ep_<id>/meta.json
    root/ep_<id>/steps.jsonl       one record per seeker per decision tick
    root/ep_<id>/frames/t<tick>_a<agent>_rgb.png  (+ matching _mask.png)

Only seekers are recorded; hider state enters the dataset solely through the
rendered frames. Training labels are realized future poses normalized to
[-1, 1] over the arena, with orientation encoded as (sin, cos).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .episode import DecisionRecord, SOURCE_HEURISTIC, SOURCE_HUMAN
from .observation import load_observation, save_observation

FORMAT_VERSION = 1

CONTROL_SOURCES = (SOURCE_HEURISTIC, SOURCE_HUMAN)


class DatasetError(Exception):
    """Base for dataset read/write failures."""


class VersionMismatch(DatasetError):
    pass


class TruncatedEpisode(DatasetError):
    pass


class FrameReadError(DatasetError):
    """A frame file is missing or unreadable; names the offending step."""

    def __init__(self, episode_id: str, tick: int, agent_id: int, cause: str):
        super().__init__(
            f"episode {episode_id}: bad frame at tick {tick} agent {agent_id}: {cause}"
        )
        self.episode_id = episode_id
        self.tick = tick
        self.agent_id = agent_id


class EmptyClassError(DatasetError):
    """Raised when balanced sampling is impossible; fall back to plain
    uniform sampling over whatever records exist."""


@dataclass
class StepRecord:
    episode_id: str
    tick: int
    agent_id: int
    obs_ref: str
    pose: tuple[float, float, float]
    issued_waypoint: tuple[float, float, float | None] | None
    control_source: str
    setting: tuple[int, int]

    def __post_init__(self):
        if self.control_source not in CONTROL_SOURCES:
            raise ValueError(f"unknown control source {self.control_source!r}")
        if not all(math.isfinite(v) for v in self.pose):
            raise ValueError(f"non-finite pose {self.pose}")

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "StepRecord":
        d = json.loads(line)
        wp = d["issued_waypoint"]
        return cls(
            episode_id=d["episode_id"],
            tick=int(d["tick"]),
            agent_id=int(d["agent_id"]),
            obs_ref=d["obs_ref"],
            pose=tuple(d["pose"]),
            issued_waypoint=None if wp is None else tuple(wp),
            control_source=d["control_source"],
            setting=tuple(d["setting"]),
        )


@dataclass
class EpisodeMeta:
    episode_id: str
    seed: int
    setting: tuple[int, int]
    config: dict
    outcome: str
    catch_times: dict[int, float | None]
    trajectory_hash: str
    n_decision_ticks: int
    n_steps: int
    format_version: int = FORMAT_VERSION


@dataclass
class EpisodeLog:
    """In-memory form of one recorded episode. frames maps (tick, agent_id)
    to a HxWx4 uint8 tensor."""

    meta: EpisodeMeta
    steps: list[StepRecord]
    frames: dict[tuple[int, int], np.ndarray]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EpisodeLog):
            return NotImplemented
        if self.meta != other.meta or self.steps != other.steps:
            return False
        if self.frames.keys() != other.frames.keys():
            return False
        return all(np.array_equal(self.frames[k], other.frames[k]) for k in self.frames)

    def decision_ticks(self) -> list[int]:
        return sorted({s.tick for s in self.steps})

    def steps_for(self, agent_id: int) -> list[StepRecord]:
        return sorted(
            (s for s in self.steps if s.agent_id == agent_id), key=lambda s: s.tick
        )

    def seeker_ids(self) -> list[int]:
        return sorted({s.agent_id for s in self.steps})


@dataclass
class TrainingSample:
    stacked_obs: np.ndarray          # N x H x W x 4 uint8
    horizon: int                     # decision steps ahead
    self_label: np.ndarray           # (4,) in [-1, 1]
    team_labels: np.ndarray          # (3, 4), zero-filled where absent
    presence_mask: np.ndarray        # (4,) bool, slot 0 is self
    source: str

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrainingSample):
            return NotImplemented
        return (
            self.horizon == other.horizon
            and self.source == other.source
            and np.array_equal(self.stacked_obs, other.stacked_obs)
            and np.allclose(self.self_label, other.self_label)
            and np.allclose(self.team_labels, other.team_labels)
            and np.array_equal(self.presence_mask, other.presence_mask)
        )


def normalize_pose(pose: Sequence[float], arena_side: float) -> np.ndarray:
    x, y, o = pose
    return np.array(
        [2.0 * x / arena_side - 1.0, 2.0 * y / arena_side - 1.0, math.sin(o), math.cos(o)]
    )


class DatasetRecorder:
    """Recorder hook for EpisodeEngine that accumulates an EpisodeLog."""

    def __init__(self, episode_id: str | None = None):
        self._episode_id = episode_id
        self.log: EpisodeLog | None = None
        self._setting: tuple[int, int] = (0, 0)

    def on_episode_start(self, engine) -> None:
        eid = self._episode_id if self._episode_id is not None else f"{engine.seed:016x}"
        self._setting = (engine.config.n_seekers, engine.config.n_hiders)
        meta = EpisodeMeta(
            episode_id=eid,
            seed=engine.seed,
            setting=self._setting,
            config=engine.config.to_dict(),
            outcome="",
            catch_times={},
            trajectory_hash="",
            n_decision_ticks=0,
            n_steps=0,
        )
        self.log = EpisodeLog(meta=meta, steps=[], frames={})

    def on_decision(self, rec: DecisionRecord) -> None:
        log = self.log
        for aid in sorted(rec.frames):
            if not rec.alive.get(aid, False):
                continue
            wp = rec.commands.get(aid)
            log.steps.append(
                StepRecord(
                    episode_id=log.meta.episode_id,
                    tick=rec.tick,
                    agent_id=aid,
                    obs_ref=f"frames/t{rec.tick:05d}_a{aid}",
                    pose=rec.poses[aid],
                    issued_waypoint=None if wp is None else (wp.x, wp.y, wp.o),
                    control_source=rec.sources.get(aid, SOURCE_HEURISTIC),
                    setting=self._setting,
                )
            )
            log.frames[(rec.tick, aid)] = rec.frames[aid]

    def on_episode_end(self, result, trajectory_hash: str) -> None:
        meta = self.log.meta
        meta.outcome = result.outcome.name
        meta.catch_times = dict(result.catch_times)
        meta.trajectory_hash = trajectory_hash
        meta.n_decision_ticks = len(self.log.decision_ticks())
        meta.n_steps = len(self.log.steps)


def _meta_to_dict(meta: EpisodeMeta) -> dict:
    d = asdict(meta)
    d["catch_times"] = sorted(
        [aid, t] for aid, t in meta.catch_times.items()
    )
    return d


def _meta_from_dict(d: dict) -> EpisodeMeta:
    return EpisodeMeta(
        episode_id=d["episode_id"],
        seed=int(d["seed"]),
        setting=tuple(d["setting"]),
        config=d["config"],
        outcome=d["outcome"],
        catch_times={int(aid): t for aid, t in d["catch_times"]},
        trajectory_hash=d["trajectory_hash"],
        n_decision_ticks=int(d["n_decision_ticks"]),
        n_steps=int(d["n_steps"]),
        format_version=int(d["format_version"]),
    )


def write_episode(log: EpisodeLog, root_dir, dataset_name: str | None = None) -> dict:
    """Persist one episode under root_dir and refresh the manifest.
    Returns the manifest entry for this episode."""

    root = Path(root_dir)
    ep_dir = root / f"ep_{log.meta.episode_id}"
    frames_dir = ep_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)

    for (tick, aid), frame in log.frames.items():
        stem = frames_dir / f"t{tick:05d}_a{aid}"
        save_observation(frame, f"{stem}_rgb.png", f"{stem}_mask.png")

    with open(ep_dir / "steps.jsonl", "w") as fh:
        for step in sorted(log.steps, key=lambda s: (s.tick, s.agent_id)):
            fh.write(step.to_json() + "\n")

    with open(ep_dir / "meta.json", "w") as fh:
        json.dump(_meta_to_dict(log.meta), fh, indent=1)

    entry = {
        "episode_id": log.meta.episode_id,
        "setting": list(log.meta.setting),
        "n_steps": log.meta.n_steps,
        "n_decision_ticks": log.meta.n_decision_ticks,
    }
    _refresh_manifest(root, entry, log.meta, dataset_name)
    return entry


def _refresh_manifest(root: Path, entry: dict, meta: EpisodeMeta, name: str | None) -> None:
    path = root / "manifest.json"
    if path.exists():
        manifest = json.loads(path.read_text())
        if manifest["format_version"] != FORMAT_VERSION:
            raise VersionMismatch(
                f"manifest version {manifest['format_version']} != {FORMAT_VERSION}"
            )
    else:
        manifest = {
            "name": name or root.name,
            "format_version": FORMAT_VERSION,
            "config": meta.config,
            "episodes": [],
        }
    episodes = [e for e in manifest["episodes"] if e["episode_id"] != entry["episode_id"]]
    episodes.append(entry)
    episodes.sort(key=lambda e: e["episode_id"])
    manifest["episodes"] = episodes
    manifest["settings"] = sorted({tuple(e["setting"]) for e in episodes})
    manifest["settings"] = [list(s) for s in manifest["settings"]]
    manifest["episode_count"] = len(episodes)
    manifest["total_samples"] = sum(e["n_steps"] for e in episodes)
    path.write_text(json.dumps(manifest, indent=1))


def read_manifest(root_dir) -> dict:
    path = Path(root_dir) / "manifest.json"
    if not path.exists():
        raise DatasetError(f"no manifest at {path}")
    manifest = json.loads(path.read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise VersionMismatch(
            f"manifest version {manifest.get('format_version')} != {FORMAT_VERSION}"
        )
    return manifest


def read_episode(root_dir, episode_id: str) -> EpisodeLog:
    ep_dir = Path(root_dir) / f"ep_{episode_id}"
    meta_path = ep_dir / "meta.json"
    if not meta_path.exists():
        raise DatasetError(f"no episode {episode_id} under {root_dir}")
    meta_dict = json.loads(meta_path.read_text())
    if meta_dict.get("format_version") != FORMAT_VERSION:
        raise VersionMismatch(
            f"episode {episode_id}: format {meta_dict.get('format_version')} != {FORMAT_VERSION}"
        )
    meta = _meta_from_dict(meta_dict)

    steps: list[StepRecord] = []
    with open(ep_dir / "steps.jsonl") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                steps.append(StepRecord.from_json(line))
            except (json.JSONDecodeError, KeyError) as exc:
                raise TruncatedEpisode(
                    f"episode {episode_id}: bad step record at line {lineno}: {exc}"
                ) from exc
    if len(steps) != meta.n_steps:
        raise TruncatedEpisode(
            f"episode {episode_id}: {len(steps)} step records, meta says {meta.n_steps}"
        )

    frames: dict[tuple[int, int], np.ndarray] = {}
    for step in steps:
        stem = ep_dir / step.obs_ref
        try:
            frames[(step.tick, step.agent_id)] = load_observation(
                f"{stem}_rgb.png", f"{stem}_mask.png"
            )
        except Exception as exc:
            raise FrameReadError(episode_id, step.tick, step.agent_id, str(exc)) from exc
    return EpisodeLog(meta=meta, steps=steps, frames=frames)


def _stack_at(frames: list[np.ndarray], index: int, n_frames: int) -> np.ndarray:
    lo = max(0, index - n_frames + 1)
    window = frames[lo : index + 1]
    pad = [window[0]] * (n_frames - len(window))
    return np.stack(pad + window)


def make_pairs(log: EpisodeLog, horizon: int, n_frames: int = 5) -> list[TrainingSample]:
    """One self-prediction sample per (seeker, decision tick t) whose label
    tick t+horizon falls inside the episode. Labels are the seeker's own
    realized pose horizon decision steps later."""

    if horizon < 1:
        raise ValueError("horizon must be >= 1 decision step")
    side = float(log.meta.config["arena_side"])
    samples: list[TrainingSample] = []
    for aid in log.seeker_ids():
        steps = log.steps_for(aid)
        frames = [log.frames[(s.tick, s.agent_id)] for s in steps]
        for i in range(len(steps) - horizon):
            label = normalize_pose(steps[i + horizon].pose, side)
            samples.append(
                TrainingSample(
                    stacked_obs=_stack_at(frames, i, n_frames),
                    horizon=horizon,
                    self_label=label,
                    team_labels=np.zeros((3, 4)),
                    presence_mask=np.array([True, False, False, False]),
                    source=steps[i].control_source,
                )
            )
    return samples


def teammate_order(ref_pose: Sequence[float], teammate_states: Mapping[int, Sequence[float]]) -> list[int]:
    """Teammate ids sorted by ascending Euclidean distance from ref_pose;
    exact ties broken by ascending id."""

    if len(teammate_states) > 3:
        raise ValueError("at most 3 teammates supported")
    rx, ry = float(ref_pose[0]), float(ref_pose[1])
    return sorted(
        teammate_states,
        key=lambda aid: (
            math.hypot(teammate_states[aid][0] - rx, teammate_states[aid][1] - ry),
            aid,
        ),
    )


def make_team_sample(
    log: EpisodeLog, seeker_id: int, t: int, horizon: int, n_frames: int = 5
) -> TrainingSample:
    """Team-prediction sample for one seeker at decision index t: slot 0 is
    the seeker's own future pose, the teammate slots are filled in distance
    order computed at index t."""

    if horizon < 1:
        raise ValueError("horizon must be >= 1 decision step")
    side = float(log.meta.config["arena_side"])
    own = log.steps_for(seeker_id)
    if not own:
        raise DatasetError(f"no records for seeker {seeker_id}")
    if t < 0 or t + horizon >= len(own):
        raise ValueError(f"decision index {t}+{horizon} outside episode of {len(own)} decisions")

    tick = own[t].tick
    ref_xy = own[t].pose[:2]
    mates: dict[int, tuple[float, float]] = {}
    future: dict[int, tuple[float, float, float]] = {}
    for aid in log.seeker_ids():
        if aid == seeker_id:
            continue
        steps = log.steps_for(aid)
        now = next((s for s in steps if s.tick == tick), None)
        if now is None or t + horizon >= len(steps):
            continue
        mates[aid] = (now.pose[0], now.pose[1])
        future[aid] = steps[t + horizon].pose

    order = teammate_order(ref_xy, mates)
    team_labels = np.zeros((3, 4))
    presence = np.array([True, False, False, False])
    for slot, aid in enumerate(order):
        team_labels[slot] = normalize_pose(future[aid], side)
        presence[slot + 1] = True

    frames = [log.frames[(s.tick, s.agent_id)] for s in own]
    return TrainingSample(
        stacked_obs=_stack_at(frames, t, n_frames),
        horizon=horizon,
        self_label=normalize_pose(own[t + horizon].pose, side),
        team_labels=team_labels,
        presence_mask=presence,
        source=own[t].control_source,
    )


def make_team_pairs(log: EpisodeLog, horizon: int, n_frames: int = 5) -> list[TrainingSample]:
    samples = []
    for aid in log.seeker_ids():
        n = len(log.steps_for(aid))
        for t in range(n - horizon):
            samples.append(make_team_sample(log, aid, t, horizon, n_frames))
    return samples


def sample_balanced_batch(
    samples: Sequence[TrainingSample], batch_size: int, rng: np.random.Generator
) -> list[TrainingSample]:
    """Exactly batch_size/2 human-sourced and batch_size/2 heuristic-sourced
    samples, drawn uniformly with replacement within each class."""

    if batch_size % 2:
        raise ValueError("batch_size must be even")
    human = [s for s in samples if s.source == SOURCE_HUMAN]
    heuristic = [s for s in samples if s.source == SOURCE_HEURISTIC]
    if not human or not heuristic:
        raise EmptyClassError(
            "one control-source class is empty; use plain uniform sampling instead"
        )
    half = batch_size // 2
    batch = [human[i] for i in rng.integers(0, len(human), half)]
    batch += [heuristic[i] for i in rng.integers(0, len(heuristic), half)]
    return batch
