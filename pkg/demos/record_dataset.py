"""Record a handful of episodes to disk, read them back, and build
self-prediction training pairs at a few horizons."""

from dataclasses import replace
from pathlib import Path

from hideseek import (
    DatasetRecorder,
    EpisodeEngine,
    WorldConfig,
    make_pairs,
    read_episode,
    write_episode,
)
from hideseek.data import read_manifest

out = Path("datasets") / "demo"
config = replace(WorldConfig().with_setting("2v1"), max_time=30.0)

for i in range(5):
    recorder = DatasetRecorder(episode_id=f"demo{i}")
    engine = EpisodeEngine(config, seed=5000 + i, recorder=recorder)
    engine.run()
    write_episode(recorder.log, out)

manifest = read_manifest(out)
print(f"recorded {manifest['episode_count']} episodes, "
      f"{manifest['total_samples']} recorded steps")

logs = [read_episode(out, entry["episode_id"]) for entry in manifest["episodes"]]
first = logs[0]
print(f"first episode: {len(first.steps)} steps, outcome {first.meta.outcome}")

for horizon in (1, 5, 20):
    pairs = [p for log in logs for p in make_pairs(log, horizon)]
    print(f"horizon {horizon:>2}: {len(pairs)} (frames, future-pose) pairs")
