"""Run one 3v3 episode twice with the same seed and show that the runs are
bit-identical, then print what happened."""

from hideseek import EpisodeEngine, WorldConfig

config = WorldConfig().with_setting("3v3")
seed = 42

first = EpisodeEngine(config, seed)
result = first.run()

second = EpisodeEngine(config, seed)
second.run()

print(f"outcome:  {result.outcome.value} after {result.duration:.1f}s")
for hider_id, t in sorted(result.catch_times.items()):
    status = f"caught at {t:.1f}s" if t is not None else "escaped"
    print(f"hider {hider_id}: {status}")
print(f"hash:     {first.trajectory_hash}")
print(f"repeated: {first.trajectory_hash == second.trajectory_hash}")
