"""Sweep ESCAPE_TIME_WEIGHT: 3v3 success + catches, 1v1-with-obstacles success."""
import sys
import time
import numpy as np

sys.path.insert(0, "src")
import hideseek.heuristics as H
from hideseek.world import WorldConfig, Outcome
from hideseek.episode import EpisodeEngine

N = 40


def batch(cfg_kw, salt, n):
    wins = 0
    catches = 0
    for ep in range(n):
        seed = int(np.random.SeedSequence((salt, ep)).generate_state(1)[0])
        eng = EpisodeEngine(WorldConfig(**cfg_kw), seed)
        res = eng.run()
        wins += res.outcome is Outcome.SUCCESS
        catches += sum(1 for t in res.catch_times.values() if t is not None)
    return wins, catches


for w in (0.3, 0.6, 1.0, 1.5):
    H.ESCAPE_TIME_WEIGHT = w
    t0 = time.time()
    wins3, c3 = batch(dict(n_seekers=3, n_hiders=3), 11, N)
    wins1, c1 = batch(dict(n_seekers=1, n_hiders=1), 13, N)
    print(
        f"w={w}: 3v3 {wins3}/{N} ({c3} catches)   1v1-obst {wins1}/{N}   "
        f"({time.time() - t0:.0f}s)",
        flush=True,
    )
