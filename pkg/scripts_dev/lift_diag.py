"""Per-pair diagnostics for the n=150 paired lift run. Prints each discordant
pair, intervention counts, and the final tallies."""

import sys
import time

from hideseek import EpisodeEngine, Outcome, WorldConfig, run_guided_episode
from hideseek.evaluate import episode_seed, paired_sign_test

start = int(sys.argv[1]) if len(sys.argv) > 1 else 0
stop = int(sys.argv[2]) if len(sys.argv) > 2 else 150

config = WorldConfig(n_seekers=2, n_hiders=1)
wins_plain = wins_guided = dg = dp = 0
t0 = time.monotonic()
for ep in range(start, stop):
    seed = episode_seed(7, ep)
    plain = EpisodeEngine(config, seed).run().outcome is Outcome.SUCCESS
    result, sess = run_guided_episode(config, seed, budget=10)
    guided = result.outcome is Outcome.SUCCESS
    n_iv = len(sess.history) + (1 if sess.active else 0)
    wins_plain += plain
    wins_guided += guided
    dg += guided and not plain
    dp += plain and not guided
    tag = ""
    if guided != plain:
        tag = " GUIDED-ONLY" if guided else " PLAIN-ONLY"
    if guided or plain:
        print(f"ep {ep:3d} plain={int(plain)} guided={int(guided)} iv={n_iv}{tag}", flush=True)
print(
    f"TOTALS guided {wins_guided} plain {wins_plain} disc {dg}/{dp} "
    f"p={paired_sign_test(dg, dp):.4f} elapsed {time.monotonic() - t0:.0f}s"
)
