"""Paired 2v1 lift with looser block gating, to compare against baseline."""
import sys

sys.path.insert(0, "src")
import hideseek.guidance as guidance
from hideseek.world import WorldConfig, Outcome
from hideseek.evaluate import episode_seed, paired_sign_test
from hideseek.guidance import run_guided_episode
from hideseek.episode import EpisodeEngine

guidance._MAX_BLOCK_LATENESS_S = 3.0
_orig = guidance.corridor_block_point
guidance.corridor_block_point = lambda hp, hv, sp, vs, horizon=6.0: _orig(
    hp, hv, sp, vs, horizon
)

cfg = WorldConfig(n_seekers=2, n_hiders=1)
wins_h = wins_g = 0
disc_g = disc_h = 0
for ep in range(60):
    seed = episode_seed(7, ep)
    base = EpisodeEngine(cfg, seed).run().outcome is Outcome.SUCCESS
    res, sess = run_guided_episode(cfg, seed, budget=10)
    guided = res.outcome is Outcome.SUCCESS
    wins_h += base
    wins_g += guided
    if guided and not base:
        disc_g += 1
    if base and not guided:
        disc_h += 1
    if ep % 10 == 9:
        print(f"after {ep+1}: heuristic {wins_h} guided {wins_g} "
              f"(disc {disc_g}/{disc_h}) p={paired_sign_test(disc_g, disc_h):.4f}",
              flush=True)
print("final:", wins_h, wins_g, disc_g, disc_h, paired_sign_test(disc_g, disc_h))
