"""Log the world context of every scripted-intervener click on selected
episodes, to find a gate separating helpful clicks from harmful ones."""

import numpy as np

import hideseek.guidance as g
from hideseek import WorldConfig, run_guided_episode
from hideseek.evaluate import episode_seed
from hideseek.world import Role

EPISODES = {
    6: "DG", 8: "DG", 28: "DG", 33: "DG", 117: "DG", 121: "DG",
    63: "DP", 98: "DP", 112: "DP",
    21: "BOTH", 23: "BOTH",
}

orig_plan = g.ScriptedIntervener._plan
log = []


def spy_plan(self, world, seekers, velocities):
    out = orig_plan(self, world, seekers, velocities)
    if out is None:
        return None
    seeker_id, point = out
    hider = next(a for a in world.agents if a.role is Role.HIDER and a.alive)
    dists = sorted(float(np.hypot(*(s.pos - hider.pos))) for s in seekers)
    v = velocities.get(hider.id)
    speed = float(np.hypot(*v)) if v is not None else 0.0
    pt_d = float(np.hypot(*(point - hider.pos)))
    log.append(
        f"    tick {world.tick:4d} click s{seeker_id} d_chaser={dists[0]:5.1f} "
        f"d_free={dists[1]:5.1f} hspeed={speed:4.1f} pt_ahead={pt_d:5.1f}"
    )
    return out


g.ScriptedIntervener._plan = spy_plan

config = WorldConfig(n_seekers=2, n_hiders=1)
for ep, tag in EPISODES.items():
    log.clear()
    result, sess = run_guided_episode(config, episode_seed(7, ep), budget=10)
    print(f"ep {ep:3d} [{tag}] guided_outcome={result.outcome.value} clicks={len(log)}")
    for line in log:
        print(line)
