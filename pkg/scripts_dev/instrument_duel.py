"""Instrument 3v3 episodes: per-hider min gap, stall decisions, catch context."""
import sys
import numpy as np

sys.path.insert(0, "src")
from hideseek.world import WorldConfig, Role
from hideseek.episode import EpisodeEngine
from hideseek.geometry import point_clearance

N_EPS = 30


def run_one(seed):
    cfg = WorldConfig(n_seekers=3, n_hiders=3)
    eng = EpisodeEngine(cfg, seed)
    w = eng.world
    hiders = [a.id for a in w.agents if a.role is Role.HIDER]
    seekers = [a.id for a in w.agents if a.role is Role.SEEKER]
    min_gap = {h: 1e9 for h in hiders}
    min_ctx = {h: None for h in hiders}
    pressured_ticks = {h: 0 for h in hiders}
    # count hop lengths from issued commands at decisions
    stall_short = {h: 0 for h in hiders}   # hop < 2 m while pressured
    stall_zero = {h: 0 for h in hiders}    # hop < 0.3 m while pressured
    decisions = {h: 0 for h in hiders}

    while True:
        from hideseek.world import check_termination, Outcome
        if check_termination(w) is not Outcome.ONGOING:
            break
        if eng.decision_due():
            cmds = eng._decide()
            for h in hiders:
                ag = w.agent(h)
                if not ag.alive:
                    continue
                near = min(np.hypot(*(w.agent(s).pos - ag.pos)) for s in seekers)
                if near < cfg.hider_range:
                    decisions[h] += 1
                    wp = cmds.get(h)
                    if wp is not None:
                        hop = float(np.hypot(wp.x - ag.pos[0], wp.y - ag.pos[1]))
                        if hop < 2.0:
                            stall_short[h] += 1
                        if hop < 0.3:
                            stall_zero[h] += 1
            from hideseek.world import step
            step(w, cmds)
        else:
            from hideseek.world import step
            step(w, None)
        eng._update_seen()
        eng._hash_tick()
        for h in hiders:
            ag = w.agent(h)
            if not ag.alive:
                continue
            near = min(np.hypot(*(w.agent(s).pos - ag.pos)) for s in seekers)
            if near < cfg.hider_range:
                pressured_ticks[h] += 1
            if near < min_gap[h]:
                min_gap[h] = near
                wall_d = min(ag.pos[0], ag.pos[1], cfg.arena_side - ag.pos[0], cfg.arena_side - ag.pos[1])
                clr = point_clearance(w.obstacles, ag.pos)
                min_hep = sorted(np.hypot(*(w.agent(s).pos - ag.pos)) for s in seekers)
                n_close = sum(1 for d in min_hep if d < cfg.hider_range)
                min_ctx[h] = (round(wall_d, 1), round(float(clr), 1), n_close)

    res = eng.result()
    rows = []
    for h in hiders:
        caught = res.catch_times.get(h) is not None
        rows.append(
            (seed, h, caught, round(min_gap[h], 2), min_ctx[h],
             pressured_ticks[h], decisions[h], stall_short[h], stall_zero[h])
        )
    return rows, res.outcome.name


all_rows = []
outcomes = []
for ep in range(N_EPS):
    seed = int(np.random.SeedSequence((21, ep)).generate_state(1)[0])
    rows, out = run_one(seed)
    all_rows.extend(rows)
    outcomes.append(out)
    for r in rows:
        print(f"seed={r[0]:>20} hider={r[1]} caught={int(r[2])} min_gap={r[3]:>6} "
              f"ctx(wall,clr,nseek)={r[4]} pressure_ticks={r[5]:>4} dec={r[6]:>3} "
              f"short={r[7]:>3} zero={r[8]:>3}")
print("outcomes:", {o: outcomes.count(o) for o in set(outcomes)})
gaps = sorted(r[3] for r in all_rows if not r[2])
print("uncaught min-gap percentiles:", [round(np.percentile(gaps, p), 2) for p in (5, 10, 25, 50, 75)])
print("caught:", sum(r[2] for r in all_rows), "/", len(all_rows))
