"""Trace LOS break/reveal cycles in 1v1 duels: where does the ambush chain break?"""
import sys
import numpy as np

sys.path.insert(0, "src")
from hideseek.world import WorldConfig, Role, check_termination, Outcome
from hideseek.episode import EpisodeEngine
from hideseek.geometry import visible

N_EPS = 12


def run_one(seed):
    cfg = WorldConfig(n_seekers=1, n_hiders=1)
    eng = EpisodeEngine(cfg, seed)
    w = eng.world
    sk = next(a for a in w.agents if a.role is Role.SEEKER)
    hd = next(a for a in w.agents if a.role is Role.HIDER)

    events = []          # (kind, tick, dist)
    was_vis = None
    last_break = None    # (tick, hider_pos, seeker_pos)
    hider_moved_since_break = 0.0
    prev_hpos = hd.pos.copy()

    while check_termination(w) is not Outcome.ONGOING:
        break
    while check_termination(w) is Outcome.ONGOING:
        eng.advance_tick()
        if not hd.alive:
            events.append(("CATCH", w.tick, 0.0, 0.0))
            break
        d = float(np.hypot(*(sk.pos - hd.pos)))
        vis = visible(sk.pose, (hd.pos[0], hd.pos[1]), w.obstacles, cfg.seeker_range)
        hider_moved_since_break += float(np.hypot(*(hd.pos - prev_hpos)))
        prev_hpos = hd.pos.copy()
        if was_vis is None:
            was_vis = vis
            continue
        if was_vis and not vis:
            last_break = (w.tick, hd.pos.copy(), sk.pos.copy())
            hider_moved_since_break = 0.0
            events.append(("break", w.tick, round(d, 1), None))
        elif not was_vis and vis:
            dt = (w.tick - last_break[0]) * cfg.physics_dt if last_break else None
            events.append(
                ("REVEAL", w.tick, round(d, 1),
                 (round(dt, 1), round(hider_moved_since_break, 1)) if dt is not None else None)
            )
        was_vis = vis
    return events, eng.result()


reveal_d = []
break_gap_s = []
for ep in range(N_EPS):
    seed = int(np.random.SeedSequence((31, ep)).generate_state(1)[0])
    ev, res = run_one(seed)
    breaks = [e for e in ev if e[0] == "break"]
    reveals = [e for e in ev if e[0] == "REVEAL"]
    reveal_d += [e[2] for e in reveals]
    print(f"seed={seed:>12} breaks={len(breaks):>3} reveals={len(reveals):>3} "
          f"outcome={res.outcome.name:>7}  reveal_d={[e[2] for e in reveals][:14]}")
    det = [(e[2], e[3]) for e in reveals][:8]
    print(f"   (dist, (gap_s, hider_moved)): {det}")
if reveal_d:
    print("reveal distance percentiles:",
          [round(float(np.percentile(reveal_d, p)), 2) for p in (5, 25, 50, 75, 95)])
    print("reveals<=2m:", sum(1 for d in reveal_d if d <= 2.0), "/", len(reveal_d))
