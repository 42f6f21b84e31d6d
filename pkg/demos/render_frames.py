"""Render what seeker 0 sees at a few points of an episode and save the
frames as PNG pairs (RGB image + self-position mask) under ./frames."""

from pathlib import Path

from hideseek import EpisodeEngine, WorldConfig
from hideseek.observation import render_seeker_obs, save_observation

out = Path("frames")
out.mkdir(exist_ok=True)

engine = EpisodeEngine(WorldConfig().with_setting("2v2"), seed=7)
snapshots = (0, 100, 300, 600)

while engine.world.tick < max(snapshots):
    engine.advance_tick()
    if engine.world.tick in snapshots and engine.world.agent(0).alive:
        obs = render_seeker_obs(engine.world, 0, engine.seen[0])
        rgb = out / f"tick{engine.world.tick:04d}_rgb.png"
        mask = out / f"tick{engine.world.tick:04d}_mask.png"
        save_observation(obs, rgb, mask)
        print(f"wrote {rgb} ({obs.shape[0]}x{obs.shape[1]}, {obs.shape[2]} channels)")
