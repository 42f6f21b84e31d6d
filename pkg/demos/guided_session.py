"""Compare a plain 2v1 run against the same seed with the scripted operator
clicking intercept waypoints for the off-ball seeker."""

from hideseek import EpisodeEngine, Outcome, WorldConfig, run_guided_episode

config = WorldConfig().with_setting("2v1")
seed = 1990

plain = EpisodeEngine(config, seed)
plain_result = plain.run()

guided_result, session = run_guided_episode(config, seed, budget=10)

print(f"plain:  {plain_result.outcome.value} in {plain_result.duration:.1f}s")
print(f"guided: {guided_result.outcome.value} in {guided_result.duration:.1f}s")
print(f"interventions issued: {len(session.history) + (1 if session.active else 0)}")
for iv in session.history:
    wx, wy = iv.waypoint
    print(
        f"  seeker {iv.seeker_id} -> ({wx:.1f}, {wy:.1f}) at tick "
        f"{iv.issue_tick}, {iv.state.value.lower()} at tick {iv.end_tick}"
    )
if guided_result.outcome is Outcome.SUCCESS and plain_result.outcome is not Outcome.SUCCESS:
    print("the clicks turned a timeout into a catch on this seed")
