"""How many interventions does the scripted intervener actually issue?"""
import numpy as np
from hideseek.guidance import run_guided_episode
from hideseek.world import WorldConfig


def main():
    config = WorldConfig(n_seekers=2, n_hiders=1)
    rng = np.random.SeedSequence(777)
    used = []
    catches = 0
    for i in range(40):
        seed = int(np.random.SeedSequence((777, i)).generate_state(1, np.uint64)[0])
        result, session = run_guided_episode(config, seed, budget=10)
        n = len(session.history) + (1 if session.active else 0)
        used.append(n)
        catches += result.outcome.value == "success"
        print(f"ep {i}: interventions={n} outcome={result.outcome.value}", flush=True)
    print("mean interventions:", np.mean(used), "catches:", catches, "/40")


if __name__ == "__main__":
    main()
