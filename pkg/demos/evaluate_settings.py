"""Small evaluation sweep: catch rates for two team sizes plus one
counterfactual with the hider slowed below seeker speed, written out as a
report directory (results.csv, results.md, episodes.jsonl)."""

import warnings
from dataclasses import replace
from pathlib import Path

from hideseek import WorldConfig, emit_report, run_eval

out = Path("reports") / "sweep"
reports = []

for setting in ("1v1", "2v1"):
    # short cap keeps the demo quick; rates are not comparable to full runs
    config = replace(WorldConfig().with_setting(setting), max_time=20.0)
    reports.append(run_eval(config, n_seeds=3, episodes_per_seed=5, parallelism=1))

# counterfactual: hider slower than the seeker. The config validator flags
# this as non-canonical, which is exactly what we want here.
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    slow = replace(WorldConfig().with_setting("1v1"), max_time=20.0, hider_speed=2.0)
    reports.append(
        run_eval(slow, n_seeds=3, episodes_per_seed=5, combination="heuristic-slow-hider")
    )

for report in reports:
    print(
        f"{report.setting} {report.combination}: mean catch rate "
        f"{report.mean:.1f}% (std {report.std:.1f}, {report.total} episodes)"
    )

emit_report(reports, out)
print(f"wrote {out}/results.csv, results.md, episodes.jsonl")
