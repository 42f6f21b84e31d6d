"""Batch evaluation: settings sweeps over seeds, parallel episode execution
with order-independent aggregation, and report emission.

Episode seeds derive from (seed_index, episode_index) alone, so two arms
evaluated with the same indices play identical (map, spawn) tuples; that is
what paired comparisons rely on.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bridge import PolicyBinding, make_team_policies
from .episode import EpisodeAborted, EpisodeEngine
from .world import Outcome, WorldConfig

ABORT_RELIABILITY_LIMIT = 0.05


def episode_seed(seed_index: int, episode_index: int) -> int:
    """Deterministic 64-bit episode seed from the (seed, episode) pair."""
    return int(np.random.SeedSequence((seed_index, episode_index)).generate_state(1, np.uint64)[0])


def config_hash(config: WorldConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class EpisodeRow:
    seed_index: int
    episode_index: int
    episode_seed: int
    outcome: str                  # SUCCESS | TIMEOUT | ABORTED
    duration: float
    n_caught: int
    abort_reason: str = ""

    def succeeded(self) -> bool:
        return self.outcome == "SUCCESS"


@dataclass
class SuccessReport:
    setting: str
    combination: str
    config_hash: str
    n_seeds: int
    episodes_per_seed: int
    per_seed_rates: list[float]
    mean: float
    std: float
    aborted: int
    total: int
    unreliable: bool
    rows: list[EpisodeRow] = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        d = {
            "setting": self.setting,
            "combination": self.combination,
            "config_hash": self.config_hash,
            "n_seeds": self.n_seeds,
            "episodes_per_seed": self.episodes_per_seed,
            "per_seed_rates": self.per_seed_rates,
            "mean": self.mean,
            "std": self.std,
            "aborted": self.aborted,
            "total": self.total,
            "unreliable": self.unreliable,
        }
        return d


def _run_one(args: tuple) -> EpisodeRow:
    (config_dict, bindings, seed_index, episode_index, deadline_ms, mask_teammates) = args
    config = WorldConfig.from_dict(config_dict)
    seed = episode_seed(seed_index, episode_index)
    policies = make_team_policies(bindings, deadline_ms) if bindings else None
    try:
        engine = EpisodeEngine(config, seed, policies=policies, mask_teammates=mask_teammates)
        result = engine.run()
    except EpisodeAborted as exc:
        return EpisodeRow(seed_index, episode_index, seed, "ABORTED", 0.0, 0, str(exc))
    n_caught = sum(1 for t in result.catch_times.values() if t is not None)
    return EpisodeRow(
        seed_index,
        episode_index,
        seed,
        "SUCCESS" if result.outcome is Outcome.SUCCESS else "TIMEOUT",
        result.duration,
        n_caught,
    )


def run_eval(
    config: WorldConfig,
    bindings: list[PolicyBinding] | None = None,
    n_seeds: int = 3,
    episodes_per_seed: int = 150,
    combination: str = "heuristic",
    parallelism: int = 1,
    deadline_ms: float = 100.0,
    mask_teammates: bool = False,
) -> SuccessReport:
    """Evaluate a team over n_seeds x episodes_per_seed episodes. Success
    rates are per seed; the report carries their mean and sample std.
    Aborted episodes never enter a denominator."""

    jobs = [
        (config.to_dict(), bindings, s, e, deadline_ms, mask_teammates)
        for s in range(n_seeds)
        for e in range(episodes_per_seed)
    ]
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            rows = list(pool.map(_run_one, jobs, chunksize=8))
    else:
        rows = [_run_one(j) for j in jobs]
    rows.sort(key=lambda r: (r.seed_index, r.episode_index))

    per_seed_rates: list[float] = []
    aborted = 0
    for s in range(n_seeds):
        seed_rows = [r for r in rows if r.seed_index == s]
        aborted += sum(1 for r in seed_rows if r.outcome == "ABORTED")
        counted = [r for r in seed_rows if r.outcome != "ABORTED"]
        rate = 100.0 * sum(r.succeeded() for r in counted) / len(counted) if counted else 0.0
        per_seed_rates.append(rate)

    mean = float(np.mean(per_seed_rates)) if per_seed_rates else 0.0
    std = float(np.std(per_seed_rates, ddof=1)) if len(per_seed_rates) > 1 else 0.0
    total = len(rows)
    return SuccessReport(
        setting=config.setting,
        combination=combination,
        config_hash=config_hash(config),
        n_seeds=n_seeds,
        episodes_per_seed=episodes_per_seed,
        per_seed_rates=per_seed_rates,
        mean=mean,
        std=std,
        aborted=aborted,
        total=total,
        unreliable=(aborted / total > ABORT_RELIABILITY_LIMIT) if total else True,
        rows=rows,
    )


def paired_sign_test(wins_a: int, wins_b: int) -> float:
    """One-sided exact binomial sign test: p-value that arm A beats arm B at
    least this often on discordant pairs under the fair-coin null."""
    n = wins_a + wins_b
    if n == 0:
        return 1.0
    return sum(math.comb(n, k) for k in range(wins_a, n + 1)) / 2.0**n


REPORT_COLUMNS = (
    "setting",
    "combination",
    "mean",
    "std",
    "per_seed_rates",
    "aborted",
    "total",
    "unreliable",
    "config_hash",
)


def emit_report(reports: list[SuccessReport], out_dir) -> tuple[Path, Path]:
    """Write results.csv and results.md under out_dir; deterministic for
    identical inputs. Every report must carry all columns."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = []
    for rep in reports:
        d = rep.to_dict()
        missing = [c for c in REPORT_COLUMNS if c not in d]
        if missing:
            raise ValueError(f"report missing fields: {missing}")
        table.append(d)
    table.sort(key=lambda d: (d["setting"], d["combination"]))

    csv_path = out / "results.csv"
    with open(csv_path, "w") as fh:
        fh.write(",".join(REPORT_COLUMNS) + "\n")
        for d in table:
            row = []
            for col in REPORT_COLUMNS:
                v = d[col]
                if col == "per_seed_rates":
                    v = "|".join(f"{x:.2f}" for x in v)
                elif isinstance(v, float):
                    v = f"{v:.2f}"
                row.append(str(v))
            fh.write(",".join(row) + "\n")

    md_path = out / "results.md"
    with open(md_path, "w") as fh:
        fh.write("| setting | combination | success % (mean±std) | aborted | episodes | config |\n")
        fh.write("|---|---|---|---|---|---|\n")
        for d in table:
            flag = " (unreliable)" if d["unreliable"] else ""
            fh.write(
                f"| {d['setting']} | {d['combination']} | "
                f"{d['mean']:.1f}±{d['std']:.1f}{flag} | {d['aborted']} | "
                f"{d['total']} | {d['config_hash']} |\n"
            )
    with open(out / "episodes.jsonl", "w") as fh:
        for rep in reports:
            for r in rep.rows:
                fh.write(
                    json.dumps(
                        {
                            "setting": rep.setting,
                            "combination": rep.combination,
                            "seed_index": r.seed_index,
                            "episode_index": r.episode_index,
                            "episode_seed": r.episode_seed,
                            "outcome": r.outcome,
                            "duration": r.duration,
                            "n_caught": r.n_caught,
                            "abort_reason": r.abort_reason,
                        },
                        separators=(",", ":"),
                    )
                    + "\n"
                )
    return csv_path, md_path
