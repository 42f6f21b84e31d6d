"""Command line front: run episodes, evaluate teams, serve guided sessions.

    hideseek sim run --setting 3v3 --seed 7 --episodes 5
    hideseek eval --setting 3v3 --seeds 3 --episodes 150 --out report/
    hideseek guide serve --port 8000 --record sessions/
"""

from __future__ import annotations

import argparse
import json
import sys

from .bridge import PolicyBinding, bind_team, make_team_policies
from .configfile import load_config
from .episode import EpisodeAborted, EpisodeEngine
from .evaluate import emit_report, episode_seed, run_eval
from .world import WorldConfig, parse_setting


def _world_config(args) -> WorldConfig:
    if getattr(args, "config", None):
        config, _ = load_config(args.config)
    else:
        config = WorldConfig()
    if getattr(args, "setting", None):
        config = config.with_setting(args.setting)
    return config


def _bindings(args, config) -> list[PolicyBinding] | None:
    spec = getattr(args, "bind", None)
    if not spec or spec == "heuristic":
        return None
    return bind_team(
        config.setting, spec, endpoint=getattr(args, "endpoint", "") or ""
    )


def cmd_sim_run(args) -> int:
    config = _world_config(args)
    bindings = _bindings(args, config)
    recorder_dir = getattr(args, "record", None)
    failures = 0
    for ep in range(args.episodes):
        seed = args.seed if args.episodes == 1 else episode_seed(args.seed, ep)
        recorder = None
        if recorder_dir:
            from .data import DatasetRecorder, write_episode

            recorder = DatasetRecorder()
        policies = make_team_policies(bindings, args.deadline_ms) if bindings else None
        try:
            engine = EpisodeEngine(config, seed, policies=policies, recorder=recorder)
            result = engine.run()
        except EpisodeAborted as e:
            print(f"episode {ep} seed={seed}: ABORTED ({e})")
            failures += 1
            continue
        line = {
            "episode": ep,
            "seed": seed,
            "outcome": result.outcome.value,
            "duration": round(result.duration, 2),
            "catch_times": {
                str(k): (round(v, 2) if v is not None else None)
                for k, v in result.catch_times.items()
            },
            "trajectory_hash": engine.trajectory_hash,
        }
        print(json.dumps(line))
        if recorder_dir:
            write_episode(recorder.log, recorder_dir)
    return 1 if failures else 0


def cmd_eval(args) -> int:
    config = _world_config(args)
    bindings = _bindings(args, config)
    report = run_eval(
        config,
        bindings=bindings,
        n_seeds=args.seeds,
        episodes_per_seed=args.episodes,
        combination=args.bind or "heuristic",
        parallelism=args.parallelism,
        mask_teammates=args.mask_teammates,
    )
    csv_path, md_path = emit_report([report], args.out)
    print(f"{report.setting} {report.combination}: {report.mean:.1f}±{report.std:.1f}%")
    if report.unreliable:
        print(f"unreliable: {report.aborted}/{report.total} episodes aborted")
    print(f"wrote {csv_path} and {md_path}")
    return 0


def cmd_guide_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(static_dir=args.static, record_dir=args.record)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hideseek")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("sim", help="run episodes headless")
    sim_sub = sim.add_subparsers(dest="sim_command", required=True)
    run = sim_sub.add_parser("run", help="run one or more episodes")
    run.add_argument("--setting", default=None, help="like 3v3")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--episodes", type=int, default=1)
    run.add_argument("--bind", default=None, help="'heuristic' or 'name:count,...'")
    run.add_argument("--endpoint", default=None, help="host:port for remote policies")
    run.add_argument("--deadline-ms", type=float, default=100.0)
    run.add_argument("--config", default=None, help="config file path")
    run.add_argument("--record", default=None, help="dataset output directory")
    run.set_defaults(fn=cmd_sim_run)

    ev = sub.add_parser("eval", help="batch evaluation with a report")
    ev.add_argument("--setting", default="3v3")
    ev.add_argument("--bind", default=None)
    ev.add_argument("--endpoint", default=None)
    ev.add_argument("--seeds", type=int, default=3)
    ev.add_argument("--episodes", type=int, default=150)
    ev.add_argument("--mask-teammates", action="store_true")
    ev.add_argument("--parallelism", type=int, default=1)
    ev.add_argument("--config", default=None)
    ev.add_argument("--out", default="report")
    ev.set_defaults(fn=cmd_eval)

    guide = sub.add_parser("guide", help="guided live sessions")
    guide_sub = guide.add_subparsers(dest="guide_command", required=True)
    serve = guide_sub.add_parser("serve", help="serve the guidance API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--record", default=None, help="write finished sessions here")
    serve.add_argument("--static", default=None, help="directory with UI assets")
    serve.set_defaults(fn=cmd_guide_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
