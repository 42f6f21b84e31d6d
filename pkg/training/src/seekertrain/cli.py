"""seekertrain command line: train, finetune, serve."""

from __future__ import annotations

import argparse
import json
import sys

from .train import (
    METHOD_HORIZONS,
    TrainConfig,
    finetune,
    load_checkpoint,
    save_checkpoint,
    train_il,
    train_pe_n,
    train_pe_t,
    train_pe_h,
)


def _add_train_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=("desk", "paper"), default="desk")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--steps-per-epoch", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=None, help="override the method default")
    p.add_argument("--position-only", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seekertrain")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train a policy from a recorded dataset")
    train.add_argument("--method", choices=tuple(METHOD_HORIZONS), required=True)
    train.add_argument("--data", required=True, help="dataset directory")
    train.add_argument("--out", required=True, help="checkpoint directory")
    train.add_argument("--base", help="il-long checkpoint (pe-h)")
    train.add_argument("--predictor", help="teammate-predictor checkpoint (pe-n, pe-h)")
    train.add_argument("--human", help="guided dataset for the pe-h fine-tune stage")
    _add_train_opts(train)

    ft = sub.add_parser("finetune", help="frozen-encoder fine-tune on guided episodes")
    ft.add_argument("--ckpt", required=True)
    ft.add_argument("--human", required=True, help="guided dataset directory")
    ft.add_argument("--out", required=True)
    _add_train_opts(ft)

    serve = sub.add_parser("serve", help="serve a checkpoint over the policy bridge")
    serve.add_argument("--ckpt", required=True)
    serve.add_argument("--name", required=True, help="policy name clients must request")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=9000)
    return parser


def _config(args, method: str | None = None) -> TrainConfig:
    horizon = args.horizon
    if horizon is None:
        horizon = METHOD_HORIZONS[method] if method else 5
    return TrainConfig(
        horizon=horizon,
        batch_size=args.batch_size,
        lr=args.lr,
        epochs=args.epochs,
        steps_per_epoch=args.steps_per_epoch,
        preset=args.preset,
        seed=args.seed,
        position_only=args.position_only,
    )


def _cmd_train(args) -> int:
    cfg = _config(args, args.method)
    if args.method in ("il", "il-long"):
        net, meta = train_il(args.data, cfg)
        save_checkpoint(args.out, args.method, cfg, net, meta)
    elif args.method == "pe-t":
        net, meta = train_pe_t(args.data, cfg)
        save_checkpoint(args.out, args.method, cfg, net, meta)
    elif args.method == "pe-n":
        predictor = None
        if args.predictor:
            predictor, _, _ = load_checkpoint(args.predictor)
        net, predictor, meta = train_pe_n(args.data, cfg, predictor)
        save_checkpoint(args.out, args.method, cfg, net, meta, predictor=predictor)
    else:  # pe-h
        if not (args.base and args.predictor):
            print("pe-h needs --base and --predictor checkpoints", file=sys.stderr)
            return 2
        base, _, _ = load_checkpoint(args.base)
        predictor, _, _ = load_checkpoint(args.predictor)
        net, meta = train_pe_h(args.data, cfg, base, predictor, human_dir=args.human)
        save_checkpoint(args.out, args.method, cfg, net, meta)
    summary = json.loads((__import__("pathlib").Path(args.out) / "meta.json").read_text())
    curve = summary.get("curve") or {}
    val = (curve.get("val") or [float("nan")])[-1]
    print(f"{args.method}: saved {args.out} (final val loss {val:.4f})")
    return 0


def _cmd_finetune(args) -> int:
    net, predictor, meta = load_checkpoint(args.ckpt)
    cfg = _config(args)
    cfg.horizon = meta["horizon"]
    cfg.preset = meta["preset"]
    cfg.freeze_encoder = True
    cfg.balance_batches = True
    result = finetune(net, args.human, cfg, predictor=predictor)
    save_checkpoint(
        args.out,
        meta["method"],
        cfg,
        net,
        {"curve": result["curve"], "finetuned_from": str(args.ckpt)},
        predictor=predictor,
    )
    print(f"finetuned {args.ckpt} -> {args.out}")
    return 0


def _cmd_serve(args) -> int:
    from .serve import serve_checkpoint

    server = serve_checkpoint(args.ckpt, args.name, args.host, args.port)
    print(f"serving {args.name} from {args.ckpt} on {server.endpoint}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train":
        return _cmd_train(args)
    if args.command == "finetune":
        return _cmd_finetune(args)
    return _cmd_serve(args)


if __name__ == "__main__":
    sys.exit(main())
