"""End-to-end gates. The correctness block needs no simulator (stored
fixtures only) and must finish inside ten minutes; the desk pipeline block
generates a scripted dataset through the simulator CLI, trains the
longer-horizon imitation policy at desk scale, serves it over the socket
bridge and lets it drive seekers against a slowed hider.
"""

import json
import shutil
import socket
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
import torch

from seekertrain import (
    TrainConfig,
    encoder_state_hash,
    freeze_encoder,
    il_loss,
    load_checkpoint,
    masked_team_loss,
    save_checkpoint,
    train_il,
)
from seekertrain.models import PolicyNet, SelfHead, SelfWithTeammateInput
from seekertrain.serve import serve_checkpoint

CACHE = Path(__file__).parent / "_cache"
DESK_EPISODES = 200
EVAL_EPISODES = 100
_elapsed: dict[str, float] = {}


def _timed(name):
    class _Ctx:
        def __enter__(self):
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, *exc):
            _elapsed[name] = time.perf_counter() - self.t0

    return _Ctx()


# -- correctness block ----------------------------------------------------------


def test_self_loss_matches_hand_oracle():
    with _timed("loss-oracle"):
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(100):
            b = int(rng.integers(1, 33))
            pred = rng.normal(size=(b, 4))
            target = rng.normal(size=(b, 4))
            oracle = float(((pred - target) ** 2).sum(axis=1).mean())
            got = float(il_loss(torch.from_numpy(pred), torch.from_numpy(target)))
            worst = max(worst, abs(got - oracle))
        example = float(il_loss(torch.zeros(1, 4), torch.tensor([[1.0, 1.0, 0.0, 0.0]])))
    assert worst <= 1e-6, f"loss deviates from oracle by {worst}"
    assert example == 2.0
    print(
        f"\nPASS loss oracle: max |loss - oracle| = {worst:.2e} over 100 random "
        f"batches (<=1e-6); zeros vs (1,1,0,0) = {example}"
    )


def test_gradients_match_finite_differences():
    with _timed("gradcheck"):
        from torch.func import functional_call

        torch.manual_seed(0)
        checked = []
        for head, args in (
            (SelfHead(6, hidden=8), (torch.randn(3, 6, dtype=torch.float64),)),
            (
                SelfWithTeammateInput(features=4, hidden=2),
                (
                    torch.randn(2, 4, dtype=torch.float64),
                    torch.randn(2, 3, 4, dtype=torch.float64),
                ),
            ),
        ):
            head = head.double()
            names = [n for n, _ in head.named_parameters()]
            params = tuple(
                p.detach().clone().requires_grad_() for _, p in head.named_parameters()
            )
            target = torch.randn(args[0].shape[0], 4, dtype=torch.float64)

            def f(*ps):
                return il_loss(functional_call(head, dict(zip(names, ps)), args), target)

            assert torch.autograd.gradcheck(f, params, rtol=1e-3)
            checked.append((type(head).__name__, sum(p.numel() for p in params)))

        # masked loss path
        pred = torch.randn(4, 4, 4, dtype=torch.float64, requires_grad=True)
        target = torch.randn(4, 4, 4, dtype=torch.float64)
        presence = torch.tensor([[1, 1, 0, 0]] * 4, dtype=torch.float64)
        assert torch.autograd.gradcheck(
            lambda p: masked_team_loss(p, target, presence), (pred,), rtol=1e-3
        )
    sizes = ", ".join(f"{n} ({k} params)" for n, k in checked)
    print(
        f"\nPASS gradients: finite differences agree with autograd at rel tol 1e-3 "
        f"on {sizes} and the masked team loss"
    )


def test_frozen_encoder_is_bitwise_stable():
    with _timed("frozen"):
        torch.manual_seed(1)
        results = []
        for preset, px in (("desk", 78), ("paper", 156)):
            net = PolicyNet(preset, "self")
            freeze_encoder(net.encoder)
            before = encoder_state_hash(net.encoder)
            opt = torch.optim.Adam(net.head.parameters(), lr=1e-2)
            frames = torch.rand(2, 20, px, px)
            target = torch.rand(2, 4) * 2 - 1
            for _ in range(3):
                loss = il_loss(net(frames), target)
                opt.zero_grad()
                loss.backward()
                opt.step()
            after = encoder_state_hash(net.encoder)
            assert after == before, f"{preset} encoder state drifted"
            results.append(f"{preset} {before[:12]}..")
    print(
        "\nPASS frozen encoder: sha256 of weights and running stats unchanged "
        f"through 3 optimizer steps ({'; '.join(results)})"
    )


def test_masked_loss_degenerates_to_self_loss():
    with _timed("degeneracy"):
        torch.manual_seed(2)
        worst = 0.0
        for _ in range(50):
            pred = torch.randn(7, 4, 4, dtype=torch.float64)
            target = torch.randn(7, 4, 4, dtype=torch.float64)
            presence = torch.zeros(7, 4, dtype=torch.bool)
            presence[:, 0] = True
            masked = float(masked_team_loss(pred, target, presence))
            plain = float(il_loss(pred[:, 0], target[:, 0]))
            worst = max(worst, abs(masked - plain))
    assert worst == 0.0, f"degenerate case differs from self loss by {worst}"
    print(
        "\nPASS masked degeneracy: single-present-slot team loss equals the self "
        f"loss exactly (max diff {worst:.1e} over 50 random batches)"
    )


def test_correctness_block_under_ten_minutes():
    needed = {"loss-oracle", "gradcheck", "frozen", "degeneracy"}
    missing = needed - set(_elapsed)
    assert not missing, f"correctness checks did not all run: missing {missing}"
    total = sum(_elapsed[k] for k in needed)
    assert total < 600.0, f"correctness block took {total:.0f}s (>= 10 min)"
    print(f"\nPASS correctness block runtime: {total:.1f}s (< 600s), no simulator used")


# -- desk pipeline block --------------------------------------------------------


def _run_cli(args, timeout):
    proc = subprocess.run(
        [sys.executable, "-m", "hideseek.cli", *args],
        capture_output=True,
        text=True,
        timeout=timeout,
    )
    if proc.returncode != 0:
        raise RuntimeError(
            f"hideseek {' '.join(args[:3])}... failed:\n{proc.stderr[-2000:]}"
        )
    return proc.stdout


def _desk_dataset() -> Path:
    """200 scripted 2v1 episodes against a slowed hider, cached on disk."""
    root = CACHE / "desk200"
    manifest = root / "manifest.json"
    if manifest.exists():
        try:
            if json.loads(manifest.read_text())["episode_count"] == DESK_EPISODES:
                return root
        except (KeyError, json.JSONDecodeError):
            pass
        shutil.rmtree(root)
    CACHE.mkdir(exist_ok=True)
    cfg = CACHE / "desk.ini"
    cfg.write_text("hider_speed = 4.0\nmax_time = 60.0\n")
    _run_cli(
        [
            "sim", "run",
            "--setting", "2v1",
            "--seed", "70",
            "--episodes", str(DESK_EPISODES),
            "--config", str(cfg),
            "--record", str(root),
        ],
        timeout=3600,
    )
    return root


def _desk_checkpoint(data: Path) -> Path:
    out = CACHE / "il-long-desk"
    if (out / "meta.json").exists():
        return out
    cfg = TrainConfig(
        horizon=5,
        batch_size=32,
        lr=1e-4,
        epochs=10,
        steps_per_epoch=150,
        preset="desk",
        seed=0,
    )
    net, meta = train_il(data, cfg)
    save_checkpoint(out, "il-long", cfg, net, meta)
    return out


def test_desk_pipeline_trains_and_catches():
    t0 = time.perf_counter()
    data = _desk_dataset()
    ckpt = _desk_checkpoint(data)

    meta = json.loads((ckpt / "meta.json").read_text())
    val = meta["curve"]["val"][-1]
    assert val < 0.05, (
        f"held-out action error {val:.4f} not under 0.05 "
        f"(curve {['%.3f' % v for v in meta['curve']['val']]})"
    )

    server = serve_checkpoint(ckpt, "il-long", "127.0.0.1", 0)
    server.start_background()
    try:
        host, port = server.server_address[:2]
        eval_cfg = CACHE / "desk_eval.ini"
        eval_cfg.write_text("hider_speed = 4.0\nmax_time = 60.0\n")
        stdout = _run_cli(
            [
                "sim", "run",
                "--setting", "2v1",
                "--seed", "99",
                "--episodes", str(EVAL_EPISODES),
                "--config", str(eval_cfg),
                "--bind", "il-long:2",
                "--endpoint", f"{host}:{port}",
            ],
            timeout=3600,
        )
    finally:
        server.shutdown()
        server.server_close()

    outcomes = [json.loads(line)["outcome"] for line in stdout.splitlines() if line.strip()]
    assert len(outcomes) == EVAL_EPISODES
    caught = sum(o == "success" for o in outcomes)
    elapsed = time.perf_counter() - t0
    assert caught >= 60, f"served policy caught the slowed hider in {caught}/100 episodes"
    print(
        f"\nPASS desk pipeline: held-out action error {val:.4f} (<0.05); served "
        f"policy caught the 4 m/s hider in {caught}/{EVAL_EPISODES} episodes "
        f"(>=60); block took {elapsed:.0f}s"
    )
