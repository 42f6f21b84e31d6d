"""Training pipelines over recorded episodes.

Methods:
- il:       self action at t+1 from the frame stack.
- il-long:  self pose 5 decision steps ahead.
- pe-t:     predict the whole team's actions (masked loss, serve slot 0).
- pe-n:     stage 1 trains a teammate predictor; stage 2 trains an il-long
            net whose head also sees a projection of predicted teammate
            actions (stage 1 frozen).
- pe-h:     freeze the il-long and predictor encoders, train a new head on
            their concatenated features, optionally fine-tune on guided
            episodes.

Checkpoints are directories: weights.pt + meta.json (method, preset,
optimizer settings, loss curves, encoder hash).
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .datasetio import (
    FRAME_STACK,
    Sample,
    balanced_batches,
    make_self_samples,
    make_team_samples,
    read_dataset,
    split_by_episode,
)
from .losses import il_loss, masked_team_loss
from .models import (
    ACTION_DIM,
    ConcatHeadNet,
    PolicyNet,
    PRESETS,
    encoder_state_hash,
    freeze_encoder,
)

CHECKPOINT_FORMAT = 1
DIVERGENCE_FACTOR = 10.0
VAL_FRACTION = 0.10

METHOD_HORIZONS = {"il": 1, "il-long": 5, "pe-t": 5, "pe-n": 5, "pe-h": 5}


class TrainingDiverged(RuntimeError):
    """Validation loss exceeded 10x its initial value; message carries the
    last few epoch losses for diagnosis."""


@dataclass
class TrainConfig:
    horizon: int = 5
    batch_size: int = 32
    lr: float = 1e-4
    epochs: int = 10
    steps_per_epoch: int = 100
    freeze_encoder: bool = False
    balance_batches: bool = False
    position_only: bool = False
    preset: str = "desk"
    seed: int = 0

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.batch_size < 1 or self.epochs < 1 or self.steps_per_epoch < 1:
            raise ValueError("batch_size, epochs and steps_per_epoch must be >= 1")


def collate(samples: list[Sample], idxs) -> dict[str, torch.Tensor]:
    frames = torch.from_numpy(np.stack([samples[i].input_tensor() for i in idxs]))
    self_labels = torch.from_numpy(np.stack([samples[i].self_label for i in idxs]))
    team = torch.from_numpy(
        np.stack(
            [
                np.concatenate([samples[i].self_label[None], samples[i].team_labels])
                for i in idxs
            ]
        )
    )
    presence = torch.from_numpy(np.stack([samples[i].presence for i in idxs]))
    return {
        "frames": frames,
        "self": self_labels.to(torch.float32),
        "team": team.to(torch.float32),
        "presence": presence,
    }


def _label_slice(cfg: TrainConfig) -> slice:
    # position-only mode trains on (x, y) and leaves orientation free
    return slice(0, 2) if cfg.position_only else slice(0, ACTION_DIM)


class _Loop:
    """Shared epoch loop: batching, validation, divergence abort, curves."""

    def __init__(self, samples, cfg: TrainConfig, loss_of_batch, params):
        self.cfg = cfg
        self.loss_of_batch = loss_of_batch
        self.train_set, self.val_set = split_by_episode(samples, VAL_FRACTION, cfg.seed)
        if not self.train_set:
            raise ValueError("no training samples")
        self.opt = torch.optim.Adam(params, lr=cfg.lr)
        self.rng = np.random.default_rng(cfg.seed)
        self.curve: dict[str, list[float]] = {"train": [], "val": []}

    def _batches(self):
        cfg = self.cfg
        if cfg.balance_batches:
            yield from balanced_batches(
                self.train_set, cfg.batch_size, cfg.steps_per_epoch, self.rng
            )
            return
        n = len(self.train_set)
        for _ in range(cfg.steps_per_epoch):
            yield self.rng.integers(n, size=min(cfg.batch_size, n))

    def validate(self) -> float:
        if not self.val_set:
            return math.nan
        total = 0.0
        count = 0
        with torch.no_grad():
            for lo in range(0, len(self.val_set), 64):
                idxs = range(lo, min(lo + 64, len(self.val_set)))
                loss = self.loss_of_batch(collate(self.val_set, list(idxs)))
                total += float(loss) * len(idxs)
                count += len(idxs)
        return total / count

    def run(self) -> dict[str, list[float]]:
        initial = self.validate()
        for _ in range(self.cfg.epochs):
            epoch_losses = []
            for idxs in self._batches():
                self.opt.zero_grad()
                loss = self.loss_of_batch(collate(self.train_set, list(idxs)))
                loss.backward()
                self.opt.step()
                epoch_losses.append(float(loss))
            val = self.validate()
            self.curve["train"].append(float(np.mean(epoch_losses)))
            self.curve["val"].append(val)
            if not math.isnan(initial) and not math.isnan(val):
                if not math.isfinite(val) or val > DIVERGENCE_FACTOR * max(initial, 1e-12):
                    raise TrainingDiverged(
                        f"validation loss {val:.4g} exceeded 10x initial {initial:.4g}; "
                        f"curve tail {self.curve['val'][-3:]}"
                    )
        return self.curve


def _load_samples(data_dir, cfg: TrainConfig, team: bool, limit: int | None = None):
    downsample = 2 if cfg.preset == "desk" else 1
    episodes = read_dataset(data_dir, downsample=downsample, limit=limit)
    maker = make_team_samples if team else make_self_samples
    samples: list[Sample] = []
    for ep in episodes:
        samples.extend(maker(ep, cfg.horizon))
    if not samples:
        raise ValueError(f"dataset {data_dir} yielded no samples at horizon {cfg.horizon}")
    return samples


def train_il(data_dir, cfg: TrainConfig) -> tuple[PolicyNet, dict]:
    """Self-action imitation (horizon 1 = IL, horizon 5 = IL-Long)."""
    torch.manual_seed(cfg.seed)
    samples = _load_samples(data_dir, cfg, team=False)
    net = PolicyNet(cfg.preset, "self")
    dims = _label_slice(cfg)

    def loss_of_batch(batch):
        pred = net(batch["frames"])
        return il_loss(pred[:, dims], batch["self"][:, dims])

    loop = _Loop(samples, cfg, loss_of_batch, net.parameters())
    curve = loop.run()
    return net, {"curve": curve, "n_samples": len(samples)}


def train_pe_t(data_dir, cfg: TrainConfig) -> tuple[PolicyNet, dict]:
    """Team-action prediction; the loss covers every present slot, serving
    uses slot 0 only."""
    torch.manual_seed(cfg.seed)
    samples = _load_samples(data_dir, cfg, team=True)
    net = PolicyNet(cfg.preset, "team")
    dims = _label_slice(cfg)

    def loss_of_batch(batch):
        pred = net(batch["frames"])
        return masked_team_loss(
            pred[..., dims], batch["team"][..., dims], batch["presence"]
        )

    loop = _Loop(samples, cfg, loss_of_batch, net.parameters())
    curve = loop.run()
    return net, {"curve": curve, "n_samples": len(samples)}


def train_teammate_predictor(data_dir, cfg: TrainConfig) -> tuple[PolicyNet, dict]:
    """PE-N stage 1: predict teammate slots only (self slot masked out)."""
    torch.manual_seed(cfg.seed)
    samples = _load_samples(data_dir, cfg, team=True)
    net = PolicyNet(cfg.preset, "team")
    dims = _label_slice(cfg)

    def loss_of_batch(batch):
        presence = batch["presence"].clone()
        presence[:, 0] = False
        pred = net(batch["frames"])
        return masked_team_loss(pred[..., dims], batch["team"][..., dims], presence)

    loop = _Loop(samples, cfg, loss_of_batch, net.parameters())
    curve = loop.run()
    return net, {"curve": curve, "n_samples": len(samples)}


def train_pe_n(
    data_dir, cfg: TrainConfig, predictor: PolicyNet | None = None
) -> tuple[PolicyNet, PolicyNet, dict]:
    """PE-N: stage 2 trains a self net whose head receives the frozen stage-1
    predictor's teammate actions through a linear projection."""
    if predictor is None:
        predictor, stage1_meta = train_teammate_predictor(data_dir, cfg)
    else:
        stage1_meta = {"curve": None, "n_samples": None}
    freeze_encoder(predictor)

    torch.manual_seed(cfg.seed + 1)
    samples = _load_samples(data_dir, cfg, team=True)
    net = PolicyNet(cfg.preset, "self+teammates")
    dims = _label_slice(cfg)

    def loss_of_batch(batch):
        with torch.no_grad():
            teammate_actions = predictor(batch["frames"])[:, 1:, :]
        pred = net(batch["frames"], teammate_actions)
        return il_loss(pred[:, dims], batch["self"][:, dims])

    loop = _Loop(samples, cfg, loss_of_batch, net.parameters())
    curve = loop.run()
    meta = {"curve": curve, "stage1": stage1_meta, "n_samples": len(samples)}
    return net, predictor, meta


def train_pe_h(
    data_dir,
    cfg: TrainConfig,
    base: PolicyNet,
    predictor: PolicyNet,
    human_dir=None,
) -> tuple[ConcatHeadNet, dict]:
    """PE-H: new head over both frozen encoders, trained on the scripted
    dataset; optionally fine-tuned on a guided dataset afterwards."""
    freeze_encoder(base.encoder)
    freeze_encoder(predictor.encoder)
    torch.manual_seed(cfg.seed + 2)
    net = ConcatHeadNet(base.encoder, predictor.encoder)
    hashes_before = (encoder_state_hash(base.encoder), encoder_state_hash(predictor.encoder))

    samples = _load_samples(data_dir, cfg, team=False)
    dims = _label_slice(cfg)

    def loss_of_batch(batch):
        pred = net(batch["frames"])
        return il_loss(pred[:, dims], batch["self"][:, dims])

    loop = _Loop(samples, cfg, loss_of_batch, net.head.parameters())
    curve = loop.run()
    meta: dict = {"curve": curve, "n_samples": len(samples)}

    if human_dir is not None:
        ft_cfg = TrainConfig(**{**asdict(cfg), "balance_batches": True, "freeze_encoder": True})
        ft_samples = _load_samples(human_dir, ft_cfg, team=False)
        ft_loop = _Loop(ft_samples, ft_cfg, loss_of_batch, net.head.parameters())
        meta["finetune_curve"] = ft_loop.run()

    hashes_after = (encoder_state_hash(base.encoder), encoder_state_hash(predictor.encoder))
    if hashes_before != hashes_after:
        raise RuntimeError("frozen encoder changed during PE-H head training")
    meta["encoder_hashes"] = list(hashes_after)
    return net, meta


def _encoders_of(net: torch.nn.Module) -> list[torch.nn.Module]:
    if isinstance(net, ConcatHeadNet):
        return [net.encoder_a, net.encoder_b]
    return [net.encoder]


def finetune(
    net: torch.nn.Module, human_dir, cfg: TrainConfig, predictor: PolicyNet | None = None
) -> dict:
    """Freeze the encoder(s) bitwise and adapt the head on guided episodes
    with batches balanced half Human, half Heuristic. Nets whose head takes
    predicted teammate actions need their stage-1 predictor passed along."""
    if not cfg.balance_batches or not cfg.freeze_encoder:
        raise ValueError("fine-tuning requires balance_batches and freeze_encoder")
    head_variant = getattr(net, "head_variant", "self")
    if head_variant == "self+teammates" and predictor is None:
        raise ValueError("this checkpoint predicts from teammate actions; pass its predictor")
    torch.manual_seed(cfg.seed)
    encoders = _encoders_of(net)
    for enc in encoders:
        freeze_encoder(enc)
    if predictor is not None:
        freeze_encoder(predictor)
    before = [encoder_state_hash(enc) for enc in encoders]

    samples = _load_samples(human_dir, cfg, team=(head_variant == "team"))
    dims = _label_slice(cfg)

    def loss_of_batch(batch):
        if head_variant == "team":
            pred = net(batch["frames"])
            return masked_team_loss(
                pred[..., dims], batch["team"][..., dims], batch["presence"]
            )
        if head_variant == "self+teammates":
            with torch.no_grad():
                teammate_actions = predictor(batch["frames"])[:, 1:, :]
            pred = net(batch["frames"], teammate_actions)
        else:
            pred = net(batch["frames"])
        return il_loss(pred[:, dims], batch["self"][:, dims])

    loop = _Loop(samples, cfg, loss_of_batch, net.head.parameters())
    curve = loop.run()
    after = [encoder_state_hash(enc) for enc in encoders]
    if before != after:
        raise RuntimeError("encoder changed during fine-tuning")
    return {"curve": curve, "encoder_hashes": after, "n_samples": len(samples)}


# -- checkpoints ---------------------------------------------------------------


def save_checkpoint(
    out_dir,
    method: str,
    cfg: TrainConfig,
    net: torch.nn.Module,
    meta_extra: dict | None = None,
    predictor: PolicyNet | None = None,
) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    blobs = {"model": net.state_dict()}
    if predictor is not None:
        blobs["predictor"] = predictor.state_dict()
    torch.save(blobs, out / "weights.pt")
    meta = {
        "format": CHECKPOINT_FORMAT,
        "method": method,
        "preset": cfg.preset,
        "horizon": cfg.horizon,
        "frame_stack": FRAME_STACK,
        "input_px": PRESETS[cfg.preset]["input_px"],
        "optimizer": "adam",
        "lr": cfg.lr,
        "epochs": cfg.epochs,
        "steps_per_epoch": cfg.steps_per_epoch,
        "batch_size": cfg.batch_size,
        "seed": cfg.seed,
        "position_only": cfg.position_only,
        "head_variant": getattr(net, "head_variant", "self"),
        "saved_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if hasattr(net, "encoder"):
        meta["encoder_hash"] = encoder_state_hash(net.encoder)
    if meta_extra:
        meta.update(meta_extra)
    (out / "meta.json").write_text(json.dumps(meta, indent=1))
    return out


def load_checkpoint(ckpt_dir) -> tuple[torch.nn.Module, PolicyNet | None, dict]:
    """Rebuild the saved net (and stage-1 predictor when present)."""
    ckpt = Path(ckpt_dir)
    meta = json.loads((ckpt / "meta.json").read_text())
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format {meta.get('format')}")
    blobs = torch.load(ckpt / "weights.pt", map_location="cpu", weights_only=True)

    predictor = None
    if "predictor" in blobs:
        predictor = PolicyNet(meta["preset"], "team")
        predictor.load_state_dict(blobs["predictor"])
        predictor.eval()

    if meta["method"] == "pe-h":
        base_enc = PolicyNet(meta["preset"], "self").encoder
        pred_enc = PolicyNet(meta["preset"], "team").encoder
        net: torch.nn.Module = ConcatHeadNet(base_enc, pred_enc)
    else:
        net = PolicyNet(meta["preset"], meta["head_variant"])
    net.load_state_dict(blobs["model"])
    net.eval()
    return net, predictor, meta
