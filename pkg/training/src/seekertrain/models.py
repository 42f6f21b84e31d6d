"""Policy networks: a convolutional encoder with an explicit boundary to a
small MLP head, so the encoder can be frozen bitwise during fine-tuning.

Presets:
- desk: 4-block encoder over 78x78 inputs, 256 features.
- paper: 18-layer residual encoder over 156x156 inputs, 512 features.

Heads:
- Self: 4 outputs (x, y, sin o, cos o), tanh-bounded.
- Team: 16 outputs = 4 slots x 4 dims, slot 0 self, slots 1-3 teammates in
  distance order; absent slots are masked out of the loss.
- SelfWithTeammateInput: Self head whose input is the encoder features
  concatenated with a linear projection of a 12-dim teammate-action vector.
"""

from __future__ import annotations

import hashlib

import torch
from torch import nn

IN_CHANNELS = 5 * 4          # frame stack x (RGB + mask)
TEAM_SLOTS = 4
ACTION_DIM = 4
PROJECTION_IN = 12           # 3 teammate slots x 4 dims
PROJECTION_OUT = 64

PRESETS = {
    "desk": {"input_px": 78, "features": 256},
    "paper": {"input_px": 156, "features": 512},
}


def _conv_block(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, kernel_size=3, padding=1),
        nn.ReLU(inplace=True),
        nn.MaxPool2d(2),
    )


class DeskEncoder(nn.Module):
    """4 conv blocks over 78x78x20 inputs -> 256 features."""

    features = 256

    def __init__(self, in_channels: int = IN_CHANNELS):
        super().__init__()
        self.blocks = nn.Sequential(
            _conv_block(in_channels, 32),
            _conv_block(32, 64),
            _conv_block(64, 128),
            _conv_block(128, 256),
        )
        self.pool = nn.AdaptiveAvgPool2d(1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.pool(self.blocks(x)).flatten(1)


class _ResidualBlock(nn.Module):
    def __init__(self, cin: int, cout: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(cout)
        self.relu = nn.ReLU(inplace=True)
        if stride != 1 or cin != cout:
            self.shortcut = nn.Sequential(
                nn.Conv2d(cin, cout, 1, stride=stride, bias=False), nn.BatchNorm2d(cout)
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + self.shortcut(x))


class ResidualEncoder(nn.Module):
    """18-layer residual encoder (8 two-conv blocks + stem + head pooling)
    over 156x156x20 inputs -> 512 features."""

    features = 512

    def __init__(self, in_channels: int = IN_CHANNELS):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv2d(in_channels, 64, 7, stride=2, padding=3, bias=False),
            nn.BatchNorm2d(64),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(3, stride=2, padding=1),
        )
        stages = []
        cin = 64
        for cout, stride in ((64, 1), (64, 1), (128, 2), (128, 1),
                             (256, 2), (256, 1), (512, 2), (512, 1)):
            stages.append(_ResidualBlock(cin, cout, stride))
            cin = cout
        self.stages = nn.Sequential(*stages)
        self.pool = nn.AdaptiveAvgPool2d(1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.pool(self.stages(self.stem(x))).flatten(1)


def make_encoder(preset: str) -> nn.Module:
    if preset == "desk":
        return DeskEncoder()
    if preset == "paper":
        return ResidualEncoder()
    raise ValueError(f"unknown preset {preset!r} (want desk or paper)")


class SelfHead(nn.Module):
    """features -> 4 action dims in [-1, 1]."""

    def __init__(self, features: int, hidden: int = 128):
        super().__init__()
        self.mlp = nn.Sequential(
            nn.Linear(features, hidden), nn.ReLU(inplace=True), nn.Linear(hidden, ACTION_DIM)
        )

    def forward(self, feats: torch.Tensor) -> torch.Tensor:
        return torch.tanh(self.mlp(feats))


class TeamHead(nn.Module):
    """features -> 4 slots x 4 dims in [-1, 1]; slot 0 is the self action."""

    def __init__(self, features: int, hidden: int = 128):
        super().__init__()
        self.mlp = nn.Sequential(
            nn.Linear(features, hidden),
            nn.ReLU(inplace=True),
            nn.Linear(hidden, TEAM_SLOTS * ACTION_DIM),
        )

    def forward(self, feats: torch.Tensor) -> torch.Tensor:
        return torch.tanh(self.mlp(feats)).view(-1, TEAM_SLOTS, ACTION_DIM)


class SelfWithTeammateInput(nn.Module):
    """Self head over [features (+) projection(teammate actions)]. With the
    projection weights zeroed it computes the same function of the features
    as a plain SelfHead of matching weights."""

    def __init__(self, features: int, hidden: int = 128):
        super().__init__()
        self.projection = nn.Linear(PROJECTION_IN, PROJECTION_OUT)
        self.mlp = nn.Sequential(
            nn.Linear(features + PROJECTION_OUT, hidden),
            nn.ReLU(inplace=True),
            nn.Linear(hidden, ACTION_DIM),
        )

    def forward(self, feats: torch.Tensor, teammate_actions: torch.Tensor) -> torch.Tensor:
        proj = self.projection(teammate_actions.flatten(1))
        return torch.tanh(self.mlp(torch.cat([feats, proj], dim=1)))


class PolicyNet(nn.Module):
    """Encoder + head with the boundary explicit. head_variant is one of
    'self', 'team', 'self+teammates'."""

    def __init__(self, preset: str, head_variant: str = "self"):
        super().__init__()
        self.preset = preset
        self.head_variant = head_variant
        self.encoder = make_encoder(preset)
        feats = self.encoder.features
        if head_variant == "self":
            self.head = SelfHead(feats)
        elif head_variant == "team":
            self.head = TeamHead(feats)
        elif head_variant == "self+teammates":
            self.head = SelfWithTeammateInput(feats)
        else:
            raise ValueError(f"unknown head variant {head_variant!r}")

    def forward(self, frames: torch.Tensor, teammate_actions: torch.Tensor | None = None):
        feats = self.encoder(frames)
        if self.head_variant == "self+teammates":
            if teammate_actions is None:
                raise ValueError("this head needs teammate actions")
            return self.head(feats, teammate_actions)
        return self.head(feats)


class ConcatHeadNet(nn.Module):
    """Head over the concatenation of two frozen encoders' features."""

    def __init__(self, encoder_a: nn.Module, encoder_b: nn.Module, hidden: int = 128):
        super().__init__()
        self.encoder_a = encoder_a
        self.encoder_b = encoder_b
        self.features = encoder_a.features + encoder_b.features
        self.head = SelfHead(self.features, hidden)

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        feats = torch.cat([self.encoder_a(frames), self.encoder_b(frames)], dim=1)
        return self.head(feats)


def freeze_encoder(module: nn.Module) -> None:
    """Stop gradient flow and running-stat updates; the frozen-weights
    guarantee is bitwise, so eval() matters as much as requires_grad."""
    for p in module.parameters():
        p.requires_grad_(False)
    module.eval()


def encoder_state_hash(module: nn.Module) -> str:
    """sha256 over the encoder's state dict in key order; bitwise identity
    check for the frozen contract."""
    h = hashlib.sha256()
    state = module.state_dict()
    for key in sorted(state):
        h.update(key.encode())
        h.update(state[key].detach().cpu().numpy().tobytes())
    return h.hexdigest()
