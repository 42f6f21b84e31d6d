"""Imitation losses. The self loss is the squared error summed over the 4
action dims and averaged over the batch, so a prediction of zeros against
a (1,1,0,0) label costs exactly 2.0 per sample."""

from __future__ import annotations

import torch


def il_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean over samples of the per-sample squared action error."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {tuple(pred.shape)} vs {tuple(target.shape)}")
    return ((pred - target) ** 2).sum(dim=-1).mean()


def masked_team_loss(
    pred: torch.Tensor, target: torch.Tensor, presence: torch.Tensor
) -> torch.Tensor:
    """Per-slot squared error summed over dims, zeroed for absent slots,
    summed over slots, averaged over the batch. With only slot 0 present
    this equals il_loss on the self slot exactly (no renormalization)."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {tuple(pred.shape)} vs {tuple(target.shape)}")
    if presence.shape != pred.shape[:-1]:
        raise ValueError(
            f"presence shape {tuple(presence.shape)} does not match slots {tuple(pred.shape[:-1])}"
        )
    per_slot = ((pred - target) ** 2).sum(dim=-1)
    return (per_slot * presence.to(per_slot.dtype)).sum(dim=-1).mean()
