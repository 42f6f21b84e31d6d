"""Imitation-learning pipelines over recorded hide-and-seek episodes."""

from .datasetio import (
    EpisodeData,
    Sample,
    balanced_batches,
    load_manifest,
    make_self_samples,
    make_team_samples,
    normalize_pose,
    read_dataset,
    read_episode,
    split_by_episode,
    stack_frames,
    teammate_order,
    to_input,
)
from .losses import il_loss, masked_team_loss
from .models import (
    ConcatHeadNet,
    DeskEncoder,
    PolicyNet,
    ResidualEncoder,
    SelfHead,
    SelfWithTeammateInput,
    TeamHead,
    encoder_state_hash,
    freeze_encoder,
    make_encoder,
)
from .train import (
    TrainConfig,
    TrainingDiverged,
    finetune,
    load_checkpoint,
    save_checkpoint,
    train_il,
    train_pe_h,
    train_pe_n,
    train_pe_t,
    train_teammate_predictor,
)

__version__ = "0.1.0"

__all__ = [
    "ConcatHeadNet",
    "DeskEncoder",
    "EpisodeData",
    "PolicyNet",
    "ResidualEncoder",
    "Sample",
    "SelfHead",
    "SelfWithTeammateInput",
    "TeamHead",
    "TrainConfig",
    "TrainingDiverged",
    "balanced_batches",
    "encoder_state_hash",
    "finetune",
    "freeze_encoder",
    "il_loss",
    "load_checkpoint",
    "load_manifest",
    "make_encoder",
    "make_self_samples",
    "make_team_samples",
    "masked_team_loss",
    "normalize_pose",
    "read_dataset",
    "read_episode",
    "save_checkpoint",
    "split_by_episode",
    "stack_frames",
    "teammate_order",
    "to_input",
    "train_il",
    "train_pe_h",
    "train_pe_n",
    "train_pe_t",
    "train_teammate_predictor",
    "__version__",
]
