from .model import (
    ModelConfig,
    ModelError,
    backward,
    batched_sequence_logprobs,
    count_params,
    forward,
    grad_check,
    init_params,
    loss,
    loss_and_dlogits,
    loss_and_grads,
    sequence_logprob,
    zero_params,
)
from .training import (
    AdamWState,
    Checkpoint,
    TrainConfig,
    TrainingError,
    adamw_step,
    lr_at,
    train,
)

__all__ = [
    "AdamWState",
    "Checkpoint",
    "ModelConfig",
    "ModelError",
    "TrainConfig",
    "TrainingError",
    "adamw_step",
    "backward",
    "batched_sequence_logprobs",
    "count_params",
    "forward",
    "grad_check",
    "init_params",
    "loss",
    "loss_and_dlogits",
    "loss_and_grads",
    "lr_at",
    "sequence_logprob",
    "train",
    "zero_params",
]
