from .adam import Adam
from .model import DegenerateOutputError, ForwardRecord, Params, backward, forward, forward_batch, init_params, param_shapes
from .train import TrainingError, TrainResult, batch_loss, complete, lr_at, train

__all__ = [
    "Adam",
    "DegenerateOutputError",
    "ForwardRecord",
    "Params",
    "TrainResult",
    "TrainingError",
    "backward",
    "batch_loss",
    "complete",
    "forward",
    "forward_batch",
    "init_params",
    "lr_at",
    "param_shapes",
    "train",
]
