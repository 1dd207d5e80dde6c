from shakesense.nn.cells import gru_step, lstm_step, srn_step
from shakesense.nn.model import (
    CLASSIFICATION_SPEC,
    REGRESSION_SPEC,
    LayerSpec,
    NetworkModel,
    backward,
    forward,
    forward_batch,
    init_model,
    load_model,
    loss,
    mae,
    make_spec,
    save_model,
)
from shakesense.nn.training import EarlyStopping, TrainConfig, TrainHistory, train

__all__ = [
    "CLASSIFICATION_SPEC",
    "REGRESSION_SPEC",
    "EarlyStopping",
    "LayerSpec",
    "NetworkModel",
    "TrainConfig",
    "TrainHistory",
    "backward",
    "forward",
    "forward_batch",
    "gru_step",
    "init_model",
    "load_model",
    "loss",
    "lstm_step",
    "mae",
    "make_spec",
    "save_model",
    "srn_step",
    "train",
]
