from amisim.nn.activations import elu, relu, sigmoid, softmax, tanh
from amisim.nn.io import load_params, save_history_csv, save_params
from amisim.nn.model import (
    Activation,
    Conv1D,
    Dense,
    Flatten,
    GRULayer,
    MaxPool1D,
    ModelSpec,
    Params,
    backprop,
    backward,
    forward,
    gru_step,
    infer_shapes,
    init_params,
)
from amisim.nn.training import (
    TrainConfig,
    accuracy,
    adam_step,
    binary_cross_entropy,
    cross_entropy,
    loss_and_grads,
    model_loss,
    one_hot,
    predict_proba,
    train,
)

__all__ = [
    "Activation",
    "Conv1D",
    "Dense",
    "Flatten",
    "GRULayer",
    "MaxPool1D",
    "ModelSpec",
    "Params",
    "TrainConfig",
    "accuracy",
    "adam_step",
    "backprop",
    "backward",
    "binary_cross_entropy",
    "cross_entropy",
    "elu",
    "forward",
    "gru_step",
    "infer_shapes",
    "init_params",
    "load_params",
    "loss_and_grads",
    "model_loss",
    "one_hot",
    "predict_proba",
    "relu",
    "save_history_csv",
    "save_params",
    "sigmoid",
    "softmax",
    "tanh",
    "train",
]
