"""Float64 neural-network kernel: layers, Adam, gradient checking."""

from .layers import (
    Conv2D,
    Dense,
    Flatten,
    Layer,
    MaxPool2,
    Network,
    Parameter,
    ReLU,
    Sigmoid,
    glorot_uniform,
)
from .optim import Adam
from .gradcheck import (
    check_input_gradients,
    check_parameter_gradients,
    relative_error,
    weighted_sum_loss,
)

__all__ = [
    "Adam",
    "Conv2D",
    "Dense",
    "Flatten",
    "Layer",
    "MaxPool2",
    "Network",
    "Parameter",
    "ReLU",
    "Sigmoid",
    "check_input_gradients",
    "check_parameter_gradients",
    "glorot_uniform",
    "relative_error",
    "weighted_sum_loss",
]
