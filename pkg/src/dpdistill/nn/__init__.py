from .functional import (
    LOG_CLAMP,
    cross_entropy,
    entropy,
    kl_divergence,
    log_softmax,
    one_hot,
    softmax,
)
from .layers import BatchNorm, Conv2d, Dense, Flatten, Layer, ReLU, Tanh
from .losses import (
    cross_entropy_from_logits,
    kl_from_logits,
    mean_prediction_negentropy,
    softmax_backward,
)
from .network import Network, build_mlp, network_from_descriptors
from .optim import SGD, Adam, step_network

__all__ = [
    "LOG_CLAMP",
    "Adam",
    "BatchNorm",
    "Conv2d",
    "Dense",
    "Flatten",
    "Layer",
    "Network",
    "ReLU",
    "SGD",
    "Tanh",
    "build_mlp",
    "cross_entropy",
    "cross_entropy_from_logits",
    "entropy",
    "kl_divergence",
    "kl_from_logits",
    "log_softmax",
    "mean_prediction_negentropy",
    "network_from_descriptors",
    "one_hot",
    "softmax",
    "softmax_backward",
    "step_network",
]
