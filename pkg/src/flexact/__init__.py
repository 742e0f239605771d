"""Trainable activation-function combinations with hand-derived gradients."""

from .activations import FAMILIES, KINDS, Activation, init_params
from .nn import ConvAutoencoder, ModelSpec, StackedLstm
from .regularization import RegConfig, total_cost

__version__ = "0.1.0"

__all__ = [
    "FAMILIES",
    "KINDS",
    "Activation",
    "ConvAutoencoder",
    "ModelSpec",
    "RegConfig",
    "StackedLstm",
    "init_params",
    "total_cost",
]
