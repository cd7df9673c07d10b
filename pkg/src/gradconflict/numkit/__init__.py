from .mlp import ForwardCache, LayerSpec, MlpModel, default_layers
from .ops import (
    PROB_EPS,
    Batch,
    DegenerateGradientError,
    SimplexWeights,
    SubsetTag,
    bce_loss_and_grad,
    sigmoid,
    simplex_project,
)
from .rng import ALGORITHM_ID, Rng

__all__ = [
    "ALGORITHM_ID",
    "Batch",
    "DegenerateGradientError",
    "ForwardCache",
    "LayerSpec",
    "MlpModel",
    "PROB_EPS",
    "Rng",
    "SimplexWeights",
    "SubsetTag",
    "bce_loss_and_grad",
    "default_layers",
    "sigmoid",
    "simplex_project",
]
