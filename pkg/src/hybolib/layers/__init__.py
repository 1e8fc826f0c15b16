from .attention import MultiHeadAttention, multi_head_attention
from .base import Module, Parameter
from .functional import (
    attention_weights,
    centroid,
    inner,
    lift,
    lorentz_attention,
    pairwise_inner,
    pairwise_squared_distance,
    squared_distance,
)
from .linear import (
    DegenerateInputError,
    LorentzLinear,
    fx_matrix,
    fx_transform,
    is_boost,
    lorentz_linear,
    pseudo_rotation_composite,
    pseudo_rotation_matrix,
    pseudo_rotation_tangent,
)
from .residual import LorentzPositionEncoding, LorentzResidual, lorentz_residual, position_encode

__all__ = [
    "Module", "Parameter", "MultiHeadAttention", "multi_head_attention",
    "attention_weights", "centroid", "inner", "lift", "lorentz_attention",
    "pairwise_inner", "pairwise_squared_distance", "squared_distance",
    "DegenerateInputError", "LorentzLinear", "fx_matrix", "fx_transform", "is_boost",
    "lorentz_linear", "pseudo_rotation_composite", "pseudo_rotation_matrix",
    "pseudo_rotation_tangent", "LorentzPositionEncoding", "LorentzResidual",
    "lorentz_residual", "position_encode",
]
