"""Minimal differentiable-computation kernel.

Fixed layer set with hand-derived backward passes, losses (including the
batch-concordance loss), SGD-with-momentum and Adam optimizers, and a
finite-difference gradient checker that verifies every backward pass.
"""

from .layers import (
    Layer,
    Dense,
    Activation,
    Conv1d,
    Conv1dMultiWidth,
    GlobalPool,
    Lstm,
    AttentionPool,
    MultiHeadAttention,
    conv_window_mask,
)
from .losses import LossSpec, loss_eval
from .optim import OptimizerConfig, Optimizer, make_optimizer
from .gradcheck import GradCheckReport, gradient_check, ConcatOutputs, PrimaryOutput

__all__ = [
    "Layer",
    "Dense",
    "Activation",
    "Conv1d",
    "Conv1dMultiWidth",
    "GlobalPool",
    "Lstm",
    "AttentionPool",
    "MultiHeadAttention",
    "conv_window_mask",
    "LossSpec",
    "loss_eval",
    "OptimizerConfig",
    "Optimizer",
    "make_optimizer",
    "GradCheckReport",
    "gradient_check",
    "ConcatOutputs",
    "PrimaryOutput",
]
