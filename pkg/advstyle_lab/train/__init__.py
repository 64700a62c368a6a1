"""Optimizers and the two adversarial training procedures."""

from .optim import Adam, Optimizer, SGDMomentum, build_optimizer, optimizer_step
from .trainer import cosine_factor, fit, train_grl, train_iterative

__all__ = [
    "Adam",
    "Optimizer",
    "SGDMomentum",
    "build_optimizer",
    "cosine_factor",
    "fit",
    "optimizer_step",
    "train_grl",
    "train_iterative",
]
