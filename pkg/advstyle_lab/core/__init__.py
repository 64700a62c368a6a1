"""Reverse-mode automatic differentiation on numpy arrays."""

from .tensor import Tape, TapeRecord, Tensor, backward, is_grad_enabled, no_grad

__all__ = ["Tape", "TapeRecord", "Tensor", "backward", "is_grad_enabled", "no_grad"]
