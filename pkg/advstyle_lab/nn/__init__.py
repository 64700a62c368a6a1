"""Layers, parameter registry and the MiniNet backbone.

MiniNet lives in ``advstyle_lab.nn.mininet``; it is not re-exported here
because it depends on ``advstyle_lab.style``, which itself registers its
scales through this package.
"""

from .layers import Conv2d, Linear, kaiming_uniform
from .registry import ParameterRegistry, RegisteredParameter

__all__ = ["Conv2d", "Linear", "ParameterRegistry", "RegisteredParameter", "kaiming_uniform"]
