"""Convolution and linear layers with Kaiming-uniform initialization."""

import math

import numpy as np

from advstyle_lab.core import ops
from advstyle_lab.core.tensor import Tensor
from advstyle_lab.nn.registry import ParameterRegistry


def kaiming_uniform(shape, fan_in: int, rng: np.random.Generator, dtype) -> np.ndarray:
    # ReLU gain sqrt(2): bound = sqrt(6 / fan_in).
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv2d:
    """3x3 (by default) stride-1 convolution with same padding."""

    def __init__(
        self,
        registry: ParameterRegistry,
        name: str,
        in_channels: int,
        out_channels: int,
        rng: np.random.Generator,
        dtype=np.float64,
        kernel_size: int = 3,
    ):
        fan_in = in_channels * kernel_size * kernel_size
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        self.padding = kernel_size // 2
        self.weight = registry.register(f"{name}.weight", Tensor(kaiming_uniform(shape, fan_in, rng, dtype)))
        self.bias = registry.register(f"{name}.bias", Tensor(np.zeros(out_channels, dtype=dtype)))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, padding=self.padding)


class Linear:
    """Affine map ``x @ W + b`` on B x D inputs."""

    def __init__(
        self,
        registry: ParameterRegistry,
        name: str,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        dtype=np.float64,
    ):
        self.weight = registry.register(
            f"{name}.weight", Tensor(kaiming_uniform((in_features, out_features), in_features, rng, dtype))
        )
        self.bias = registry.register(f"{name}.bias", Tensor(np.zeros(out_features, dtype=dtype)))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.add(ops.matmul(x, self.weight), self.bias)
