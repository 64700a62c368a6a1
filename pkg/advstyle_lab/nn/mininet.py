"""MiniNet: a small ResNet-like classifier with six perturbation insertion points.

Stage layout (H, W divisible by 8)::

    conv1  : conv3x3(Cin -> w1) + ReLU          -> P(conv1)
    pool1  : maxpool 2x2                        -> P(pool1)
    block1 : conv3x3(w1 -> w2) + ReLU + maxpool -> P(block1)
    block2 : conv3x3(w2 -> w3) + ReLU + maxpool -> P(block2)
    block3 : conv3x3(w3 -> w4) + ReLU           -> P(block3)
    block4 : conv3x3(w4 -> w5) + ReLU           -> P(block4)
    head   : global average pool + linear(w5 -> K)

Each P sits on the stage output, after the activation and any pooling.
"""

import logging
from typing import Dict, Optional, Tuple

import numpy as np

from advstyle_lab.core import ops
from advstyle_lab.core.tensor import Tensor
from advstyle_lab.errors import ConfigError, ShapeError
from advstyle_lab.models import INSERTION_POINTS, MethodConfig, Mode, ModelSpec
from advstyle_lab.nn.layers import Conv2d, Linear
from advstyle_lab.nn.registry import ParameterRegistry
from advstyle_lab.style.advstyle import AdvStyle
from advstyle_lab.style.baselines import Perturbation, build_perturbation

logger = logging.getLogger(__name__)

_DTYPES = {"float32": np.float32, "float64": np.float64}


def point_channels(spec: ModelSpec) -> Dict[str, int]:
    """Channel count seen by each insertion point."""
    w1, w2, w3, w4, w5 = spec.widths
    return {"conv1": w1, "pool1": w1, "block1": w2, "block2": w3, "block3": w4, "block4": w5}


def parameter_count(spec: ModelSpec, method_config: Optional[MethodConfig] = None) -> Tuple[int, int]:
    """
    Closed-form (theta, sigma) scalar counts for ``spec``.

    Sigma contributes 2*C per AdvStyle point (one scalar pair per point for
    the intensity-only variant) and nothing for the other methods.
    """
    chans = (spec.in_channels,) + tuple(spec.widths)
    theta = sum(cin * 9 * cout + cout for cin, cout in zip(chans[:-1], chans[1:]))
    theta += spec.widths[-1] * spec.num_classes + spec.num_classes
    sigma = 0
    if spec.method == "advstyle":
        variant = (method_config or MethodConfig()).variant
        per_point = point_channels(spec)
        sigma = sum(2 if variant == "intensity_only" else 2 * per_point[p] for p in spec.insertion_points)
    return theta, sigma


class MiniNet:
    """Backbone, head and the perturbation modules at the enabled points."""

    def __init__(
        self, spec: ModelSpec, seed: int, method_config: Optional[MethodConfig] = None, dtype: str = "float64"
    ):
        if dtype not in _DTYPES:
            raise ConfigError("train.dtype", f"unsupported dtype {dtype!r}")
        for key, size in (("model.height", spec.height), ("model.width", spec.width)):
            if size // 8 < 1:
                raise ConfigError(key, f"spatial size {size} vanishes after three 2x2 pools")
        self.spec = spec
        self.method_config = method_config or MethodConfig()
        self.dtype = _DTYPES[dtype]
        self.dtype_name = dtype
        self.registry = ParameterRegistry()

        rng = np.random.default_rng(seed)
        w1, w2, w3, w4, w5 = spec.widths
        np_dtype = self.dtype
        self.conv1 = Conv2d(self.registry, "conv1", spec.in_channels, w1, rng, np_dtype)
        self.block1 = Conv2d(self.registry, "block1", w1, w2, rng, np_dtype)
        self.block2 = Conv2d(self.registry, "block2", w2, w3, rng, np_dtype)
        self.block3 = Conv2d(self.registry, "block3", w3, w4, rng, np_dtype)
        self.block4 = Conv2d(self.registry, "block4", w4, w5, rng, np_dtype)
        self.head = Linear(self.registry, "head", w5, spec.num_classes, rng, np_dtype)

        channels = point_channels(spec)
        self.perturbations: Dict[str, Perturbation] = {}
        for point in spec.insertion_points:
            module = build_perturbation(
                spec.method, channels[point], self.method_config, self.registry, point, np_dtype
            )
            if module is not None:
                self.perturbations[point] = module
        logger.debug(
            "MiniNet built: method=%s points=%s theta=%d sigma=%d",
            spec.method,
            list(self.perturbations),
            self.registry.count("theta"),
            self.registry.count("sigma"),
        )

    def _perturb(self, point: str, x: Tensor, mode: Mode, rng) -> Tensor:
        module = self.perturbations.get(point)
        return x if module is None else module(x, mode, rng)

    def features(self, x, mode: Mode, rng: Optional[np.random.Generator] = None) -> Tensor:
        """Pooled penultimate features, B x w5."""
        if mode not in ("train", "eval"):
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        x = x if isinstance(x, Tensor) else Tensor(np.asarray(x))
        spec = self.spec
        expected = (spec.in_channels, spec.height, spec.width)
        if x.ndim != 4 or x.shape[1:] != expected:
            raise ShapeError("MiniNet.forward", x.shape, (-1,) + expected, "input must be B x Cin x H x W")
        if x.dtype != self.dtype:
            x = Tensor(x.data.astype(self.dtype))
        if mode == "train" and self.perturbations and rng is None:
            raise ValueError("MiniNet.forward needs an rng in train mode when perturbations are enabled")

        h = self._perturb("conv1", ops.relu(self.conv1(x)), mode, rng)
        h = self._perturb("pool1", ops.maxpool2d(h), mode, rng)
        h = self._perturb("block1", ops.maxpool2d(ops.relu(self.block1(h))), mode, rng)
        h = self._perturb("block2", ops.maxpool2d(ops.relu(self.block2(h))), mode, rng)
        h = self._perturb("block3", ops.relu(self.block3(h)), mode, rng)
        h = self._perturb("block4", ops.relu(self.block4(h)), mode, rng)
        return ops.avgpool_global(h)

    def forward(self, x, mode: Mode, rng: Optional[np.random.Generator] = None) -> Tensor:
        """
        Class logits for a batch.

        Args:
            x: Images, B x Cin x H x W (Tensor or array).
            mode: ``train`` applies the perturbations, ``eval`` bypasses them.
            rng: Noise source for train mode.

        Returns:
            B x K logits.

        Raises:
            ShapeError: If the input shape does not match the ModelSpec.
            ValueError: On an unknown mode or a missing rng in train mode.
        """
        return self.head(self.features(x, mode, rng))

    __call__ = forward

    def set_reverse_gradients(self, flag: bool) -> None:
        for module in self.perturbations.values():
            if isinstance(module, AdvStyle):
                module.state.reverse_gradients = flag

    def sigma_norms(self) -> Dict[str, float]:
        """L2 norm of every Sigma tensor, keyed by parameter name."""
        return {e.name: float(np.linalg.norm(e.tensor.data)) for e in self.registry.entries("sigma")}


def build_mininet(
    spec: ModelSpec,
    seed: int,
    method_config: Optional[MethodConfig] = None,
    dtype: str = "float64",
) -> MiniNet:
    """Deterministic MiniNet for (spec, seed): identical seeds give identical weights."""
    return MiniNet(spec, seed, method_config, dtype)


__all__ = ["INSERTION_POINTS", "MiniNet", "build_mininet", "parameter_count", "point_channels"]
