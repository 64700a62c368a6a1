"""Random style-perturbation baselines (DSU, MixStyle, pAdaIN) and the module factory."""

import logging
from typing import Dict, Optional, Tuple, Union

import numpy as np

from advstyle_lab.core import ops
from advstyle_lab.core.tensor import Tensor
from advstyle_lab.errors import ShapeError
from advstyle_lab.models import MethodConfig, Mode
from advstyle_lab.nn.registry import ParameterRegistry
from advstyle_lab.style.advstyle import AdvStyle, AdvStyleState
from advstyle_lab.style.stats import DEFAULT_EPS_FLOOR, adain_replace, batch_spread, channel_stats

logger = logging.getLogger(__name__)


def _skip(x: Tensor, p: float, rng: np.random.Generator) -> bool:
    # B < 2 has no batch spread; the coin is only tossed for real batches.
    return x.shape[0] < 2 or rng.random() >= p


def dsu_forward(
    x: Tensor,
    p: float,
    rng: np.random.Generator,
    eps_floor: float = DEFAULT_EPS_FLOOR,
    noise: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Tensor:
    """
    Resample statistics with Gaussian noise scaled by their batch spread.

    With probability ``p``: mu' = mu + eps_mu * Sigma_mu, sigma' = sigma +
    eps_sigma * Sigma_sigma, where Sigma_* = sqrt(var over the batch + eps_floor).
    The spread is part of the graph, so gradients also flow through the other
    instances of the batch.
    """
    if _skip(x, p, rng):
        return x
    b, c = x.shape[0], x.shape[1]
    stats = channel_stats(x)
    spread_mu, spread_sigma = batch_spread(stats, eps_floor)
    if noise is None:
        noise = (rng.standard_normal((b, c)), rng.standard_normal((b, c)))
    eps_mu, eps_sigma = (np.asarray(n, dtype=x.dtype) for n in noise)
    mu_new = ops.add(stats.mu, ops.mul(Tensor(eps_mu), spread_mu))
    sigma_new = ops.add(stats.sigma, ops.mul(Tensor(eps_sigma), spread_sigma))
    return adain_replace(x, mu_new, sigma_new, eps_floor, stats=stats)


def mixstyle_forward(
    x: Tensor,
    alpha: float,
    p: float,
    rng: np.random.Generator,
    eps_floor: float = DEFAULT_EPS_FLOOR,
    perm: Optional[np.ndarray] = None,
    weights: Optional[np.ndarray] = None,
) -> Tensor:
    """
    Mix each instance's statistics with those of a shuffled partner.

    Weights w ~ Beta(alpha, alpha) are drawn per instance before the
    permutation.
    """
    if _skip(x, p, rng):
        return x
    b = x.shape[0]
    if weights is None:
        weights = rng.beta(alpha, alpha, size=b)
    if perm is None:
        perm = rng.permutation(b)
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (b,):
        raise ShapeError("mixstyle_forward", (b,), perm.shape, "permutation must cover the batch")
    w = np.asarray(weights, dtype=x.dtype).reshape(b, 1)
    stats = channel_stats(x)
    mu_mix = ops.add(ops.mul(stats.mu, w), ops.mul(ops.index_select(stats.mu, perm), 1.0 - w))
    sigma_mix = ops.add(ops.mul(stats.sigma, w), ops.mul(ops.index_select(stats.sigma, perm), 1.0 - w))
    return adain_replace(x, mu_mix, sigma_mix, eps_floor, stats=stats)


def padain_forward(
    x: Tensor,
    p: float,
    rng: np.random.Generator,
    eps_floor: float = DEFAULT_EPS_FLOOR,
    perm: Optional[np.ndarray] = None,
) -> Tensor:
    """Swap statistics wholesale with a shuffled partner, with probability ``p``."""
    if _skip(x, p, rng):
        return x
    b = x.shape[0]
    if perm is None:
        perm = rng.permutation(b)
    perm = np.asarray(perm, dtype=np.int64)
    stats = channel_stats(x)
    return adain_replace(
        x, ops.index_select(stats.mu, perm), ops.index_select(stats.sigma, perm), eps_floor, stats=stats
    )


class _RandomPerturbation:
    def __init__(self, config: MethodConfig):
        self.config = config

    def __call__(self, x: Tensor, mode: Mode, rng: Optional[np.random.Generator]) -> Tensor:
        if mode == "eval":
            return x
        if rng is None:
            raise ValueError(f"{type(self).__name__} needs an rng in train mode")
        return self.apply(x, rng)

    def apply(self, x: Tensor, rng: np.random.Generator) -> Tensor:
        raise NotImplementedError

    def sigma_norms(self) -> Tuple[float, float]:
        return 0.0, 0.0


class DSU(_RandomPerturbation):
    def apply(self, x, rng):
        return dsu_forward(x, self.config.p, rng, self.config.eps_floor)


class MixStyle(_RandomPerturbation):
    def apply(self, x, rng):
        return mixstyle_forward(x, self.config.alpha, self.config.p, rng, self.config.eps_floor)


class PAdaIN(_RandomPerturbation):
    def apply(self, x, rng):
        return padain_forward(x, self.config.p, rng, self.config.eps_floor)


Perturbation = Union[AdvStyle, DSU, MixStyle, PAdaIN]

_RANDOM: Dict[str, type] = {"dsu": DSU, "mixstyle": MixStyle, "padain": PAdaIN}


def build_perturbation(
    method: str,
    channels: int,
    config: MethodConfig,
    registry: ParameterRegistry,
    point: str,
    dtype=np.float64,
) -> Optional[Perturbation]:
    """
    Create the perturbation module for one insertion point.

    Returns None for ``method == "none"``. AdvStyle registers its Sigma
    tensors in ``registry`` with tag ``sigma``.
    """
    if method == "none":
        return None
    if method == "advstyle":
        state = AdvStyleState.create(
            channels,
            variant=config.variant,
            lam=config.lam,
            eps_floor=config.eps_floor,
            dtype=dtype,
            registry=registry,
            point=point,
        )
        return AdvStyle(state)
    if method in _RANDOM:
        return _RANDOM[method](config)
    raise ValueError(f"unknown perturbation method {method!r}")
