"""Per-instance channel statistics and AdaIN-style replacement."""

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from advstyle_lab.core import ops
from advstyle_lab.core.tensor import Tensor
from advstyle_lab.errors import ShapeError

StatLike = Union[Tensor, np.ndarray]

DEFAULT_EPS_FLOOR = 1e-6


@dataclass(frozen=True)
class ChannelStats:
    """Spatial mean and (population) standard deviation, each B x C."""

    mu: Tensor
    sigma: Tensor


def channel_stats(x: Tensor) -> ChannelStats:
    """Differentiable per-instance, per-channel mean and std of a B x C x H x W tensor."""
    if x.ndim != 4:
        raise ShapeError("channel_stats", x.shape, (), "expected B x C x H x W")
    mu = ops.mean(x, axis=(2, 3))
    sigma = ops.sqrt(ops.var(x, axis=(2, 3)))
    return ChannelStats(mu=mu, sigma=sigma)


def batch_sigma(stats: ChannelStats) -> Tuple[np.ndarray, np.ndarray]:
    """Population std over the batch of mu and sigma, each of length C."""
    return stats.mu.data.std(axis=0), stats.sigma.data.std(axis=0)


def batch_spread(stats: ChannelStats, eps: float = DEFAULT_EPS_FLOOR) -> Tuple[Tensor, Tensor]:
    """sqrt(var over the batch + eps) of mu and sigma, each of length C, recorded on the tape."""
    return (
        ops.sqrt(ops.add(ops.var(stats.mu, axis=0), eps)),
        ops.sqrt(ops.add(ops.var(stats.sigma, axis=0), eps)),
    )


def instance_normalize(x: Tensor, eps_floor: float = DEFAULT_EPS_FLOOR, stats: Optional[ChannelStats] = None) -> Tensor:
    """(x - mu(x)) / (sigma(x) + eps_floor), the inner step of adain_replace."""
    stats = stats if stats is not None else channel_stats(x)
    b, c = x.shape[0], x.shape[1]
    mu = ops.reshape(stats.mu, (b, c, 1, 1))
    sigma = ops.reshape(ops.add(stats.sigma, eps_floor), (b, c, 1, 1))
    return ops.div(ops.sub(x, mu), sigma)


def adain_replace(
    x: Tensor,
    target_mu: StatLike,
    target_sigma: StatLike,
    eps_floor: float = DEFAULT_EPS_FLOOR,
    stats: Optional[ChannelStats] = None,
) -> Tensor:
    """
    Replace the channel statistics of ``x`` by the targets.

    Args:
        x: Features, B x C x H x W.
        target_mu: Target means, B x C.
        target_sigma: Target standard deviations, B x C; not clamped.
        eps_floor: Added to sigma(x) so constant channels map to target_mu.
        stats: Precomputed channel_stats(x), to share one graph.

    Returns:
        target_sigma * (x - mu(x)) / (sigma(x) + eps_floor) + target_mu
    """
    b, c = x.shape[0], x.shape[1]
    target_mu = ops.as_tensor(target_mu, like=x)
    target_sigma = ops.as_tensor(target_sigma, like=x)
    for label, target in (("target_mu", target_mu), ("target_sigma", target_sigma)):
        if target.shape != (b, c):
            raise ShapeError("adain_replace", x.shape, target.shape, f"{label} must be B x C")
    normalized = instance_normalize(x, eps_floor, stats)
    scaled = ops.mul(normalized, ops.reshape(target_sigma, (b, c, 1, 1)))
    return ops.add(scaled, ops.reshape(target_mu, (b, c, 1, 1)))
