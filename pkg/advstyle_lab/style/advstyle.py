"""AdvStyle: statistics perturbation with adversarially learned scales.

The perturbed statistics are

    mu_adv    = mu(x)    + eps_mu    * GRL(Sigma_mu, lambda)
    sigma_adv = sigma(x) + eps_sigma * GRL(Sigma_sigma, lambda)

with eps ~ N(0, 1) drawn per instance and channel on every training forward.
Minimizing the task loss then descends on the network weights and ascends on
Sigma at the same time. In iterative minimax training the reversal is switched
off and the trainer handles the signs explicitly.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from advstyle_lab.core import ops
from advstyle_lab.core.tensor import Tensor
from advstyle_lab.errors import ShapeError
from advstyle_lab.models import Mode, Variant
from advstyle_lab.nn.registry import ParameterRegistry
from advstyle_lab.style.stats import DEFAULT_EPS_FLOOR, adain_replace, batch_sigma, channel_stats

Noise = Tuple[np.ndarray, np.ndarray]


@dataclass
class AdvStyleState:
    """Learnable scales and switches of one AdvStyle insertion point."""

    sigma_mu: Tensor
    sigma_sigma: Tensor
    lam: float = 5.0
    mode: Mode = "train"
    variant: Variant = "full"
    reverse_gradients: bool = True
    eps_floor: float = DEFAULT_EPS_FLOOR

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")

    @classmethod
    def create(
        cls,
        channels: int,
        *,
        variant: Variant = "full",
        lam: float = 5.0,
        eps_floor: float = DEFAULT_EPS_FLOOR,
        dtype=np.float64,
        registry: Optional[ParameterRegistry] = None,
        point: str = "",
    ) -> "AdvStyleState":
        """
        Initialize the scales for ``channels`` channels.

        ``full`` starts at zero (identity module). ``direction_only`` starts
        from the uniform unit direction, since a zero vector has none.
        ``intensity_only`` learns one non-negative scalar per statistic,
        starting at zero.
        """
        if variant == "intensity_only":
            shape, init = (1,), np.zeros(1, dtype=dtype)
        elif variant == "direction_only":
            shape, init = (channels,), np.full(channels, 1.0 / math.sqrt(channels), dtype=dtype)
        else:
            shape, init = (channels,), np.zeros(channels, dtype=dtype)
        sigma_mu = Tensor(init.reshape(shape).copy(), requires_grad=True)
        sigma_sigma = Tensor(init.reshape(shape).copy(), requires_grad=True)
        if registry is not None:
            nonnegative = variant == "intensity_only"
            registry.register(f"advstyle.{point}.sigma_mu", sigma_mu, "sigma", nonnegative)
            registry.register(f"advstyle.{point}.sigma_sigma", sigma_sigma, "sigma", nonnegative)
        return cls(sigma_mu, sigma_sigma, lam=lam, variant=variant, eps_floor=eps_floor)

    def learned(self, scale: Tensor) -> Tensor:
        return ops.grl(scale, self.lam) if self.reverse_gradients else scale


def variant_project(
    state: AdvStyleState, batch_sigma_mu: np.ndarray, batch_sigma_sigma: np.ndarray
) -> Tuple[Tensor, Tensor]:
    """
    Effective (Sigma_mu, Sigma_sigma) of the direction-only / intensity-only variants.

    direction_only keeps the learned direction and borrows the batch norm;
    intensity_only keeps the batch direction and learns the norm. The reversal
    applies to the learned factor only.
    """
    if state.variant == "full":
        raise ValueError("variant_project needs a direction_only or intensity_only state")
    return (
        _project(state, state.sigma_mu, batch_sigma_mu),
        _project(state, state.sigma_sigma, batch_sigma_sigma),
    )


def _project(state: AdvStyleState, learned: Tensor, batch: np.ndarray) -> Tensor:
    dtype = learned.dtype
    batch = np.asarray(batch, dtype=dtype)
    batch_norm = float(np.linalg.norm(batch))
    if state.variant == "direction_only":
        if float(np.linalg.norm(learned.data)) == 0.0:
            return ops.add(Tensor(batch), ops.mul(state.learned(learned), 0.0))
        scale = state.learned(learned)
        return ops.mul(ops.div(scale, ops.norm(scale)), batch_norm)
    if batch_norm == 0.0:
        # Zero-weighted so Sigma still receives a (zero) gradient.
        return ops.mul(Tensor(np.zeros_like(batch)), state.learned(learned))
    return ops.mul(Tensor(batch / batch_norm), state.learned(learned))


def advstyle_forward(
    x: Tensor, state: AdvStyleState, rng: Optional[np.random.Generator], noise: Optional[Noise] = None
) -> Tensor:
    """
    Apply AdvStyle to ``x`` (B x C x H x W).

    Args:
        x: Features.
        state: Scales and switches; in eval mode ``x`` is returned untouched.
        rng: Noise source, unused in eval mode or when ``noise`` is given.
        noise: Optional frozen (eps_mu, eps_sigma), each B x C.

    Returns:
        Features carrying the perturbed statistics.
    """
    if state.mode == "eval":
        return x
    b, c = x.shape[0], x.shape[1]
    if noise is None:
        if rng is None:
            raise ValueError("advstyle_forward needs an rng in train mode")
        noise = (rng.standard_normal((b, c)), rng.standard_normal((b, c)))
    eps_mu, eps_sigma = (np.asarray(n, dtype=x.dtype) for n in noise)
    if eps_mu.shape != (b, c) or eps_sigma.shape != (b, c):
        raise ShapeError("advstyle_forward", (b, c), eps_mu.shape, "noise must be B x C")

    stats = channel_stats(x)
    if state.variant == "full":
        scale_mu, scale_sigma = state.learned(state.sigma_mu), state.learned(state.sigma_sigma)
    else:
        scale_mu, scale_sigma = variant_project(state, *batch_sigma(stats))
    mu_adv = ops.add(stats.mu, ops.mul(Tensor(eps_mu), scale_mu))
    # sigma_adv is deliberately not clamped.
    sigma_adv = ops.add(stats.sigma, ops.mul(Tensor(eps_sigma), scale_sigma))
    return adain_replace(x, mu_adv, sigma_adv, state.eps_floor, stats=stats)


class AdvStyle:
    """Insertion-point module wrapping an AdvStyleState."""

    def __init__(self, state: AdvStyleState):
        self.state = state

    def __call__(self, x: Tensor, mode: Mode, rng: Optional[np.random.Generator]) -> Tensor:
        self.state.mode = mode
        return advstyle_forward(x, self.state, rng)

    def sigma_norms(self) -> Tuple[float, float]:
        return float(np.linalg.norm(self.state.sigma_mu.data)), float(np.linalg.norm(self.state.sigma_sigma.data))
