"""SGD with momentum and Adam over registry entries."""

from typing import Dict, List, Sequence

import numpy as np

from advstyle_lab.errors import MissingGradientError
from advstyle_lab.models import TrainConfig
from advstyle_lab.nn.registry import RegisteredParameter


class Optimizer:
    """
    Base class holding the parameters one optimizer updates.

    Weight decay applies to ``theta`` entries only. With ``maximize`` the
    update ascends the loss. Non-negative entries are clamped at zero after
    each step.
    """

    def __init__(
        self,
        params: Sequence[RegisteredParameter],
        lr: float,
        weight_decay: float = 0.0,
        maximize: bool = False,
    ):
        if lr < 0:
            raise ValueError(f"learning rate must be non-negative, got {lr}")
        self.params: List[RegisteredParameter] = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.maximize = maximize

    def _grad(self, entry: RegisteredParameter) -> np.ndarray:
        grad = entry.tensor.grad
        if grad is None:
            raise MissingGradientError(f"parameter {entry.name!r} has no gradient")
        return -grad if self.maximize else grad

    def _decay(self, entry: RegisteredParameter) -> float:
        return self.weight_decay if entry.tag == "theta" else 0.0

    def step(self, lr: float = None) -> None:
        """
        Update every parameter from its gradient.

        Raises:
            MissingGradientError: If a parameter was not reached by the last
                backward pass. Nothing is updated in that case.
        """
        lr = self.lr if lr is None else lr
        grads = [self._grad(entry) for entry in self.params]
        self._begin_step()
        for entry, grad in zip(self.params, grads):
            self._update(entry, grad, lr)
            if entry.nonnegative:
                np.maximum(entry.tensor.data, 0.0, out=entry.tensor.data)

    def _begin_step(self) -> None:
        pass

    def _update(self, entry: RegisteredParameter, grad: np.ndarray, lr: float) -> None:
        raise NotImplementedError

    def zero_grad(self) -> None:
        for entry in self.params:
            entry.tensor.zero_grad()


class SGDMomentum(Optimizer):
    """v <- m*v + g; p <- p - lr*(v + wd*p)."""

    def __init__(self, params, lr, momentum=0.9, weight_decay=0.0, maximize=False):
        super().__init__(params, lr, weight_decay, maximize)
        self.momentum = momentum
        self.velocity: Dict[str, np.ndarray] = {e.name: np.zeros_like(e.tensor.data) for e in self.params}

    def _update(self, entry, grad, lr):
        data = entry.tensor.data
        v = self.velocity[entry.name]
        v *= self.momentum
        v += grad
        data -= (lr * (v + self._decay(entry) * data)).astype(data.dtype, copy=False)


class Adam(Optimizer):
    """Adam with bias correction and L2 weight decay folded into the gradient."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0, maximize=False):
        super().__init__(params, lr, weight_decay, maximize)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {e.name: np.zeros_like(e.tensor.data) for e in self.params}
        self.v = {e.name: np.zeros_like(e.tensor.data) for e in self.params}

    def _begin_step(self) -> None:
        self.t += 1

    def _update(self, entry, grad, lr):
        data = entry.tensor.data
        grad = grad + self._decay(entry) * data
        m, v = self.m[entry.name], self.v[entry.name]
        m *= self.beta1
        m += (1 - self.beta1) * grad
        v *= self.beta2
        v += (1 - self.beta2) * grad * grad
        m_hat = m / (1 - self.beta1 ** self.t)
        v_hat = v / (1 - self.beta2 ** self.t)
        data -= (lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(data.dtype, copy=False)


def build_optimizer(
    params: Sequence[RegisteredParameter], cfg: TrainConfig, lr: float = None, maximize: bool = False
) -> Optimizer:
    """Optimizer of ``cfg.optimizer`` kind over ``params``."""
    lr = cfg.lr if lr is None else lr
    if cfg.optimizer == "adam":
        return Adam(params, lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay, maximize)
    return SGDMomentum(params, lr, cfg.momentum, cfg.weight_decay, maximize)


def optimizer_step(optimizer: Optimizer, lr: float = None) -> None:
    """One update of every parameter the optimizer holds; grads must be populated."""
    optimizer.step(lr)
