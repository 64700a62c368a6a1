"""End-to-end GRL training and iterative minimax training.

Both procedures share one loop: per epoch the source split is shuffled, cut
into mini-batches and each batch drives one training step. They differ only in
what a step does.

- GRL: one forward, one backward, one update of every registered parameter.
  The reversal layers make the same update descend on theta and ascend on
  Sigma.
- Iterative: ``inner_steps`` ascent updates of Sigma (theta frozen), then one
  descent update of theta (Sigma frozen). The reversal is switched off and the
  ascent is an explicit maximizing optimizer.
"""

import logging
import math
import time
from typing import Callable, Optional, Tuple

import numpy as np

from advstyle_lab.core import ops
from advstyle_lab.core.tensor import Tensor, backward
from advstyle_lab.data.benchmark import SampleBatch
from advstyle_lab.errors import ConfigError, TrainingDivergedError
from advstyle_lab.models import EpochRecord, RunConfigFile, RunLog, TrainConfig
from advstyle_lab.nn.mininet import MiniNet, build_mininet
from advstyle_lab.train.optim import Optimizer, build_optimizer

logger = logging.getLogger(__name__)

EpochCallback = Callable[[MiniNet, EpochRecord], None]
# A step gets (images, labels, global step, lr factor) and returns (loss, logits).
StepFn = Callable[[Tensor, np.ndarray, int, float], Tuple[float, np.ndarray]]


def cosine_factor(step: int, total_steps: int) -> float:
    """0.5 * (1 + cos(pi * step / total)), from 1 at step 0 towards 0."""
    if total_steps <= 0:
        return 1.0
    return 0.5 * (1.0 + math.cos(math.pi * step / total_steps))


def _loss(model: MiniNet, images: Tensor, labels: np.ndarray, rng: np.random.Generator) -> Tuple[Tensor, np.ndarray]:
    logits = model.forward(images, "train", rng)
    return ops.softmax_cross_entropy(logits, labels), logits.data


def _check_finite(loss: Tensor, step: int) -> float:
    value = loss.item()
    if not math.isfinite(value):
        raise TrainingDivergedError(step, value)
    return value


def _descend(
    model: MiniNet, optimizer: Optimizer, images, labels, rng, step: int, lr: float
) -> Tuple[float, np.ndarray]:
    model.registry.zero_grad()
    loss, logits = _loss(model, images, labels, rng)
    value = _check_finite(loss, step)
    backward(loss)
    optimizer.step(lr)
    return value, logits


def _run(
    model: MiniNet,
    data: SampleBatch,
    cfg: TrainConfig,
    step_fn: StepFn,
    run_config: Optional[RunConfigFile],
    on_epoch_end: Optional[EpochCallback],
    data_rng: np.random.Generator,
) -> RunLog:
    n = len(data)
    if n == 0:
        raise ValueError("training split is empty")
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    total_steps = steps_per_epoch * cfg.epochs
    snapshot = run_config or RunConfigFile(model=model.spec, method=model.method_config, train=cfg)
    log = RunLog(seed=cfg.seed, config=snapshot)

    step = 0
    for epoch in range(cfg.epochs):
        started = time.perf_counter()
        order = data_rng.permutation(n)
        loss_sum, correct = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            images = Tensor(data.images[idx].astype(model.dtype, copy=False))
            labels = data.labels[idx]
            factor = cosine_factor(step, total_steps) if cfg.cosine else 1.0
            loss, logits = step_fn(images, labels, step, factor)
            loss_sum += loss * len(idx)
            correct += int((logits.argmax(axis=1) == labels).sum())
            step += 1

        norms = model.sigma_norms()
        if not all(math.isfinite(v) for v in norms.values()):
            raise TrainingDivergedError(step, float("nan"))
        record = EpochRecord(
            epoch=epoch,
            loss=loss_sum / n,
            accuracy=100.0 * correct / n,
            sigma_norms=norms,
            wall_clock_s=time.perf_counter() - started,
        )
        log.epochs.append(record)
        logger.info(
            "epoch %d/%d loss=%.4f acc=%.2f%% sigma=%.4f",
            epoch + 1,
            cfg.epochs,
            record.loss,
            record.accuracy,
            sum(norms.values()),
        )
        if on_epoch_end is not None:
            on_epoch_end(model, record)
    return log


def _rngs(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    data_seq, noise_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(data_seq), np.random.default_rng(noise_seq)


def train_grl(
    model: MiniNet,
    data: SampleBatch,
    cfg: TrainConfig,
    run_config: Optional[RunConfigFile] = None,
    on_epoch_end: Optional[EpochCallback] = None,
) -> Tuple[MiniNet, RunLog]:
    """
    Train with a single optimizer over theta and Sigma.

    Also the trainer for ERM and the random baselines, which have no Sigma.

    Args:
        model: Network built with the run's method and insertion points.
        data: Source split.
        cfg: Optimization settings; ``asa_mode`` must be ``grl``.
        run_config: Snapshot stored in the RunLog; built from the model when omitted.
        on_epoch_end: Called after every epoch, e.g. to write checkpoints.

    Returns:
        The trained model (updated in place) and its RunLog.

    Raises:
        ConfigError: If ``asa_mode`` is not ``grl``.
        TrainingDivergedError: On a non-finite loss or Sigma norm.
    """
    if cfg.asa_mode != "grl":
        raise ConfigError("train.asa_mode", f"train_grl needs asa_mode=grl, got {cfg.asa_mode}")
    data_rng, noise_rng = _rngs(cfg.seed)
    model.set_reverse_gradients(True)
    optimizer = build_optimizer(model.registry.entries(), cfg)

    def step_fn(images, labels, step, factor):
        return _descend(model, optimizer, images, labels, noise_rng, step, cfg.lr * factor)

    log = _run(model, data, cfg, step_fn, run_config, on_epoch_end, data_rng)
    return model, log


def train_iterative(
    model: MiniNet,
    data: SampleBatch,
    cfg: TrainConfig,
    run_config: Optional[RunConfigFile] = None,
    on_epoch_end: Optional[EpochCallback] = None,
) -> Tuple[MiniNet, RunLog]:
    """
    Alternate Sigma ascent and theta descent with the reversal disabled.

    Every phase runs its own forward pass, so each inner ascent step sees
    fresh noise.

    Raises:
        ConfigError: If ``asa_mode`` is not ``iterative`` or the model does not
            use AdvStyle.
        TrainingDivergedError: On a non-finite loss or Sigma norm.
    """
    if cfg.asa_mode != "iterative":
        raise ConfigError("train.asa_mode", f"train_iterative needs asa_mode=iterative, got {cfg.asa_mode}")
    if model.spec.method != "advstyle":
        raise ConfigError("model.method", f"iterative minimax needs method=advstyle, got {model.spec.method}")
    data_rng, noise_rng = _rngs(cfg.seed)
    theta_opt = build_optimizer(model.registry.entries("theta"), cfg)
    sigma_opt = build_optimizer(model.registry.entries("sigma"), cfg, lr=cfg.effective_sigma_lr, maximize=True)

    def step_fn(images, labels, step, factor):
        for _ in range(cfg.inner_steps):
            _descend(model, sigma_opt, images, labels, noise_rng, step, cfg.effective_sigma_lr * factor)
        return _descend(model, theta_opt, images, labels, noise_rng, step, cfg.lr * factor)

    model.set_reverse_gradients(False)
    try:
        log = _run(model, data, cfg, step_fn, run_config, on_epoch_end, data_rng)
    finally:
        model.set_reverse_gradients(True)
    return model, log


def fit(
    config: RunConfigFile,
    data: SampleBatch,
    on_epoch_end: Optional[EpochCallback] = None,
) -> Tuple[MiniNet, RunLog]:
    """Build the configured MiniNet from ``train.seed`` and run the trainer ``train.asa_mode`` selects."""
    model = build_mininet(config.model, config.train.seed, config.method, config.train.dtype)
    trainer = train_iterative if config.train.asa_mode == "iterative" else train_grl
    return trainer(model, data, config.train, config, on_epoch_end)
