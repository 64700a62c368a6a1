"""Top-1 accuracy, feature extraction and cross-domain aggregation."""

from typing import Sequence, Tuple

import numpy as np

from advstyle_lab.core.tensor import Tensor, no_grad
from advstyle_lab.data.benchmark import SampleBatch
from advstyle_lab.nn.mininet import MiniNet


def _batches(split: SampleBatch, batch_size: int):
    if len(split) == 0:
        raise ValueError("cannot evaluate an empty split")
    if batch_size < 1:
        raise ValueError(f"batch_size must be positive, got {batch_size}")
    for start in range(0, len(split), batch_size):
        yield split.subset(slice(start, start + batch_size))


def predict(model: MiniNet, split: SampleBatch, batch_size: int = 256) -> np.ndarray:
    """Arg-max class per sample, eval mode, no tape."""
    out = []
    with no_grad():
        for batch in _batches(split, batch_size):
            logits = model.forward(Tensor(batch.images.astype(model.dtype)), "eval")
            out.append(logits.data.argmax(axis=1))
    return np.concatenate(out)


def evaluate(model: MiniNet, split: SampleBatch, batch_size: int = 256) -> float:
    """
    Top-1 accuracy in percent.

    Raises:
        ValueError: If the split is empty.
    """
    predictions = predict(model, split, batch_size)
    return float(100.0 * np.mean(predictions == split.labels))


def extract_features(model: MiniNet, split: SampleBatch, batch_size: int = 256) -> np.ndarray:
    """Penultimate (pooled) features, N x w5, in float64."""
    out = []
    with no_grad():
        for batch in _batches(split, batch_size):
            features = model.features(Tensor(batch.images.astype(model.dtype)), "eval")
            out.append(features.data.astype(np.float64))
    return np.concatenate(out)


def aggregate(accuracies: Sequence[float]) -> Tuple[float, float]:
    """
    Mean and sample standard deviation (N-1) over per-domain accuracies.

    Raises:
        ValueError: With fewer than two domains.
    """
    values = np.asarray(list(accuracies), dtype=np.float64)
    if values.size < 2:
        raise ValueError(f"aggregate needs at least two domains, got {values.size}")
    return float(values.mean()), float(values.std(ddof=1))
