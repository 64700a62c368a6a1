import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np

from advstyle_lab.data.benchmark import TARGET_SPLITS, read_benchmark
from advstyle_lab.errors import ConfigError
from advstyle_lab.helper.config_utils import validate_existing_path, validate_pairs
from advstyle_lab.helper.file_utils import atomic_write_text
from advstyle_lab.helper.json_utils import create_response
from advstyle_lab.helper.plot_utils import scatter_svg
from advstyle_lab.metrics.divergence import a_distance, pca_project
from advstyle_lab.metrics.evaluation import extract_features
from advstyle_lab.metrics.report import projection_csv
from advstyle_lab.models import EvalConfig
from advstyle_lab.nn.checkpoint import load_checkpoint

logger = logging.getLogger(__name__)

DEFAULT_PAIRS = tuple(f"train:{target}" for target in TARGET_SPLITS)


def adistance_handler(
    checkpoint: str,
    data_dir: str,
    out_dir: str,
    pairs: Optional[Sequence[str]] = None,
    seed: int = 0,
    eval_config: Optional[EvalConfig] = None,
    plot: bool = False,
) -> Dict[str, Any]:
    """
    Feature-distribution distances between splits plus a joint PCA projection.

    Writes ``adistance.json`` ({"source:target": distance}), ``pca.csv`` and,
    with ``plot``, ``pca.svg``.

    Args:
        checkpoint: Archive written by train.
        data_dir: Directory written by gen-data.
        out_dir: Output directory.
        pairs: ``source:target`` split pairs; defaults to the source against each target.
        seed: Split seed of the domain classifier.
        eval_config: Classifier epochs/learning rate and PCA dimension.
        plot: Also write an SVG scatter (needs matplotlib).

    Returns:
        Response dict with the distance table and explained-variance ratios.
    """
    for path, key, directory in ((checkpoint, "--checkpoint", False), (data_dir, "--data", True)):
        validation = validate_existing_path(path, key, directory)
        if not validation["valid"]:
            return create_response(False, validation["error"], exit_code=1)
    cfg = eval_config or EvalConfig()

    try:
        benchmark = read_benchmark(data_dir)
        model = load_checkpoint(checkpoint)
    except ConfigError as exc:
        return create_response(False, str(exc), exit_code=1)

    validation = validate_pairs(pairs or DEFAULT_PAIRS, list(benchmark.splits))
    if not validation["valid"]:
        return create_response(False, validation["error"], exit_code=1)
    parsed = validation["pairs"]

    try:
        splits = list(dict.fromkeys(name for pair in parsed for name in pair))
        features = {name: extract_features(model, benchmark[name], cfg.batch_size) for name in splits}
        distances = {
            f"{source}:{target}": a_distance(
                features[source], features[target], seed, cfg.adistance_epochs, cfg.adistance_lr
            )
            for source, target in parsed
        }
        pooled = np.concatenate([features[name] for name in splits])
        labels = [name for name in splits for _ in range(len(features[name]))]
        projection = pca_project(pooled, cfg.pca_dim)

        out = Path(out_dir)
        atomic_write_text(out / "adistance.json", json.dumps(distances, sort_keys=True, indent=2) + "\n")
        atomic_write_text(out / "pca.csv", projection_csv(projection, labels))
        plotted = plot and cfg.pca_dim >= 2 and scatter_svg(projection.coordinates, labels, out / "pca.svg")
    except ValueError as exc:
        return create_response(False, f"Cannot compute divergence: {exc}")
    except Exception as exc:
        logger.exception("a-distance failed")
        return create_response(False, f"Error computing A-distance: {exc}")

    return create_response(
        True,
        f"A-distance computed for {len(distances)} pairs",
        {
            "a_distance": distances,
            "explained_variance_ratio": projection.explained_variance_ratio.tolist(),
            "out": str(out),
            "plot": bool(plotted),
        },
    )
