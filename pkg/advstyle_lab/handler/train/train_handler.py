import json
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from advstyle_lab.data.benchmark import Benchmark, read_benchmark, training_split
from advstyle_lab.errors import ConfigError, TrainingDivergedError
from advstyle_lab.helper.config_utils import load_run_config, validate_existing_path
from advstyle_lab.helper.file_utils import atomic_write_text
from advstyle_lab.helper.json_utils import create_response
from advstyle_lab.models import RunConfigFile
from advstyle_lab.nn.checkpoint import save_checkpoint
from advstyle_lab.train.trainer import fit

logger = logging.getLogger(__name__)


def validate_data_matches_model(benchmark: Benchmark, config: RunConfigFile) -> Dict[str, Any]:
    """The source images must have the shape and class count the model expects."""
    images = benchmark["train"].images
    spec = config.model
    expected = (spec.in_channels, spec.height, spec.width)
    if images.shape[1:] != expected:
        return {"valid": False, "error": f"model: expects images {expected}, data holds {images.shape[1:]}"}
    if benchmark.num_classes != spec.num_classes:
        return {
            "valid": False,
            "error": f"model.num_classes: {spec.num_classes} does not match the data's {benchmark.num_classes}",
        }
    return {"valid": True}


def train_handler(
    config_path: Optional[str],
    data_dir: str,
    out_dir: str,
    overrides: Optional[Mapping[str, Any]] = None,
) -> Dict[str, Any]:
    """
    Train one model and write its artifacts.

    The training samples follow ``data.protocol``: the source split, or every
    split except ``data.held_out``.

    Writes ``checkpoint.advt``, ``runlog.jsonl``, ``config.json`` and
    ``timings.json`` to ``out_dir``, plus ``checkpoint_epoch<N>.advt`` when
    ``train.checkpoint_every`` is set.

    Args:
        config_path: Optional RunConfigFile JSON.
        data_dir: Directory written by gen-data.
        out_dir: Output directory.
        overrides: Dotted ``section.field`` values taking precedence over the file.

    Returns:
        Response dict with the final loss/accuracy and the config hash.
    """
    validation = validate_existing_path(data_dir, "--data", directory=True)
    if not validation["valid"]:
        return create_response(False, validation["error"], exit_code=1)
    if not out_dir:
        return create_response(False, "--out: an output directory is required", exit_code=1)

    try:
        config = load_run_config(config_path, overrides)
        benchmark = read_benchmark(data_dir)
    except ConfigError as exc:
        return create_response(False, str(exc), exit_code=1)
    validation = validate_data_matches_model(benchmark, config)
    if not validation["valid"]:
        return create_response(False, validation["error"], exit_code=1)

    out = Path(out_dir)
    every = config.train.checkpoint_every

    def on_epoch_end(model, record):
        if every and (record.epoch + 1) % every == 0:
            save_checkpoint(model, out / f"checkpoint_epoch{record.epoch + 1}.advt")

    try:
        model, log = fit(config, training_split(benchmark, config.data), on_epoch_end)
        save_checkpoint(model, out / "checkpoint.advt")
        atomic_write_text(out / "runlog.jsonl", log.to_jsonl())
        atomic_write_text(out / "config.json", config.canonical_json())
        timings = {"epochs": [round(r.wall_clock_s, 6) for r in log.epochs]}
        atomic_write_text(out / "timings.json", json.dumps(timings, indent=2) + "\n")
    except ConfigError as exc:
        return create_response(False, str(exc), exit_code=1)
    except TrainingDivergedError as exc:
        return create_response(False, f"Training diverged: {exc}", {"step": exc.step})
    except Exception as exc:
        logger.exception("training failed")
        return create_response(False, f"Error during training: {exc}")

    last = log.epochs[-1]
    return create_response(
        True,
        f"Trained {config.model.method} for {len(log.epochs)} epochs; artifacts in {out}",
        {
            "out": str(out),
            "config_hash": config.config_hash(),
            "final_loss": last.loss,
            "final_accuracy": last.accuracy,
            "sigma_norms": last.sigma_norms,
        },
    )
