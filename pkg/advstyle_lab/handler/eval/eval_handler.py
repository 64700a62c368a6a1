import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from advstyle_lab.data.benchmark import TARGET_SPLITS, read_benchmark, training_split
from advstyle_lab.errors import ConfigError
from advstyle_lab.helper.config_utils import load_run_config, validate_existing_path, validate_names
from advstyle_lab.helper.json_utils import create_response
from advstyle_lab.metrics.evaluation import evaluate
from advstyle_lab.metrics.report import build_report, write_report
from advstyle_lab.models import DataConfig, RunConfigFile
from advstyle_lab.nn.checkpoint import load_checkpoint

logger = logging.getLogger(__name__)


def saved_run_config(checkpoint: Path) -> Optional[RunConfigFile]:
    """The ``config.json`` saved next to a checkpoint, or None if there is none."""
    config_path = checkpoint.parent / "config.json"
    if not config_path.is_file():
        return None
    try:
        return load_run_config(config_path)
    except ConfigError:
        logger.warning("ignoring unreadable %s", config_path)
        return None


def validate_eval_domains(
    domains: Optional[Sequence[str]], available: Sequence[str], data: DataConfig
) -> Dict[str, Any]:
    """
    Resolve the splits to report.

    Single-source runs need at least two target splits. A leave-one-out run is
    tested on its held-out split only.
    """
    if data.protocol == "leave_one_out":
        return validate_names(domains or (data.held_out,), [data.held_out], "--domains")
    validation = validate_names(domains or TARGET_SPLITS, [s for s in available if s != "train"], "--domains")
    if validation["valid"] and len(validation["names"]) < 2:
        return {"valid": False, "error": "--domains: aggregation needs at least two target domains"}
    return validation


def eval_handler(
    checkpoint: str,
    data_dir: str,
    out_dir: str,
    domains: Optional[Sequence[str]] = None,
    batch_size: int = 256,
    run_id: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Evaluate a checkpoint on its training samples and the requested test splits.

    The training protocol is read from the ``config.json`` next to the
    checkpoint; without one the run counts as single-source.

    Args:
        checkpoint: Archive written by train.
        data_dir: Directory written by gen-data.
        out_dir: Where ``metrics.json`` and ``metrics.csv`` go.
        domains: Target splits (at least two); defaults to all three, or to
            the held-out split of a leave-one-out run.
        batch_size: Evaluation batch size; does not affect the result.
        run_id: Label stored in the report; defaults to the checkpoint's directory name.

    Returns:
        Response dict carrying the MetricsReport.
    """
    for path, key, directory in ((checkpoint, "--checkpoint", False), (data_dir, "--data", True)):
        validation = validate_existing_path(path, key, directory)
        if not validation["valid"]:
            return create_response(False, validation["error"], exit_code=1)
    if batch_size < 1:
        return create_response(False, "--batch-size: must be positive", exit_code=1)

    try:
        benchmark = read_benchmark(data_dir)
        model = load_checkpoint(checkpoint)
    except ConfigError as exc:
        return create_response(False, str(exc), exit_code=1)

    checkpoint_path = Path(checkpoint)
    saved = saved_run_config(checkpoint_path)
    data = saved.data if saved is not None else DataConfig()
    validation = validate_eval_domains(domains, list(benchmark.splits), data)
    if not validation["valid"]:
        return create_response(False, validation["error"], exit_code=1)
    names = validation["names"]

    try:
        accuracies = {name: evaluate(model, benchmark[name], batch_size) for name in names}
        source = evaluate(model, training_split(benchmark, data), batch_size)
        report = build_report(
            run_id or checkpoint_path.resolve().parent.name,
            accuracies,
            config_hash=saved.config_hash() if saved is not None else "",
            source_accuracy=source,
        )
        write_report(report, out_dir, names)
    except Exception as exc:
        logger.exception("evaluation failed")
        return create_response(False, f"Error during evaluation: {exc}")

    return create_response(
        True,
        f"Mean target accuracy {report.mean:.2f}% (std {report.std:.2f}) over {len(names)} domains",
        {"report": report.model_dump(mode="json"), "out": str(out_dir)},
    )
