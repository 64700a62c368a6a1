import logging
from typing import Any, Dict, Optional

from advstyle_lab.data.benchmark import benchmark_from_config, write_benchmark
from advstyle_lab.errors import ConfigError
from advstyle_lab.helper.config_utils import load_run_config
from advstyle_lab.helper.json_utils import create_response

logger = logging.getLogger(__name__)


def validate_output_dir(out: Optional[str]) -> Dict[str, Any]:
    if out is None or str(out).strip() == "":
        return {"valid": False, "error": "--out: an output directory is required"}
    return {"valid": True}


def gen_data_handler(
    seed: Optional[int],
    out: str,
    train_size: Optional[int] = None,
    target_size: Optional[int] = None,
    config_path: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Generate the four-split benchmark and write it to ``out``.

    Only the ``data`` section of the run configuration is used: seed, sizes,
    style and glyph jitter, and per-split DomainSpec overrides.

    Args:
        seed: Benchmark seed; overrides ``data.seed``.
        out: Destination directory.
        train_size: Samples in the source split; overrides ``data.train_size``.
        target_size: Samples per target split; overrides ``data.target_size``.
        config_path: Optional RunConfigFile JSON.

    Returns:
        Response dict with the split sizes and the output directory.
    """
    validation = validate_output_dir(out)
    if not validation["valid"]:
        return create_response(False, validation["error"], exit_code=1)
    overrides = {"data.seed": seed, "data.train_size": train_size, "data.target_size": target_size}
    try:
        config = load_run_config(config_path, overrides).data
    except ConfigError as exc:
        return create_response(False, str(exc), exit_code=1)

    try:
        benchmark = benchmark_from_config(config)
        path = write_benchmark(benchmark, out)
    except ConfigError as exc:
        return create_response(False, str(exc), exit_code=1)
    except Exception as exc:
        logger.exception("gen-data failed")
        return create_response(False, f"Error generating benchmark: {exc}")

    return create_response(
        True,
        f"Benchmark with seed {config.seed} written to {path}",
        {
            "out": str(path),
            "seed": config.seed,
            "sizes": {split: len(batch) for split, batch in benchmark.splits.items()},
        },
    )
