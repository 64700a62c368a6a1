"""
Grid sweeps over method, insertion set, lambda, variant, training mode and protocol.

A grid file is a JSON object whose keys are a subset of ``GRID_KEYS``, each
mapping to a list of values. Missing keys take the value of the base
configuration. Methods other than AdvStyle ignore lambda, variant and
training mode, so they run once per insertion set, protocol and seed.
"""

import functools
import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from pydantic import ValidationError

from advstyle_lab.data.benchmark import SPLITS, Benchmark, evaluation_splits, read_benchmark, training_split
from advstyle_lab.errors import ConfigError
from advstyle_lab.helper.config_utils import load_run_config, validate_existing_path, validate_names, validate_seeds
from advstyle_lab.helper.file_utils import atomic_write_text
from advstyle_lab.helper.json_utils import create_response
from advstyle_lab.helper.plot_utils import sweep_svg
from advstyle_lab.metrics.evaluation import evaluate
from advstyle_lab.metrics.report import build_report, csv_columns, report_row, rows_to_csv
from advstyle_lab.models import RunConfigFile
from advstyle_lab.train.trainer import fit

logger = logging.getLogger(__name__)

GRID_KEYS = ("method", "insertion_points", "lam", "variant", "asa_mode", "protocol")
# Where each grid key lives in a RunConfigFile document.
_TARGETS = {
    "method": ("model", "method"),
    "insertion_points": ("model", "insertion_points"),
    "lam": ("method", "lam"),
    "variant": ("method", "variant"),
    "asa_mode": ("train", "asa_mode"),
    "protocol": ("data", "protocol"),
}


def load_grid(path: str, base: RunConfigFile) -> Dict[str, List[Any]]:
    """Read a grid file, filling missing axes from ``base``."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise ConfigError(str(path), "grid must be a JSON object")
    unknown = sorted(set(document) - set(GRID_KEYS))
    if unknown:
        raise ConfigError(f"grid.{unknown[0]}", f"unknown grid key; expected a subset of {list(GRID_KEYS)}")
    base_doc = base.model_dump(mode="json")
    grid = {}
    for key in GRID_KEYS:
        section, field = _TARGETS[key]
        values = document.get(key, [base_doc[section][field]])
        if not isinstance(values, list) or not values:
            raise ConfigError(f"grid.{key}", "must be a non-empty list")
        grid[key] = values
    return grid


def expand_cells(grid: Mapping[str, List[Any]], seeds: Sequence[int]) -> List[Dict[str, Any]]:
    """Cells in deterministic grid order, seeds varying fastest."""
    cells: Dict[Tuple, Dict[str, Any]] = {}
    for values in itertools.product(*(grid[k] for k in GRID_KEYS), seeds):
        cell = dict(zip(GRID_KEYS + ("seed",), values))
        if cell["method"] != "advstyle":
            cell.update(lam=grid["lam"][0], variant=grid["variant"][0], asa_mode="grl")
        key = tuple(json.dumps(cell[k]) for k in GRID_KEYS + ("seed",))
        cells.setdefault(key, cell)
    return list(cells.values())


def cell_config(base: RunConfigFile, cell: Mapping[str, Any]) -> RunConfigFile:
    document = base.model_dump(mode="json")
    for key, (section, field) in _TARGETS.items():
        document[section][field] = cell[key]
    document["train"]["seed"] = cell["seed"]
    try:
        return RunConfigFile.model_validate(document)
    except ValidationError as exc:
        error = exc.errors()[0]
        raise ConfigError(".".join(str(p) for p in error["loc"]), error["msg"]) from exc


def cell_label(cell: Mapping[str, Any]) -> Dict[str, Any]:
    return {
        "method": cell["method"],
        "insertion_points": "+".join(cell["insertion_points"]),
        "lam": cell["lam"],
        "variant": cell["variant"],
        "asa_mode": cell["asa_mode"],
        "protocol": cell["protocol"],
        "seed": cell["seed"],
    }


@functools.lru_cache(maxsize=2)
def _benchmark(data_dir: str) -> Benchmark:
    return read_benchmark(data_dir)


def _fold(config: RunConfigFile, held_out: str) -> RunConfigFile:
    data = config.data.model_copy(update={"held_out": held_out})
    return config.model_copy(update={"data": data})


def run_cell(payload: Tuple[str, str, Dict[str, Any]]) -> Dict[str, Any]:
    """
    Train and evaluate one cell; module-level so worker processes can run it.

    A leave-one-out cell trains one model per split, each tested on the split
    it left out, and reports the held-out accuracies side by side.
    """
    config_json, data_dir, cell = payload
    config = RunConfigFile.model_validate_json(config_json)
    benchmark = _benchmark(data_dir)
    batch_size = config.eval.batch_size
    if config.data.protocol == "leave_one_out":
        accuracies, seen = {}, []
        for held_out in (s for s in SPLITS if s in benchmark.splits):
            fold = _fold(config, held_out)
            model, _ = fit(fold, training_split(benchmark, fold.data))
            accuracies[held_out] = evaluate(model, benchmark[held_out], batch_size)
            seen.append(evaluate(model, training_split(benchmark, fold.data), batch_size))
            logger.debug("fold %s: %.2f%%", held_out, accuracies[held_out])
        source = sum(seen) / len(seen)
    else:
        model, _ = fit(config, benchmark["train"])
        domains = evaluation_splits(config.data, config.eval.domains)
        accuracies = {name: evaluate(model, benchmark[name], batch_size) for name in domains}
        source = evaluate(model, benchmark["train"], batch_size)
    label = cell_label(cell)
    run_id = "-".join(str(v) for v in label.values())
    report = build_report(run_id, accuracies, config_hash=config.config_hash(), source_accuracy=source)
    return {"row": report_row(report, label), "report": report.model_dump(mode="json"), "cell": label}


def report_domains(base: RunConfigFile, configs: Sequence[RunConfigFile]) -> List[str]:
    """acc_<domain> columns: the base evaluation domains, plus every split when a cell leaves one out."""
    domains = list(base.eval.domains)
    if any(c.data.protocol == "leave_one_out" for c in configs):
        domains += [s for s in SPLITS if s not in domains]
    return domains


def _lambda_series(results: List[Dict[str, Any]]) -> Dict[str, List[Tuple[float, float]]]:
    grouped: Dict[Tuple[str, float], List[float]] = {}
    for result in results:
        cell = result["cell"]
        name = f"{cell['method']}[{cell['insertion_points']}|{cell['variant']}|{cell['asa_mode']}|{cell['protocol']}]"
        grouped.setdefault((name, float(cell["lam"])), []).append(result["report"]["mean"])
    series: Dict[str, List[Tuple[float, float]]] = {}
    for (name, lam), means in grouped.items():
        series.setdefault(name, []).append((lam, sum(means) / len(means)))
    return series


def sweep_handler(
    grid_path: str,
    data_dir: str,
    out_dir: str,
    seeds: Optional[str] = None,
    config_path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    workers: int = 1,
    plot: bool = False,
) -> Dict[str, Any]:
    """
    Train and evaluate every grid cell for every seed.

    Args:
        grid_path: Grid JSON file.
        data_dir: Directory written by gen-data.
        out_dir: Where ``sweep.csv``, ``sweep.json`` and optionally ``sweep.svg`` go.
        seeds: ``"0,1,2"`` or ``"0-4"``; defaults to the base config's seed.
        config_path: Base RunConfigFile for every non-swept field.
        overrides: Dotted overrides applied to the base config.
        workers: Parallel worker processes; rows are written in grid order regardless.
        plot: Write mean accuracy against lambda as SVG.

    Returns:
        Response dict with the row count and output paths.
    """
    for path, key, directory in ((grid_path, "--grid", False), (data_dir, "--data", True)):
        validation = validate_existing_path(path, key, directory)
        if not validation["valid"]:
            return create_response(False, validation["error"], exit_code=1)
    if workers < 1:
        return create_response(False, "--workers: must be at least 1", exit_code=1)

    try:
        base = load_run_config(config_path, overrides)
        seed_check = validate_seeds(seeds, default=(base.train.seed,))
        if not seed_check["valid"]:
            return create_response(False, seed_check["error"], exit_code=1)
        grid = load_grid(grid_path, base)
        cells = expand_cells(grid, seed_check["seeds"])
        configs = [cell_config(base, cell) for cell in cells]
        benchmark = _benchmark(str(data_dir))
        domain_check = validate_names(base.eval.domains, list(benchmark.splits), "eval.domains")
        if not domain_check["valid"]:
            return create_response(False, domain_check["error"], exit_code=1)
        for config in configs:
            if config.train.asa_mode == "iterative" and config.model.method != "advstyle":
                raise ConfigError("train.asa_mode", "iterative mode needs method=advstyle")
    except ConfigError as exc:
        return create_response(False, str(exc), exit_code=1)

    payloads = [(config.model_dump_json(), str(data_dir), cell) for config, cell in zip(configs, cells)]
    logger.info("sweep: %d cells on %d worker(s)", len(payloads), workers)
    try:
        if workers == 1:
            results = [run_cell(p) for p in payloads]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run_cell, payloads))
        domains = report_domains(base, configs)
        out = Path(out_dir)
        atomic_write_text(out / "sweep.csv", rows_to_csv([r["row"] for r in results], csv_columns(domains, sweep=True)))
        atomic_write_text(
            out / "sweep.json",
            json.dumps([{"cell": r["cell"], "report": r["report"]} for r in results], sort_keys=True, indent=2) + "\n",
        )
        plotted = plot and sweep_svg(_lambda_series(results), out / "sweep.svg")
    except Exception as exc:
        logger.exception("sweep failed")
        return create_response(False, f"Error during sweep: {exc}")

    return create_response(
        True,
        f"Sweep finished: {len(results)} rows written to {out / 'sweep.csv'}",
        {"rows": len(results), "out": str(out), "plot": bool(plotted)},
    )
