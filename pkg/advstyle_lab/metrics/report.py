"""MetricsReport construction and its JSON / CSV serializations."""

import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

from advstyle_lab.helper.file_utils import PathLike, atomic_write_text
from advstyle_lab.metrics.divergence import PCAProjection
from advstyle_lab.metrics.evaluation import aggregate
from advstyle_lab.models import MetricsReport

REPORT_COLUMNS = ("run_id", "config_hash", "source_accuracy", "mean", "std")
SWEEP_COLUMNS = ("method", "insertion_points", "lam", "variant", "asa_mode", "protocol", "seed")


def build_report(
    run_id: str,
    domain_accuracies: Mapping[str, float],
    config_hash: str = "",
    source_accuracy: Optional[float] = None,
    per_seed: Optional[List[Dict[str, float]]] = None,
    a_distance: Optional[Mapping[str, float]] = None,
) -> MetricsReport:
    """
    Assemble a MetricsReport.

    A single domain (the held-out split of a leave-one-out run) is reported
    with its own accuracy as the mean and a std of 0.

    Raises:
        ValueError: With no domains.
    """
    values = list(domain_accuracies.values())
    if not values:
        raise ValueError("a report needs at least one domain")
    mean, std = aggregate(values) if len(values) > 1 else (float(values[0]), 0.0)
    return MetricsReport(
        run_id=run_id,
        config_hash=config_hash,
        source_accuracy=source_accuracy,
        domain_accuracies=dict(domain_accuracies),
        mean=mean,
        std=std,
        per_seed=per_seed or [],
        a_distance=dict(a_distance or {}),
    )


def csv_columns(domains: Sequence[str], sweep: bool = False) -> List[str]:
    """Frozen column order: sweep keys (if any), report keys, then acc_<domain>."""
    leading = list(SWEEP_COLUMNS) if sweep else []
    return leading + list(REPORT_COLUMNS) + [f"acc_{d}" for d in domains]


def report_row(report: MetricsReport, extra: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    row: Dict[str, Any] = dict(extra or {})
    row.update(
        run_id=report.run_id,
        config_hash=report.config_hash,
        source_accuracy="" if report.source_accuracy is None else f"{report.source_accuracy:.4f}",
        mean=f"{report.mean:.4f}",
        std=f"{report.std:.4f}",
    )
    for domain, acc in report.domain_accuracies.items():
        row[f"acc_{domain}"] = f"{acc:.4f}"
    return row


def rows_to_csv(rows: Sequence[Mapping[str, Any]], columns: Sequence[str]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(columns), extrasaction="raise", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: row.get(c, "") for c in columns})
    return buffer.getvalue()


def write_report(report: MetricsReport, out_dir: PathLike, domains: Sequence[str]) -> None:
    """Write ``metrics.json`` and a one-row ``metrics.csv`` atomically."""
    out = Path(out_dir)
    atomic_write_text(out / "metrics.json", json.dumps(report.model_dump(mode="json"), sort_keys=True, indent=2) + "\n")
    atomic_write_text(out / "metrics.csv", rows_to_csv([report_row(report)], csv_columns(domains)))


def projection_csv(projection: PCAProjection, labels: Sequence[str]) -> str:
    """One row per projected point: split label, index within the split, pc1..pcD."""
    if len(labels) != projection.coordinates.shape[0]:
        raise ValueError("one split label per projected point is required")
    dim = projection.coordinates.shape[1]
    columns = ["split", "index"] + [f"pc{i + 1}" for i in range(dim)]
    counters: Dict[str, int] = {}
    rows = []
    for label, point in zip(labels, projection.coordinates):
        index = counters.get(label, 0)
        counters[label] = index + 1
        row: Dict[str, Any] = {"split": label, "index": index}
        row.update({f"pc{j + 1}": f"{value:.6f}" for j, value in enumerate(point)})
        rows.append(row)
    return rows_to_csv(rows, columns)
