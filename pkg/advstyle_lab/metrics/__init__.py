"""Cross-domain accuracy, aggregation and feature divergence."""

from .divergence import PCAProjection, a_distance, pca_project
from .evaluation import aggregate, evaluate, extract_features, predict
from .report import build_report, csv_columns, projection_csv, report_row, rows_to_csv, write_report

__all__ = [
    "PCAProjection",
    "a_distance",
    "aggregate",
    "build_report",
    "csv_columns",
    "evaluate",
    "extract_features",
    "pca_project",
    "predict",
    "projection_csv",
    "report_row",
    "rows_to_csv",
    "write_report",
]
