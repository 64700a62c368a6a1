"""Optional SVG figures; needs the ``plot`` extra (matplotlib)."""

import io
import logging
from typing import Dict, Sequence

import numpy as np

from advstyle_lab.helper.file_utils import PathLike, atomic_write_text

logger = logging.getLogger(__name__)


def plotting_available() -> bool:
    try:
        import matplotlib  # noqa: F401
    except ImportError:
        return False
    return True


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "advstyle-lab"
    import matplotlib.pyplot as plt

    return plt


def _save_svg(fig, path: PathLike) -> None:
    buffer = io.StringIO()
    # Without a date the SVG bytes depend on the data only.
    fig.savefig(buffer, format="svg", metadata={"Date": None})
    atomic_write_text(path, buffer.getvalue())


def scatter_svg(coordinates: np.ndarray, labels: Sequence[str], path: PathLike, title: str = "") -> bool:
    """
    Scatter the first two PCA coordinates, one color per split label.

    Returns:
        False (and writes nothing) when matplotlib is not installed.
    """
    if not plotting_available():
        logger.warning("matplotlib not installed; skipping %s", path)
        return False
    plt = _pyplot()
    labels = np.asarray(labels)
    fig, ax = plt.subplots(figsize=(5, 5))
    for label in dict.fromkeys(labels.tolist()):
        points = coordinates[labels == label]
        ax.scatter(points[:, 0], points[:, 1], s=6, alpha=0.6, label=label)
    ax.set_xlabel("pc1")
    ax.set_ylabel("pc2")
    ax.legend(loc="best", fontsize="small")
    if title:
        ax.set_title(title)
    _save_svg(fig, path)
    plt.close(fig)
    return True


def sweep_svg(series: Dict[str, Sequence[tuple]], path: PathLike, xlabel: str = "lambda") -> bool:
    """Mean target accuracy against a swept value, one line per series of (x, y) pairs."""
    if not plotting_available():
        logger.warning("matplotlib not installed; skipping %s", path)
        return False
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, points in series.items():
        xs, ys = zip(*sorted(points))
        ax.plot(xs, ys, marker="o", label=name)
    # symlog keeps lambda = 0 on the axis.
    ax.set_xscale("symlog", linthresh=0.5)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("mean target accuracy (%)")
    ax.legend(loc="best", fontsize="small")
    _save_svg(fig, path)
    plt.close(fig)
    return True
