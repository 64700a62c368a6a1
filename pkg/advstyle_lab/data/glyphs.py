"""Procedural class glyphs rendered as binary masks."""

from typing import Callable, Dict, Optional

import numpy as np

from advstyle_lab.models import JitterParams

IMAGE_SIZE = 32
BASE_RADIUS = 8.0

GlyphFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _box(u, v, half):
    return np.maximum(np.abs(u), np.abs(v)) <= half


def _disk(u, v):
    return u * u + v * v <= 1.0


def _square(u, v):
    return _box(u, v, 0.8)


def _cross(u, v):
    vertical = (np.abs(u) <= 0.3) & (np.abs(v) <= 1.0)
    horizontal = (np.abs(v) <= 0.3) & (np.abs(u) <= 1.0)
    return vertical | horizontal


def _triangle(u, v):
    # Apex at the top (v = -1), base at v = 0.8.
    return (v >= -1.0) & (v <= 0.8) & (np.abs(u) <= 0.9 * (v + 1.0) / 1.8)


def _ring(u, v):
    r2 = u * u + v * v
    return (r2 >= 0.55 ** 2) & (r2 <= 1.0)


def _hstripes(u, v):
    return _box(u, v, 0.9) & (np.floor((v + 0.9) / 0.36) % 2 == 0)


def _vstripes(u, v):
    return _hstripes(v, u)


GLYPHS: Dict[str, GlyphFn] = {
    "disk": _disk,
    "square": _square,
    "cross": _cross,
    "triangle": _triangle,
    "ring": _ring,
    "hstripes": _hstripes,
    "vstripes": _vstripes,
}
GLYPH_NAMES = tuple(GLYPHS)
NUM_CLASSES = len(GLYPHS)


def draw_glyph(k: int, shift=(0, 0), scale: float = 1.0, size: int = IMAGE_SIZE) -> np.ndarray:
    """Deterministic size x size {0,1} mask of glyph ``k`` at a given shift (dy, dx) and scale."""
    if not 0 <= k < NUM_CLASSES:
        raise ValueError(f"class index must be in [0, {NUM_CLASSES}), got {k}")
    coords = np.arange(size) + 0.5
    radius = BASE_RADIUS * scale
    v = (coords[:, None] - (size / 2 + shift[0])) / radius
    u = (coords[None, :] - (size / 2 + shift[1])) / radius
    u, v = np.broadcast_arrays(u, v)
    return GLYPHS[GLYPH_NAMES[k]](u, v).astype(np.float64)


def render_content(
    k: int,
    jitter: Optional[JitterParams],
    rng: np.random.Generator,
    size: int = IMAGE_SIZE,
) -> np.ndarray:
    """
    Render glyph ``k`` with random translation and scale.

    Args:
        k: Class index in [0, 7).
        jitter: Translation bound and scale range; None means +-4 px, 0.8-1.2.
        rng: Seeded randomness for the shift (drawn first) and the scale.
        size: Output side length.

    Returns:
        1 x size x size mask with values in {0, 1}.
    """
    jitter = jitter or JitterParams()
    t = jitter.translation
    shift = rng.integers(-t, t + 1, size=2)
    scale = rng.uniform(jitter.scale_min, jitter.scale_max)
    return draw_glyph(k, (int(shift[0]), int(shift[1])), scale, size)[None]
