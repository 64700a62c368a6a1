"""Synthetic multi-domain glyph benchmark and its on-disk format."""

from .benchmark import (
    SPLITS,
    TARGET_SPLITS,
    Benchmark,
    SampleBatch,
    make_benchmark,
    read_benchmark,
    source_palettes,
    write_benchmark,
)
from .glyphs import GLYPH_NAMES, NUM_CLASSES, draw_glyph, render_content
from .styles import BG, FG, choose_palette, stylize

__all__ = [
    "BG",
    "Benchmark",
    "FG",
    "GLYPH_NAMES",
    "NUM_CLASSES",
    "SPLITS",
    "SampleBatch",
    "TARGET_SPLITS",
    "choose_palette",
    "draw_glyph",
    "make_benchmark",
    "read_benchmark",
    "render_content",
    "source_palettes",
    "stylize",
    "write_benchmark",
]
