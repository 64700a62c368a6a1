"""Per-domain color styling of glyph masks."""

import numpy as np

from advstyle_lab.models import DomainSpec, Palette

FG = 0.85
BG = 0.15
MIN_GAIN = 0.05


def choose_palette(spec: DomainSpec, k: int, rng: np.random.Generator) -> Palette:
    """Palette ``k`` for class-correlated domains, a uniform draw otherwise."""
    if spec.correlation == "class_correlated":
        return spec.palettes[k % len(spec.palettes)]
    return spec.palettes[int(rng.integers(len(spec.palettes)))]


def stylize(mask: np.ndarray, spec: DomainSpec, k: int, rng: np.random.Generator) -> np.ndarray:
    """
    Colorize a 1 x H x W mask into a 3 x H x W image in [0, 1].

    image_c = clip(gain_c * (FG*mask + BG*(1-mask)) + bias_c, 0, 1) ** contrast,
    with gain and bias jittered around the chosen palette and one contrast
    exponent per image.
    """
    palette = choose_palette(spec, k, rng)
    gain = np.asarray(palette.gain) + rng.normal(0.0, spec.gain_jitter, size=3)
    gain = np.copysign(np.maximum(np.abs(gain), MIN_GAIN), gain)
    bias = np.asarray(palette.bias) + rng.normal(0.0, spec.bias_jitter, size=3)
    contrast = rng.uniform(*spec.contrast_range)
    base = FG * mask + BG * (1.0 - mask)
    image = np.clip(gain[:, None, None] * base + bias[:, None, None], 0.0, 1.0)
    return image ** contrast
