"""Reference classifiers that read either only shape or only color."""

import itertools

import numpy as np

from advstyle_lab.data.glyphs import NUM_CLASSES, draw_glyph

SHIFTS = range(-4, 5)
SCALES = np.linspace(0.8, 1.2, 9)


def extract_mask(image: np.ndarray) -> np.ndarray:
    """Threshold the channel with the widest value range at its midpoint."""
    ranges = image.max(axis=(1, 2)) - image.min(axis=(1, 2))
    channel = image[int(ranges.argmax())]
    midpoint = 0.5 * (channel.max() + channel.min())
    return channel > midpoint


def _templates():
    bank = []
    for k in range(NUM_CLASSES):
        for dy, dx, scale in itertools.product(SHIFTS, SHIFTS, SCALES):
            bank.append((k, draw_glyph(k, (dy, dx), float(scale)).astype(bool)))
    return bank


class ShapeOracle:
    """Best-IoU template match over every shift and a grid of scales."""

    def __init__(self):
        labels, masks = zip(*_templates())
        self.labels = np.asarray(labels)
        self.masks = np.stack(masks).reshape(len(masks), -1)

    def predict(self, images: np.ndarray) -> np.ndarray:
        out = []
        for image in images:
            mask = extract_mask(image).reshape(-1)
            inter = (self.masks & mask).sum(axis=1)
            union = (self.masks | mask).sum(axis=1)
            iou = inter / np.maximum(union, 1)
            out.append(self.labels[int(iou.argmax())])
        return np.asarray(out)


class ColorOracle:
    """Nearest class centroid of per-channel image means, fitted on one split."""

    def fit(self, images: np.ndarray, labels: np.ndarray) -> "ColorOracle":
        means = images.mean(axis=(2, 3))
        self.centroids = np.stack([means[labels == k].mean(axis=0) for k in range(NUM_CLASSES)])
        return self

    def predict(self, images: np.ndarray) -> np.ndarray:
        means = images.mean(axis=(2, 3))
        distances = ((means[:, None, :] - self.centroids[None]) ** 2).sum(axis=2)
        return distances.argmin(axis=1)
