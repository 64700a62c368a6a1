"""
Four-domain synthetic benchmark with a color shortcut in the source domain.

The source split (domain 0) ties every class to its own dark palette, so color
alone predicts the label. The three target splits use bright palettes drawn
independently of the class, so the shortcut breaks while glyph shape stays
informative everywhere.
"""

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from advstyle_lab.data.glyphs import IMAGE_SIZE, NUM_CLASSES, render_content
from advstyle_lab.data.styles import stylize
from advstyle_lab.errors import ConfigError
from advstyle_lab.helper.advt_utils import FORMAT_VERSION, read_tensor, write_tensor
from advstyle_lab.helper.file_utils import PathLike, atomic_write_text
from advstyle_lab.models import SPLIT_NAMES, DataConfig, DomainSpec, JitterParams, Palette

logger = logging.getLogger(__name__)

SPLITS = SPLIT_NAMES
TARGET_SPLITS = SPLITS[1:]
MANIFEST = "manifest.json"

# Source levels per channel: (gain, bias).
_LEVEL_A = (0.35, 0.0)
_LEVEL_B = (0.4, 0.55)
_TARGET_GAIN = (0.95, 1.15)
_TARGET_BIAS = (-0.3, 0.2)
MIN_PALETTE_GAP = 0.5


@dataclass
class SampleBatch:
    """Images (N x 3 x H x W, float32 in [0, 1]), labels and domain ids (int64)."""

    images: np.ndarray
    labels: np.ndarray
    domains: np.ndarray

    def __post_init__(self):
        n = self.images.shape[0]
        if self.labels.shape != (n,) or self.domains.shape != (n,):
            raise ValueError("images, labels and domains must share the leading dimension")

    def __len__(self) -> int:
        return int(self.images.shape[0])

    def subset(self, index) -> "SampleBatch":
        return SampleBatch(self.images[index], self.labels[index], self.domains[index])

    @classmethod
    def concat(cls, batches: Sequence["SampleBatch"]) -> "SampleBatch":
        if not batches:
            raise ValueError("nothing to concatenate")
        return cls(
            np.concatenate([b.images for b in batches]),
            np.concatenate([b.labels for b in batches]),
            np.concatenate([b.domains for b in batches]),
        )


@dataclass
class Benchmark:
    """Generated splits and the domain specs that produced them."""

    seed: int
    splits: Dict[str, SampleBatch]
    domains: Dict[str, DomainSpec]
    jitter: JitterParams = field(default_factory=JitterParams)
    num_classes: int = NUM_CLASSES

    def __getitem__(self, split: str) -> SampleBatch:
        if split not in self.splits:
            raise KeyError(f"unknown split {split!r}; available: {sorted(self.splits)}")
        return self.splits[split]


def source_palettes() -> Tuple[Palette, ...]:
    """Seven per-class palettes: every A/B channel code except all-A."""
    codes = [c for c in itertools.product((_LEVEL_A, _LEVEL_B), repeat=3) if c != (_LEVEL_A,) * 3]
    return tuple(Palette(gain=tuple(l[0] for l in code), bias=tuple(l[1] for l in code)) for code in codes)


def target_palettes(rng: np.random.Generator, count: int, avoid: Tuple[Palette, ...]) -> Tuple[Palette, ...]:
    """Random bright palettes at least MIN_PALETTE_GAP away from every palette in ``avoid``."""
    chosen: List[Palette] = []
    while len(chosen) < count:
        candidate = Palette(
            gain=tuple(float(g) for g in rng.uniform(*_TARGET_GAIN, size=3)),
            bias=tuple(float(b) for b in rng.uniform(*_TARGET_BIAS, size=3)),
        )
        if all(candidate.distance(p) >= MIN_PALETTE_GAP for p in avoid):
            chosen.append(candidate)
    return tuple(chosen)


def domain_specs(rng: np.random.Generator, config: Optional[DataConfig] = None) -> Dict[str, DomainSpec]:
    """
    DomainSpecs of all four splits.

    Target palettes are drawn in split order even for splits that ``config``
    overrides, so an override never shifts the palettes of the others.
    """
    config = config or DataConfig()
    style = dict(gain_jitter=config.gain_jitter, bias_jitter=config.bias_jitter, contrast_range=config.contrast_range)
    source = source_palettes()
    specs = {"train": DomainSpec(domain_id=0, palettes=source, correlation="class_correlated", **style)}
    for domain_id, split in enumerate(TARGET_SPLITS, start=1):
        pool = target_palettes(rng, NUM_CLASSES, source)
        specs[split] = DomainSpec(domain_id=domain_id, palettes=pool, correlation="decorrelated", **style)
    specs.update(config.domains)
    return specs


def balanced_labels(n: int, rng: np.random.Generator, num_classes: int = NUM_CLASSES) -> np.ndarray:
    """Shuffled labels whose class histogram is uniform within +-1."""
    return rng.permutation(np.arange(n) % num_classes).astype(np.int64)


def render_split(spec: DomainSpec, n: int, jitter: JitterParams, rng: np.random.Generator) -> SampleBatch:
    labels = balanced_labels(n, rng)
    images = np.empty((n, 3, IMAGE_SIZE, IMAGE_SIZE), dtype=np.float32)
    for i, k in enumerate(labels):
        mask = render_content(int(k), jitter, rng)
        images[i] = stylize(mask, spec, int(k), rng)
    return SampleBatch(images, labels, np.full(n, spec.domain_id, dtype=np.int64))


def make_benchmark(
    seed: int,
    train_size: int = 2048,
    target_size: int = 1024,
    jitter: Optional[JitterParams] = None,
    config: Optional[DataConfig] = None,
) -> Benchmark:
    """
    Generate the source split and three target splits deterministically from ``seed``.

    Args:
        seed: Root seed; palettes and each split get their own child stream.
        train_size: Samples in the source split.
        target_size: Samples in each target split.
        jitter: Glyph translation/scale jitter; falls back to ``config.jitter``.
        config: Style jitter and per-split DomainSpec overrides.

    Returns:
        The Benchmark holding all four splits.
    """
    jitter = jitter or (config.jitter if config is not None else JitterParams())
    palette_seq, *split_seqs = np.random.SeedSequence(seed).spawn(1 + len(SPLITS))
    specs = domain_specs(np.random.default_rng(palette_seq), config)
    splits = {}
    for split, seq in zip(SPLITS, split_seqs):
        n = train_size if split == "train" else target_size
        splits[split] = render_split(specs[split], n, jitter, np.random.default_rng(seq))
        logger.debug("rendered %s: %d samples", split, n)
    return Benchmark(seed=seed, splits=splits, domains=specs, jitter=jitter)


def benchmark_from_config(config: DataConfig) -> Benchmark:
    """make_benchmark with every setting taken from a DataConfig."""
    return make_benchmark(config.seed, config.train_size, config.target_size, config.jitter, config)


def training_split(benchmark: Benchmark, config: DataConfig) -> SampleBatch:
    """
    Samples a model is trained on under ``config.protocol``.

    single_source uses the source split alone. leave_one_out concatenates every
    other split, in split order, leaving ``config.held_out`` for testing.
    """
    if config.protocol == "single_source":
        return benchmark["train"]
    if config.held_out not in benchmark.splits:
        raise ConfigError("data.held_out", f"{config.held_out} is not a split of this benchmark")
    return SampleBatch.concat([benchmark[s] for s in SPLITS if s in benchmark.splits and s != config.held_out])


def evaluation_splits(config: DataConfig, domains: Sequence[str]) -> Tuple[str, ...]:
    """Splits a run is tested on: ``domains``, or only the held-out split under leave_one_out."""
    if config.protocol == "leave_one_out":
        return (config.held_out,)
    return tuple(domains)


def _files(split: str) -> Dict[str, str]:
    return {kind: f"{split}_{kind}.advt" for kind in ("images", "labels", "domains")}


def write_benchmark(benchmark: Benchmark, out_dir: PathLike) -> Path:
    """
    Write one ADVT tensor per split and field plus ``manifest.json``.

    Labels and domain ids are stored as float32 and cast back on load.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for split, batch in benchmark.splits.items():
        files = _files(split)
        write_tensor(out / files["images"], batch.images.astype(np.float32))
        write_tensor(out / files["labels"], batch.labels.astype(np.float32))
        write_tensor(out / files["domains"], batch.domains.astype(np.float32))
    manifest = {
        "format_version": FORMAT_VERSION,
        "seed": benchmark.seed,
        "num_classes": benchmark.num_classes,
        "image_shape": [3, IMAGE_SIZE, IMAGE_SIZE],
        "jitter": benchmark.jitter.model_dump(mode="json"),
        "sizes": {split: len(batch) for split, batch in benchmark.splits.items()},
        "domains": {split: spec.model_dump(mode="json") for split, spec in benchmark.domains.items()},
        "files": {split: _files(split) for split in benchmark.splits},
    }
    atomic_write_text(out / MANIFEST, json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    logger.info("benchmark (seed %d) written to %s", benchmark.seed, out)
    return out


def read_benchmark(data_dir: PathLike) -> Benchmark:
    """
    Load a benchmark written by write_benchmark.

    Raises:
        ConfigError: If the manifest or a referenced split file is missing.
    """
    root = Path(data_dir)
    manifest_path = root / MANIFEST
    if not manifest_path.is_file():
        raise ConfigError("data", f"no {MANIFEST} in {root}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    splits = {}
    for split, files in manifest["files"].items():
        paths = {kind: root / name for kind, name in files.items()}
        for path in paths.values():
            if not path.is_file():
                raise ConfigError("data", f"missing split file {path}")
        splits[split] = SampleBatch(
            images=read_tensor(paths["images"]).astype(np.float32),
            labels=np.rint(read_tensor(paths["labels"])).astype(np.int64),
            domains=np.rint(read_tensor(paths["domains"])).astype(np.int64),
        )
    return Benchmark(
        seed=manifest["seed"],
        splits=splits,
        domains={s: DomainSpec.model_validate(d) for s, d in manifest["domains"].items()},
        jitter=JitterParams.model_validate(manifest["jitter"]),
        num_classes=manifest["num_classes"],
    )
