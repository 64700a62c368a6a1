"""Configuration records and reports shared across the laboratory."""

import hashlib
import itertools
import json
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

INSERTION_POINTS: Tuple[str, ...] = ("conv1", "pool1", "block1", "block2", "block3", "block4")

InsertionPoint = Literal["conv1", "pool1", "block1", "block2", "block3", "block4"]
Method = Literal["none", "advstyle", "dsu", "mixstyle", "padain"]
Variant = Literal["full", "direction_only", "intensity_only"]
Mode = Literal["train", "eval"]
Protocol = Literal["single_source", "leave_one_out"]

SPLIT_NAMES: Tuple[str, ...] = ("train", "target_1", "target_2", "target_3")
SplitName = Literal["train", "target_1", "target_2", "target_3"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _check_contrast(value: Tuple[float, float]) -> Tuple[float, float]:
    low, high = value
    if not 0 < low <= high:
        raise ValueError(f"contrast_range must satisfy 0 < low <= high, got {value}")
    return value


# --------------------------------------------------------------------------
# Synthetic domains
# --------------------------------------------------------------------------


class Palette(_Strict):
    """Per-channel gain and bias means of one style."""

    gain: Tuple[float, float, float] = Field(description="Per-channel gain mean")
    bias: Tuple[float, float, float] = Field(description="Per-channel bias mean")

    @field_validator("gain")
    @classmethod
    def _gain_away_from_zero(cls, value):
        if any(abs(g) < 0.05 for g in value):
            raise ValueError(f"|gain| must be at least 0.05, got {value}")
        return value

    def distance(self, other: "Palette") -> float:
        """L-infinity distance over the concatenated (gain, bias) vector."""
        mine = self.gain + self.bias
        theirs = other.gain + other.bias
        return max(abs(a - b) for a, b in zip(mine, theirs))


class DomainSpec(_Strict):
    """Style palettes and class-style correlation rule of one domain."""

    domain_id: int = Field(ge=0, description="Domain id")
    palettes: Tuple[Palette, ...] = Field(min_length=1, description="One palette per class (or a pool to draw from)")
    gain_jitter: float = Field(default=0.03, ge=0.0, description="Std of per-sample gain noise")
    bias_jitter: float = Field(default=0.03, ge=0.0, description="Std of per-sample bias noise")
    contrast_range: Tuple[float, float] = Field(default=(0.9, 1.1), description="Contrast exponent range")
    correlation: Literal["class_correlated", "decorrelated"] = Field(description="Palette selection rule")

    @model_validator(mode="after")
    def _check_palettes(self):
        _check_contrast(self.contrast_range)
        if self.correlation == "class_correlated":
            for a, b in itertools.combinations(self.palettes, 2):
                if a.distance(b) < 0.5:
                    raise ValueError("class-correlated palettes must differ by at least 0.5 (L-inf)")
        return self


class JitterParams(_Strict):
    """Geometric jitter of the rendered glyphs."""

    translation: int = Field(default=4, ge=0, description="Maximum shift in pixels along each axis")
    scale_min: float = Field(default=0.8, gt=0.0, description="Smallest glyph scale")
    scale_max: float = Field(default=1.2, gt=0.0, description="Largest glyph scale")

    @model_validator(mode="after")
    def _check_scale_order(self):
        if self.scale_min > self.scale_max:
            raise ValueError(f"scale_min {self.scale_min} exceeds scale_max {self.scale_max}")
        return self


# --------------------------------------------------------------------------
# Run configuration sections
# --------------------------------------------------------------------------


class ModelSpec(_Strict):
    """MiniNet architecture and where perturbation modules are attached."""

    in_channels: int = Field(default=3, ge=1, description="Input channels")
    height: int = Field(default=32, ge=1, description="Input height in pixels")
    width: int = Field(default=32, ge=1, description="Input width in pixels")
    num_classes: int = Field(default=7, ge=2, description="Number of classes K")
    widths: Tuple[int, int, int, int, int] = Field(
        default=(16, 32, 64, 64, 64),
        description="Channel widths of conv1 and blocks 1-4",
    )
    insertion_points: Tuple[InsertionPoint, ...] = Field(
        default=INSERTION_POINTS,
        description="Stages whose output is perturbed during training",
    )
    method: Method = Field(default="advstyle", description="Perturbation method")

    @field_validator("widths")
    @classmethod
    def _positive_widths(cls, value):
        if any(w <= 0 for w in value):
            raise ValueError(f"widths must be positive, got {value}")
        return value

    @field_validator("insertion_points")
    @classmethod
    def _canonical_points(cls, value):
        if len(set(value)) != len(value):
            raise ValueError(f"duplicate insertion points in {value}")
        # Keep network order regardless of how the points were listed.
        return tuple(p for p in INSERTION_POINTS if p in value)

    def flags(self) -> Dict[str, bool]:
        """Insertion flags keyed by point name."""
        return {point: point in self.insertion_points for point in INSERTION_POINTS}


class MethodConfig(_Strict):
    """Hyper-parameters of the perturbation methods."""

    lam: float = Field(default=5.0, ge=0.0, description="Gradient reversal strength lambda")
    variant: Variant = Field(default="full", description="AdvStyle variant")
    p: float = Field(default=0.5, ge=0.0, le=1.0, description="Apply probability for DSU/MixStyle/pAdaIN")
    alpha: float = Field(default=0.1, gt=0.0, description="MixStyle Beta(alpha, alpha) concentration")
    eps_floor: float = Field(default=1e-6, gt=0.0, description="Floor added to sigma(x) in the AdaIN division")


class TrainConfig(_Strict):
    """Optimization settings for both ASA training procedures."""

    epochs: int = Field(default=60, ge=1, description="Training epochs")
    batch_size: int = Field(default=64, ge=1, description="Mini-batch size")
    optimizer: Literal["sgd_momentum", "adam"] = Field(default="sgd_momentum", description="Optimizer kind")
    lr: float = Field(default=0.05, gt=0.0, description="Learning rate for theta")
    sigma_lr: Optional[float] = Field(
        default=None,
        ge=0.0,
        description="Learning rate for Sigma in iterative mode (defaults to lr; 0 freezes the adversary)",
    )
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0, description="SGD momentum")
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0, description="Adam beta1")
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0, description="Adam beta2")
    adam_eps: float = Field(default=1e-8, gt=0.0, description="Adam epsilon")
    weight_decay: float = Field(default=5e-4, ge=0.0, description="Weight decay on theta only")
    cosine: bool = Field(default=True, description="Cosine learning-rate decay per step")
    seed: int = Field(default=0, ge=0, description="Seed for init, shuffling and noise")
    asa_mode: Literal["grl", "iterative"] = Field(default="grl", description="End-to-end GRL or iterative minimax")
    inner_steps: int = Field(default=1, ge=1, description="Ascent steps on Sigma per iterative step")
    dtype: Literal["float32", "float64"] = Field(default="float32", description="Training precision")
    checkpoint_every: Optional[int] = Field(default=None, ge=1, description="Write a checkpoint every N epochs")

    @property
    def effective_sigma_lr(self) -> float:
        return self.sigma_lr if self.sigma_lr is not None else self.lr


class DataConfig(_Strict):
    """
    Synthetic benchmark generation settings and the training protocol.

    ``gain_jitter``, ``bias_jitter`` and ``contrast_range`` apply to every
    generated domain. A split listed under ``domains`` replaces its generated
    DomainSpec entirely; palettes are still drawn for it, so the remaining
    splits do not change.
    """

    seed: int = Field(default=0, ge=0, description="Benchmark seed")
    train_size: int = Field(default=2048, ge=7, description="Samples in the source split")
    target_size: int = Field(default=1024, ge=7, description="Samples in each target split")
    gain_jitter: float = Field(default=0.03, ge=0.0, description="Std of per-sample gain noise")
    bias_jitter: float = Field(default=0.03, ge=0.0, description="Std of per-sample bias noise")
    contrast_range: Tuple[float, float] = Field(default=(0.9, 1.1), description="Contrast exponent range")
    jitter: JitterParams = Field(default_factory=JitterParams, description="Glyph translation and scale jitter")
    domains: Dict[SplitName, DomainSpec] = Field(default_factory=dict, description="Per-split DomainSpec overrides")
    protocol: Protocol = Field(
        default="single_source", description="single_source trains on train; leave_one_out on every split but one"
    )
    held_out: SplitName = Field(default="target_3", description="Split left out for testing under leave_one_out")

    @field_validator("contrast_range")
    @classmethod
    def _contrast_positive(cls, value):
        return _check_contrast(value)

    @field_validator("domains")
    @classmethod
    def _unique_domain_ids(cls, value):
        ids = [value[s].domain_id if s in value else i for i, s in enumerate(SPLIT_NAMES)]
        if len(set(ids)) != len(ids):
            raise ValueError(f"domain ids must be unique across splits, got {ids}")
        return value


class EvalConfig(_Strict):
    """Evaluation and feature-divergence settings."""

    domains: Tuple[str, ...] = Field(
        default=("target_1", "target_2", "target_3"), description="Splits reported as target domains"
    )
    batch_size: int = Field(default=256, ge=1, description="Evaluation batch size")
    adistance_seed: int = Field(default=0, ge=0, description="Split seed for the domain classifier")
    adistance_epochs: int = Field(default=200, ge=1, description="Domain classifier epochs")
    adistance_lr: float = Field(default=0.01, gt=0.0, description="Domain classifier learning rate")
    pca_dim: int = Field(default=2, ge=1, description="PCA projection dimension")


class RunConfigFile(_Strict):
    """Whole experiment configuration, one section per concern."""

    model: ModelSpec = Field(default_factory=ModelSpec)
    method: MethodConfig = Field(default_factory=MethodConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()[:16]


# --------------------------------------------------------------------------
# Logs and reports
# --------------------------------------------------------------------------


class EpochRecord(BaseModel):
    """Training statistics of one epoch."""

    epoch: int = Field(description="Epoch index, starting at 0")
    loss: float = Field(description="Mean training loss")
    accuracy: float = Field(description="Training accuracy in percent")
    sigma_norms: Dict[str, float] = Field(default_factory=dict, description="L2 norm of every Sigma tensor")
    wall_clock_s: float = Field(default=0.0, description="Seconds spent in the epoch")


class RunLog(BaseModel):
    """Per-epoch history of one training run."""

    seed: int = Field(description="Run seed")
    config: RunConfigFile = Field(description="Immutable snapshot of the run configuration")
    epochs: List[EpochRecord] = Field(default_factory=list)

    def to_jsonl(self) -> str:
        """One compact line per epoch followed by a summary record, without timings."""
        lines = [
            json.dumps(record.model_dump(exclude={"wall_clock_s"}), sort_keys=True, separators=(",", ":"))
            for record in self.epochs
        ]
        last = self.epochs[-1] if self.epochs else None
        summary = {
            "summary": True,
            "seed": self.seed,
            "epochs": len(self.epochs),
            "final_loss": last.loss if last else None,
            "final_accuracy": last.accuracy if last else None,
            "config_hash": self.config.config_hash(),
            "config": self.config.model_dump(mode="json"),
        }
        lines.append(json.dumps(summary, sort_keys=True, separators=(",", ":")))
        return "\n".join(lines) + "\n"


class MetricsReport(BaseModel):
    """Cross-domain accuracies of one run and their aggregates."""

    run_id: str = Field(description="Identifier of the evaluated run")
    config_hash: str = Field(default="", description="Hash of the run configuration")
    source_accuracy: Optional[float] = Field(default=None, ge=0.0, le=100.0)
    domain_accuracies: Dict[str, float] = Field(description="Target-domain accuracy in percent")
    mean: float = Field(description="Arithmetic mean of the target accuracies")
    std: float = Field(description="Sample standard deviation of the target accuracies")
    per_seed: List[Dict[str, float]] = Field(default_factory=list, description="Per-seed accuracy breakdown")
    a_distance: Dict[str, float] = Field(default_factory=dict, description="Dist_A per source:target pair")

    @field_validator("domain_accuracies")
    @classmethod
    def _accuracy_range(cls, value):
        for name, acc in value.items():
            if not 0.0 <= acc <= 100.0:
                raise ValueError(f"accuracy of {name} outside [0, 100]: {acc}")
        return value

    @field_validator("a_distance")
    @classmethod
    def _distance_range(cls, value):
        for pair, dist in value.items():
            if not 0.0 <= dist <= 2.0:
                raise ValueError(f"A-distance of {pair} outside [0, 2]: {dist}")
        return value


class GradCheckReport(BaseModel):
    """Backward gradient versus central finite differences."""

    name: str = Field(default="", description="Case label")
    passed: bool = Field(description="max_rel_error < rtol")
    max_rel_error: float = Field(description="Largest relative error over compared coordinates")
    rtol: float
    eps: float
    checked: int = Field(description="Coordinates compared")
    excluded: int = Field(description="Coordinates skipped at kinks")
    analytic: List[float] = Field(default_factory=list)
    numeric: List[float] = Field(default_factory=list)
    relative_error: List[float] = Field(default_factory=list)
    excluded_mask: List[bool] = Field(default_factory=list)
