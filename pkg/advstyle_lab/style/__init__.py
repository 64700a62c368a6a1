"""Feature-statistics perturbations: AdvStyle and the random baselines."""

from .advstyle import AdvStyle, AdvStyleState, advstyle_forward, variant_project
from .baselines import DSU, MixStyle, PAdaIN, build_perturbation, dsu_forward, mixstyle_forward, padain_forward
from .stats import ChannelStats, adain_replace, batch_spread, channel_stats, instance_normalize

__all__ = [
    "AdvStyle",
    "AdvStyleState",
    "ChannelStats",
    "DSU",
    "MixStyle",
    "PAdaIN",
    "adain_replace",
    "advstyle_forward",
    "batch_spread",
    "build_perturbation",
    "channel_stats",
    "dsu_forward",
    "instance_normalize",
    "mixstyle_forward",
    "padain_forward",
    "variant_project",
]
