"""
Gradient-check suites run by the ``gradcheck`` command.

- ``ops``: every registered op on seeded random instances.
- ``advstyle``: the AdvStyle module with frozen noise, w.r.t. its input and
  both scale vectors, for every variant.
- ``backbone``: a tiny float64 MiniNet with AdvStyle at all six points,
  w.r.t. the input and every registered parameter.
"""

import logging
from typing import Callable, Dict, List, Literal

import numpy as np

from advstyle_lab.core import ops
from advstyle_lab.core.gradcheck import check_gradients, op_cases
from advstyle_lab.core.tensor import Tensor
from advstyle_lab.models import GradCheckReport, MethodConfig, ModelSpec
from advstyle_lab.nn.mininet import build_mininet
from advstyle_lab.style.advstyle import AdvStyleState, advstyle_forward

logger = logging.getLogger(__name__)

Scope = Literal["ops", "advstyle", "backbone"]
SCOPES = ("ops", "advstyle", "backbone")

TINY_SPEC = ModelSpec(height=16, width=16, widths=(4, 4, 4, 4, 4), method="advstyle")


def ops_suite(instances: int = 20, eps: float = 1e-6, rtol: float = 1e-4) -> List[GradCheckReport]:
    reports = []
    for name, build in op_cases().items():
        for seed in range(instances):
            case = build(np.random.default_rng(seed))
            reports.append(check_gradients(case.f, case.x, eps, rtol, scale=case.scale, name=f"{name}#{seed}"))
    return reports


def advstyle_suite(instances: int = 20, eps: float = 1e-6, rtol: float = 1e-4) -> List[GradCheckReport]:
    reports = []
    for seed in range(instances):
        rng = np.random.default_rng(seed)
        x = Tensor(rng.standard_normal((3, 4, 5, 5)))
        noise = (rng.standard_normal((3, 4)), rng.standard_normal((3, 4)))
        w = Tensor(rng.standard_normal((3, 4, 5, 5)))
        lam = float(rng.uniform(0.5, 20.0))
        for variant in ("full", "direction_only", "intensity_only"):
            state = AdvStyleState.create(4, variant=variant, lam=lam)
            for scale in (state.sigma_mu, state.sigma_sigma):
                scale.data = rng.uniform(0.1, 0.5, size=scale.shape)

            def loss(_, state=state):
                return ops.sum(ops.mul(advstyle_forward(x, state, None, noise), w))

            if variant == "full":
                # The batch spread used by the variants is a constant of the graph, so the
                # input gradient is only checked for the full module.
                reports.append(check_gradients(loss, x, eps, rtol, name=f"advstyle[{variant}].x#{seed}"))
            for label, scale in (("sigma_mu", state.sigma_mu), ("sigma_sigma", state.sigma_sigma)):
                reports.append(
                    check_gradients(loss, scale, eps, rtol, scale=-lam, name=f"advstyle[{variant}].{label}#{seed}")
                )
    return reports


def backbone_suite(instances: int = 3, eps: float = 1e-6, rtol: float = 1e-4) -> List[GradCheckReport]:
    reports = []
    for seed in range(instances):
        lam = 5.0
        model = build_mininet(TINY_SPEC, seed, MethodConfig(lam=lam), dtype="float64")
        rng = np.random.default_rng(1000 + seed)
        for entry in model.registry.entries("sigma"):
            entry.tensor.data = rng.uniform(0.1, 0.5, size=entry.tensor.shape)
        x = Tensor(rng.uniform(0.0, 1.0, size=(2, 3, 16, 16)))
        labels = rng.integers(0, TINY_SPEC.num_classes, size=2)

        def loss(_, model=model, x=x, labels=labels, seed=seed):
            # A fresh generator per call replays the same noise.
            logits = model.forward(x, "train", np.random.default_rng(seed))
            return ops.softmax_cross_entropy(logits, labels)

        reports.append(check_gradients(loss, x, eps, rtol, name=f"backbone.input#{seed}"))
        for entry in model.registry:
            scale = -lam if entry.tag == "sigma" else 1.0
            name = f"backbone.{entry.name}#{seed}"
            reports.append(check_gradients(loss, entry.tensor, eps, rtol, scale=scale, name=name))
    return reports


_SUITES: Dict[str, Callable[..., List[GradCheckReport]]] = {
    "ops": ops_suite,
    "advstyle": advstyle_suite,
    "backbone": backbone_suite,
}


def run_scope(scope: str, eps: float = 1e-6, rtol: float = 1e-4) -> List[GradCheckReport]:
    """Run one named suite; raises ValueError for an unknown scope."""
    if scope not in _SUITES:
        raise ValueError(f"unknown gradcheck scope {scope!r}; expected one of {SCOPES}")
    reports = _SUITES[scope](eps=eps, rtol=rtol)
    failed = [r.name for r in reports if not r.passed]
    logger.info("gradcheck %s: %d checks, %d failed", scope, len(reports), len(failed))
    return reports


def summarize(reports: List[GradCheckReport]) -> Dict[str, object]:
    """Compact summary without the per-coordinate vectors."""
    return {
        "checks": len(reports),
        "passed": sum(r.passed for r in reports),
        "failed": [r.name for r in reports if not r.passed],
        "max_rel_error": max((r.max_rel_error for r in reports), default=0.0),
        "coordinates": sum(r.checked for r in reports),
        "excluded": sum(r.excluded for r in reports),
    }
