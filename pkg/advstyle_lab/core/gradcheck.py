"""Central finite-difference oracle for backward gradients."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from advstyle_lab.core import ops
from advstyle_lab.core.tensor import Tensor, backward, no_grad
from advstyle_lab.models import GradCheckReport

logger = logging.getLogger(__name__)

ScalarFn = Callable[[Tensor], Tensor]


def check_gradients(
    f: ScalarFn,
    x: Tensor,
    eps: float = 1e-6,
    rtol: float = 1e-4,
    *,
    scale: float = 1.0,
    kink_tol: float = 0.1,
    name: str = "",
) -> GradCheckReport:
    """Compare ``x.grad`` after ``backward(f(x))`` with central differences.

    ``f`` may close over ``x`` itself (to check a parameter), since ``x.data``
    is perturbed in place and restored after every evaluation. Coordinates where the
    one-sided slopes disagree by more than ``kink_tol`` (relative) straddle a
    kink such as ReLU at 0 and are excluded from the comparison.

    Args:
        f: Scalar-valued, deterministic function of ``x``.
        x: Point to check; promoted to requires_grad for the call.
        eps: Finite-difference step, must be positive.
        rtol: Pass threshold on the maximum relative error.
        scale: Expected ratio backward / finite difference, e.g. ``-lambda``
            for a gradient reversal.
        kink_tol: Relative slope disagreement marking a non-smooth point.
        name: Label carried into the report.

    Returns:
        GradCheckReport with per-coordinate values and the verdict.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    had_grad = x.requires_grad
    x.data = np.ascontiguousarray(x.data)
    x.requires_grad_(True)
    loss = f(x)
    backward(loss)
    analytic = np.zeros(x.size) if x.grad is None else x.grad.reshape(-1).astype(np.float64).copy()

    flat = x.data.reshape(-1)
    base = float(loss.data)
    numeric = np.zeros_like(analytic)
    excluded = np.zeros(analytic.shape, dtype=bool)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            f_plus = float(f(x).data)
            flat[i] = original - eps
            f_minus = float(f(x).data)
            flat[i] = original
            numeric[i] = scale * (f_plus - f_minus) / (2.0 * eps)
            slope_plus = (f_plus - base) / eps
            slope_minus = (base - f_minus) / eps
            spread = max(abs(slope_plus), abs(slope_minus), 1e-12)
            excluded[i] = abs(slope_plus - slope_minus) > kink_tol * spread
    if not had_grad:
        x.requires_grad_(False)

    # Coordinates far below the gradient scale are compared against that scale.
    floor = 1e-3 * max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0)) + 1e-12
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    rel = np.abs(analytic - numeric) / denom
    kept = rel[~excluded]
    max_rel = float(kept.max()) if kept.size else 0.0
    report = GradCheckReport(
        name=name,
        passed=bool(max_rel < rtol),
        max_rel_error=max_rel,
        rtol=rtol,
        eps=eps,
        checked=int(kept.size),
        excluded=int(excluded.sum()),
        analytic=analytic.tolist(),
        numeric=numeric.tolist(),
        relative_error=rel.tolist(),
        excluded_mask=excluded.tolist(),
    )
    if not report.passed:
        logger.warning("gradient check %s failed: max relative error %.3e", name or "<anonymous>", max_rel)
    return report


@dataclass
class GradCase:
    """A scalar function, the point to check and the expected backward/FD ratio."""

    f: ScalarFn
    x: Tensor
    scale: float = 1.0


CaseBuilder = Callable[[np.random.Generator], GradCase]


def _binary_cases(name: str, fn, positive_rhs: bool = False) -> Dict[str, CaseBuilder]:
    def rhs_values(rng):
        values = rng.uniform(0.5, 2.0, size=(3,))
        if not positive_rhs:
            values *= rng.choice([-1.0, 1.0], size=(3,))
        return values

    def lhs_case(rng):
        b = Tensor(rhs_values(rng))
        w = rng.standard_normal((2, 3))
        return GradCase(lambda x: ops.sum(ops.mul(fn(x, b), Tensor(w))), Tensor(rng.standard_normal((2, 3))))

    def rhs_case(rng):
        a = Tensor(rng.standard_normal((2, 3)))
        w = rng.standard_normal((2, 3))
        return GradCase(lambda x: ops.sum(ops.mul(fn(a, x), Tensor(w))), Tensor(rhs_values(rng)))

    return {f"{name}[lhs]": lhs_case, f"{name}[rhs]": rhs_case}


def op_cases() -> Dict[str, CaseBuilder]:
    """Seeded gradient-check cases, one builder per registered op."""
    cases: Dict[str, CaseBuilder] = {}
    cases.update(_binary_cases("add", ops.add))
    cases.update(_binary_cases("sub", ops.sub))
    cases.update(_binary_cases("mul", ops.mul))
    cases.update(_binary_cases("div", ops.div))

    def matmul_case(rng):
        b = Tensor(rng.standard_normal((4, 3)))
        w = rng.standard_normal((2, 3))
        return GradCase(lambda x: ops.sum(ops.mul(ops.matmul(x, b), Tensor(w))), Tensor(rng.standard_normal((2, 4))))

    def conv_input_case(rng):
        weight = Tensor(rng.standard_normal((3, 2, 3, 3)))
        bias = Tensor(rng.standard_normal(3))
        w = rng.standard_normal((2, 3, 5, 5))
        return GradCase(
            lambda x: ops.sum(ops.mul(ops.conv2d(x, weight, bias), Tensor(w))),
            Tensor(rng.standard_normal((2, 2, 5, 5))),
        )

    def conv_weight_case(rng):
        image = Tensor(rng.standard_normal((2, 2, 5, 5)))
        w = rng.standard_normal((2, 3, 5, 5))
        return GradCase(
            lambda x: ops.sum(ops.mul(ops.conv2d(image, x), Tensor(w))),
            Tensor(rng.standard_normal((3, 2, 3, 3))),
        )

    def unary(fn, shape, low=None, high=None):
        def build(rng):
            if low is None:
                values = rng.standard_normal(shape)
            else:
                values = rng.uniform(low, high, size=shape)
            w = rng.standard_normal(fn(Tensor(values)).shape)
            return GradCase(lambda x: ops.sum(ops.mul(fn(x), Tensor(w))), Tensor(values))

        return build

    def cross_entropy_case(rng):
        labels = rng.integers(0, 4, size=5)
        return GradCase(lambda x: ops.softmax_cross_entropy(x, labels), Tensor(rng.standard_normal((5, 4))))

    def grl_case(rng):
        lam = float(rng.uniform(0.1, 10.0))
        w = rng.standard_normal(4)
        x0 = Tensor(rng.standard_normal(4))
        return GradCase(lambda x: ops.sum(ops.mul(ops.grl(x, lam), Tensor(w))), x0, scale=-lam)

    def index_case(rng):
        index = rng.integers(0, 4, size=6)
        w = rng.standard_normal((6, 3))
        return GradCase(
            lambda x: ops.sum(ops.mul(ops.index_select(x, index), Tensor(w))),
            Tensor(rng.standard_normal((4, 3))),
        )

    cases.update(
        {
            "matmul": matmul_case,
            "conv2d[input]": conv_input_case,
            "conv2d[weight]": conv_weight_case,
            "maxpool2d": unary(lambda t: ops.maxpool2d(t, 2), (2, 2, 4, 4)),
            "avgpool_global": unary(ops.avgpool_global, (2, 3, 3, 3)),
            "relu": unary(ops.relu, (3, 4)),
            "neg": unary(ops.neg, (3, 4)),
            "reshape": unary(lambda t: ops.reshape(t, (4, 3)), (2, 6)),
            "broadcast": unary(lambda t: ops.broadcast_to(t, (2, 3, 4, 4)), (2, 3, 1, 1)),
            "sum": unary(lambda t: ops.sum(t, axis=1), (3, 4)),
            "mean": unary(lambda t: ops.mean(t, axis=(2, 3)), (2, 3, 4, 4)),
            "var": unary(lambda t: ops.var(t, axis=(2, 3)), (2, 3, 4, 4)),
            "sqrt": unary(ops.sqrt, (3, 4), 0.5, 2.0),
            "norm": unary(ops.norm, (5,)),
            "softmax_cross_entropy": cross_entropy_case,
            "grl": grl_case,
            "index_select": index_case,
        }
    )
    return cases
