"""Dense tensors and the reverse-mode computation tape.

A ``Tensor`` wraps a numpy array. Every differentiable operation in
``advstyle_lab.core.ops`` appends a ``TapeRecord`` to its output when any input
requires a gradient; ``backward`` walks those records in reverse topological
order and accumulates gradients into every tensor that requires one.
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from advstyle_lab.errors import AutodiffError

BackwardRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_GRAD_ENABLED: contextvars.ContextVar[bool] = contextvars.ContextVar(
    "advstyle_grad_enabled", default=True
)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable tape recording inside the block."""
    token = _GRAD_ENABLED.set(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.reset(token)


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED.get()


@dataclass(eq=False)
class TapeRecord:
    """One recorded operation: its inputs, its output and its backward rule."""

    op: str
    inputs: Tuple["Tensor", ...]
    backward: BackwardRule
    output: Optional["Tensor"] = field(default=None, repr=False)


class Tensor:
    """Dense real-valued array with an optional gradient buffer.

    Args:
        data: Array-like values; integer and boolean input is promoted to
            float64, float32/float64 arrays keep their precision.
        requires_grad: Whether gradients should be accumulated into ``grad``.
    """

    __slots__ = ("data", "requires_grad", "grad", "record", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        array = np.asarray(data)
        if array.dtype not in (np.float32, np.float64):
            array = array.astype(np.float64)
        self.data: np.ndarray = array
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.record: Optional[TapeRecord] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        """Drop the gradient; it stays None until a backward pass reaches this tensor."""
        self.grad = None

    def requires_grad_(self, flag: bool = True) -> "Tensor":
        self.requires_grad = bool(flag)
        self.grad = None
        return self

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return (
            f"Tensor(shape={self.shape}, dtype={self.dtype}, "
            f"requires_grad={self.requires_grad}{label})"
        )

    # Operator sugar; the implementations live in ops.
    def __add__(self, other):
        from advstyle_lab.core import ops

        return ops.add(self, other)

    def __radd__(self, other):
        from advstyle_lab.core import ops

        return ops.add(other, self)

    def __sub__(self, other):
        from advstyle_lab.core import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from advstyle_lab.core import ops

        return ops.sub(other, self)

    def __mul__(self, other):
        from advstyle_lab.core import ops

        return ops.mul(self, other)

    def __rmul__(self, other):
        from advstyle_lab.core import ops

        return ops.mul(other, self)

    def __truediv__(self, other):
        from advstyle_lab.core import ops

        return ops.div(self, other)

    def __rtruediv__(self, other):
        from advstyle_lab.core import ops

        return ops.div(other, self)

    def __neg__(self):
        from advstyle_lab.core import ops

        return ops.neg(self)

    def __matmul__(self, other):
        from advstyle_lab.core import ops

        return ops.matmul(self, other)


def record(
    op: str,
    data: np.ndarray,
    inputs: Sequence[Tensor],
    backward_rule: BackwardRule,
) -> Tensor:
    """Wrap ``data`` in a Tensor, appending a tape record when needed."""
    needs_grad = is_grad_enabled() and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs_grad)
    if needs_grad:
        rec = TapeRecord(op=op, inputs=tuple(inputs), backward=backward_rule)
        rec.output = out
        out.record = rec
    return out


class Tape:
    """Records reachable from a loss, in topological order."""

    def __init__(self, records: List[TapeRecord]):
        self.records = records

    def __len__(self) -> int:
        return len(self.records)

    @classmethod
    def collect(cls, root: Tensor) -> "Tape":
        ordered: List[TapeRecord] = []
        visited = set()
        # Iterative DFS; deep networks would overflow the recursion limit.
        stack: List[Tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            rec = node.record
            if rec is None:
                continue
            if expanded:
                ordered.append(rec)
                continue
            if id(rec) in visited:
                continue
            visited.add(id(rec))
            stack.append((node, True))
            for parent in rec.inputs:
                if parent.record is not None and id(parent.record) not in visited:
                    stack.append((parent, False))
        return cls(ordered)


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into ``t.grad`` for every tensor on the tape.

    Raises:
        AutodiffError: If ``loss`` is not a scalar or has no recorded history.
    """
    if loss.size != 1:
        raise AutodiffError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = Tape.collect(loss)
    if len(tape) == 0:
        raise AutodiffError("backward called on a tensor with an empty tape")

    pending = {id(loss): (loss, np.ones_like(loss.data))}
    for rec in reversed(tape.records):
        out = rec.output
        entry = pending.pop(id(out), None)
        if entry is None:
            continue
        upstream = entry[1]
        out.grad = upstream.copy() if out.grad is None else out.grad + upstream
        input_grads = rec.backward(upstream)
        for parent, grad in zip(rec.inputs, input_grads):
            if grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in pending:
                pending[key] = (parent, pending[key][1] + grad)
            else:
                pending[key] = (parent, grad)

    # Whatever remains are leaves.
    for tensor, grad in pending.values():
        tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad
