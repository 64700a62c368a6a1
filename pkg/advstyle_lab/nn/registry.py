"""Ordered registry of named, tagged trainable tensors."""

from dataclasses import dataclass
from typing import Dict, Iterator, List, Literal, Mapping, Optional

import numpy as np

from advstyle_lab.core.tensor import Tensor

Tag = Literal["theta", "sigma"]
TAGS = ("theta", "sigma")


@dataclass
class RegisteredParameter:
    name: str
    tensor: Tensor
    tag: Tag
    nonnegative: bool = False


class ParameterRegistry:
    """
    Every trainable tensor of a model, registered exactly once.

    ``theta`` marks ordinary network weights, ``sigma`` marks perturbation
    scales. The two tags partition the registry.
    """

    def __init__(self) -> None:
        self._entries: Dict[str, RegisteredParameter] = {}
        self._ids: Dict[int, str] = {}

    def register(self, name: str, tensor: Tensor, tag: Tag = "theta", nonnegative: bool = False) -> Tensor:
        """
        Add ``tensor`` under ``name``.

        Args:
            name: Unique dotted name, e.g. ``advstyle.conv1.sigma_mu``.
            tensor: Trainable tensor; requires_grad is switched on.
            tag: ``theta`` or ``sigma``.
            nonnegative: Clamp at zero after every optimizer step.

        Returns:
            The registered tensor.

        Raises:
            ValueError: On duplicate names, re-registration or an unknown tag.
        """
        if tag not in TAGS:
            raise ValueError(f"unknown parameter tag {tag!r}")
        if name in self._entries:
            raise ValueError(f"parameter name {name!r} already registered")
        if id(tensor) in self._ids:
            raise ValueError(f"tensor already registered as {self._ids[id(tensor)]!r}")
        if not tensor.requires_grad:
            tensor.requires_grad_(True)
        tensor.name = name
        self._entries[name] = RegisteredParameter(name, tensor, tag, nonnegative)
        self._ids[id(tensor)] = name
        return tensor

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name].tensor

    def __iter__(self) -> Iterator[RegisteredParameter]:
        return iter(self._entries.values())

    def entries(self, tag: Optional[Tag] = None) -> List[RegisteredParameter]:
        return [e for e in self._entries.values() if tag is None or e.tag == tag]

    def names(self, tag: Optional[Tag] = None) -> List[str]:
        return [e.name for e in self.entries(tag)]

    def parameters(self, tag: Optional[Tag] = None) -> List[Tensor]:
        return [e.tensor for e in self.entries(tag)]

    def count(self, tag: Optional[Tag] = None) -> int:
        """Number of scalar values held by the selected entries."""
        return sum(e.tensor.size for e in self.entries(tag))

    def zero_grad(self) -> None:
        for entry in self._entries.values():
            entry.tensor.zero_grad()

    def snapshot(self, tag: Optional[Tag] = None) -> Dict[str, np.ndarray]:
        return {e.name: e.tensor.data.copy() for e in self.entries(tag)}

    def load_state(self, state: Mapping[str, np.ndarray]) -> None:
        """Copy values from ``state``; names and shapes must match exactly."""
        missing = set(self._entries) - set(state)
        unexpected = set(state) - set(self._entries)
        if missing or unexpected:
            raise ValueError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}")
        for name, entry in self._entries.items():
            value = np.asarray(state[name])
            if value.shape != entry.tensor.shape:
                raise ValueError(f"{name}: expected shape {entry.tensor.shape}, got {value.shape}")
            entry.tensor.data = value.astype(entry.tensor.dtype, copy=True)
            entry.tensor.zero_grad()
