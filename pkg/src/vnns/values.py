"""Concrete spec-level values: exact rational tensors and scalars."""

from __future__ import annotations

from dataclasses import dataclass

from .rat import Rat


@dataclass(frozen=True)
class TensorValue:
    """Immutable tensor, stored flat in row-major order."""

    shape: tuple[int, ...]
    data: tuple

    def __post_init__(self):
        assert shape_size(self.shape) == len(self.data), "shape/data mismatch"

    def index(self, i: int):
        """Index the first dimension, yielding a sub-tensor or scalar."""
        sub = self.shape[1:]
        size = shape_size(sub)
        chunk = self.data[i * size:(i + 1) * size]
        if not sub:
            return chunk[0]
        return TensorValue(sub, chunk)


def shape_size(shape) -> int:
    size = 1
    for d in shape:
        size *= d
    return size


def stack(elements: list, elem_shape: tuple[int, ...]) -> TensorValue:
    """Stack scalars or equally-shaped tensors along a new first axis."""
    flat = []
    for el in elements:
        if isinstance(el, TensorValue):
            flat.extend(el.data)
        else:
            flat.append(el)
    return TensorValue((len(elements), *elem_shape), tuple(flat))


__all__ = ["TensorValue", "shape_size", "stack"]
