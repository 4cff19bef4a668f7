"""Flat real views over a model's named parameter arrays.

Complex arrays are exposed as interleaved (re, im) float64 pairs so the
optimizer, checkpointing, and finite-difference checks all share one
canonical vector layout.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError


def _float_view(array: np.ndarray) -> np.ndarray:
    """1-D float64 view of a contiguous real or complex array."""
    if np.iscomplexobj(array):
        return array.view(np.float64).reshape(-1)
    return array.reshape(-1)


class ParamSet:
    """Ordered (name, array) pairs with a shared flat float64 layout.

    The arrays are live references into the model; ``assign_flat`` writes
    back in place so the model sees updates immediately.
    """

    def __init__(self, items: list[tuple[str, np.ndarray]]):
        self._names = [name for name, _ in items]
        self._arrays = [arr for _, arr in items]
        for name, arr in items:
            if not arr.flags["C_CONTIGUOUS"]:
                raise InvalidInputError(f"parameter {name} must be C-contiguous")
        sizes = [(_float_view(a)).size for a in self._arrays]
        offsets = np.concatenate(([0], np.cumsum(sizes))).astype(np.int64)
        self._slices = {name: (int(offsets[i]), int(offsets[i + 1]))
                        for i, name in enumerate(self._names)}
        self.size = int(offsets[-1])

    @property
    def names(self) -> list[str]:
        return list(self._names)

    def array(self, name: str) -> np.ndarray:
        return self._arrays[self._names.index(name)]

    def slice_of(self, name: str) -> tuple[int, int]:
        return self._slices[name]

    def to_flat(self) -> np.ndarray:
        flat = np.empty(self.size)
        for name, arr in zip(self._names, self._arrays):
            lo, hi = self._slices[name]
            flat[lo:hi] = _float_view(arr)
        return flat

    def assign_flat(self, flat: np.ndarray) -> None:
        if flat.size != self.size:
            raise InvalidInputError(f"expected {self.size} values, got {flat.size}")
        for name, arr in zip(self._names, self._arrays):
            lo, hi = self._slices[name]
            _float_view(arr)[:] = flat[lo:hi]

    def flatten_tree(self, tree: dict[str, np.ndarray]) -> np.ndarray:
        """Flatten a name->gradient dict into the canonical vector (missing = 0)."""
        flat = np.zeros(self.size)
        for name, value in tree.items():
            if name not in self._slices:
                raise InvalidInputError(f"unknown parameter {name!r}")
            lo, hi = self._slices[name]
            flat[lo:hi] = _float_view(np.ascontiguousarray(value))
        return flat

    def name_at(self, flat_index: int) -> str:
        for name in self._names:
            lo, hi = self._slices[name]
            if lo <= flat_index < hi:
                return name
        raise IndexError(flat_index)
