"""Real-valued functions on a truncated tree (one value per vertex)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tree import TruncatedTree, Vertex


@dataclass
class TreeFunction:
    """Values in the level-offset layout of `tree` (level-k block of length m^k)."""

    tree: TruncatedTree
    values: np.ndarray

    @classmethod
    def from_values(cls, tree: TruncatedTree, values) -> TreeFunction:
        arr = np.asarray(values, dtype=np.float64).copy()
        if arr.shape != (tree.vertex_count,):
            raise ValueError(
                f"expected {tree.vertex_count} values for m={tree.m}, "
                f"depth={tree.depth}, got shape {arr.shape}"
            )
        if not np.isfinite(arr).all():
            raise ValueError("tree function values must be finite")
        return cls(tree, arr)

    @classmethod
    def constant(cls, tree: TruncatedTree, value: float) -> TreeFunction:
        return cls.from_values(tree, np.full(tree.vertex_count, value))

    @classmethod
    def zeros(cls, tree: TruncatedTree) -> TreeFunction:
        return cls(tree, np.zeros(tree.vertex_count))

    def value_at(self, v: Vertex) -> float:
        return float(self.values[self.tree.flat_index(v)])

    def __getitem__(self, v: Vertex) -> float:
        return self.value_at(v)

    def level_values(self, level: int) -> np.ndarray:
        return self.values[self.tree.level_slice(level)]

    @property
    def leaf_values(self) -> np.ndarray:
        return self.values[self.tree.leaf_slice]

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.tree.interior_slice]

    def copy(self) -> TreeFunction:
        return TreeFunction(self.tree, self.values.copy())
