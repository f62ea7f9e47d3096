"""Vectorized per-level evaluation of the mean-value operators.

All operators read only the parent level and the successor level of the
vertex being updated, never the vertex itself, so a whole level can be
evaluated in one shot from a frozen value array (Jacobi) or in place in
leaves-to-root order (Gauss-Seidel).  Every per-row computation is local to
the row; partitioning a level into worker chunks cannot change the result.
"""

from __future__ import annotations

import numpy as np

from .tree import TruncatedTree

ENVELOPE_VARIANTS = ("convex", "binary", "kconvex")
LAPLACIAN_VARIANTS = ("laplacian_full", "laplacian_arborescence")
VARIANTS = ENVELOPE_VARIANTS + LAPLACIAN_VARIANTS

# Updates whose float rounding may overshoot the exact convex combination by
# an ulp (k-way and weighted averages); the solver clips these against the
# previous iterate so descent from the sup-initialization stays exact.
CLIPPED_VARIANTS = ("kconvex", "laplacian_full", "laplacian_arborescence")


def full_laplacian_weights(m: int) -> tuple[float, float]:
    """Predecessor and successor-average weights; they sum to exactly 1."""
    c_pred = 2.0 / (m + 1) ** 2
    c_succ = (m * m + 2 * m - 1) / (m + 1) ** 2
    return c_pred, c_succ


def check_variant(variant: str, k: int | None, m: int) -> None:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    if variant == "kconvex":
        if k is None:
            raise ValueError("variant 'kconvex' requires k")
        if not 2 <= k <= m:
            raise ValueError(f"k must be in [2, m={m}], got {k}")
    elif k is not None:
        raise ValueError(f"k is only meaningful for variant 'kconvex', got variant {variant!r}")


def _chunk_bounds(n: int, workers: int) -> list[tuple[int, int]]:
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    workers = min(workers, max(n, 1))
    step, extra = divmod(n, workers)
    bounds = []
    start = 0
    for w in range(workers):
        stop = start + step + (1 if w < extra else 0)
        bounds.append((start, stop))
        start = stop
    return bounds


def level_operator(
    tree: TruncatedTree,
    values: np.ndarray,
    level: int,
    variant: str,
    k: int | None = None,
    workers: int = 1,
) -> np.ndarray:
    """Operator values for every vertex of an interior level.

    Reads `values` at levels `level + 1` and (for the predecessor families)
    `level - 1`; the root level uses only the successor terms.
    """
    m = tree.m
    if not 0 <= level < tree.depth:
        raise ValueError(f"level {level} is not interior (depth {tree.depth})")
    n = tree.level_size(level)
    succ = values[tree.level_slice(level + 1)].reshape(n, m)
    par = None
    if level > 0 and variant in ("convex", "laplacian_full"):
        par = np.repeat(values[tree.level_slice(level - 1)], m)

    out = np.empty(n)
    for a, b in _chunk_bounds(n, workers):
        s = succ[a:b]
        if variant == "convex":
            part = np.partition(s, 1, axis=1)
            pair = (part[:, 0] + part[:, 1]) / 2.0
            if par is None:
                out[a:b] = pair
            else:
                pred = (par[a:b] + m * part[:, 0]) / (m + 1)
                out[a:b] = np.minimum(pair, pred)
        elif variant == "binary":
            part = np.partition(s, 1, axis=1)
            out[a:b] = (part[:, 0] + part[:, 1]) / 2.0
        elif variant == "kconvex":
            part = np.partition(s, k - 1, axis=1)
            out[a:b] = part[:, :k].sum(axis=1) / k
        elif variant == "laplacian_full":
            mean = s.mean(axis=1)
            if par is None:
                out[a:b] = mean
            else:
                c_pred, c_succ = full_laplacian_weights(m)
                out[a:b] = c_pred * par[a:b] + c_succ * mean
        elif variant == "laplacian_arborescence":
            out[a:b] = s.mean(axis=1)
        else:
            raise ValueError(f"unknown variant {variant!r}")
    return out


def apply_operator(
    tree: TruncatedTree,
    values: np.ndarray,
    variant: str,
    k: int | None = None,
    workers: int = 1,
) -> np.ndarray:
    """One simultaneous (Jacobi) application: interior vertices get their
    operator value, leaves are copied through unchanged."""
    check_variant(variant, k, tree.m)
    out = values.copy()
    for level in range(tree.depth):
        out[tree.level_slice(level)] = level_operator(tree, values, level, variant, k, workers)
    return out
