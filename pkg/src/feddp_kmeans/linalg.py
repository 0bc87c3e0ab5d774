"""Rank-k subspace extraction from (noisy) outer-product matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Projector", "outer_product", "top_k_projector", "project"]


@dataclass(frozen=True)
class Projector:
    """Orthogonal projector ``matrix = basis @ basis.T`` onto a k-dim subspace.

    ``basis`` is d x k with orthonormal columns ordered by decreasing eigenvalue;
    ``eigenvalues`` holds the retained eigenvalues in that order.
    """

    matrix: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, points) -> np.ndarray:
        return project(self, points)


def _as_points(points, dim: int | None = None) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        if dim is None and arr.ndim == 2:
            dim = arr.shape[1]
        if dim is None:
            raise ValueError("dimension of an empty point set is unknown; pass dim")
        return np.zeros((0, dim))
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"expected an (n, d) array of points, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"points have dimension {arr.shape[1]}, expected {dim}")
    return arr


def outer_product(points, dim: int | None = None) -> np.ndarray:
    """Sum of ``p p^T`` over the rows of ``points`` (the d x d matrix ``P^T P``)."""
    arr = _as_points(points, dim)
    return arr.T @ arr


def top_k_projector(m, k: int) -> Projector:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    d = m.shape[0]
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in [1, {d}], got {k}")
    sym = 0.5 * (m + m.T)
    vals, vecs = np.linalg.eigh(sym)
    # descending eigenvalue; equal eigenvalues keep ascending solver index
    order = np.lexsort((np.arange(d), -vals))[:k]
    basis = vecs[:, order]
    return Projector(matrix=basis @ basis.T, basis=basis, eigenvalues=vals[order])


def project(pi: Projector, points) -> np.ndarray:
    arr = _as_points(points, pi.dim)
    # (V (V^T p)) is cheaper than Pi p once d >> k
    return (arr @ pi.basis) @ pi.basis.T
