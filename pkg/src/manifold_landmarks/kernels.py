"""Pairwise distances (Euclidean and graph-geodesic) and Gaussian kernel blocks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial.distance import cdist

from .datasets import PointSet

__all__ = [
    "KernelSpec",
    "euclidean_distances",
    "geodesic_distances",
    "geodesic_from_sources",
    "kernel_matrix",
    "kernel_cross",
    "cross_kernel",
]

MODES = ("euclidean", "geodesic")


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel K_ij = exp(-dist(i,j)^2 / (2 sigma^2)).

    ``mode`` selects the distance: plain Euclidean, or shortest-path length
    through a symmetric ``geo_knn``-nearest-neighbor graph with Euclidean
    edge weights.  Pairs unreachable in the graph have infinite distance and
    kernel value 0.
    """

    sigma: float
    mode: str = "euclidean"
    geo_knn: int = 10

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "geodesic" and self.geo_knn < 1:
            raise ValueError(f"geo_knn must be >= 1, got {self.geo_knn}")


def _coords(X) -> np.ndarray:
    if isinstance(X, PointSet):
        return X.coords
    return np.asarray(X, dtype=np.float64)


def euclidean_distances(X) -> np.ndarray:
    """Full n x n matrix of pairwise Euclidean distances."""
    pts = _coords(X).T
    dist = cdist(pts, pts)
    np.fill_diagonal(dist, 0.0)
    return dist


def neighbor_graph(X, knn: int) -> csr_matrix:
    """Symmetric kNN graph: edge i-j if either is among the other's knn nearest.

    Edge weights are Euclidean distances.
    """
    if knn < 1:
        raise ValueError(f"knn must be >= 1, got {knn}")
    pts = _coords(X)
    n = pts.shape[1]
    knn = min(knn, n - 1)
    if n == 1 or knn == 0:
        return csr_matrix((n, n))
    dist = euclidean_distances(pts)
    # nearest knn of each row, self excluded via +inf diagonal
    np.fill_diagonal(dist, np.inf)
    cols = np.argpartition(dist, knn - 1, axis=1)[:, :knn]
    rows = np.repeat(np.arange(n), knn)
    data = dist[rows, cols.ravel()]
    graph = csr_matrix((data, (rows, cols.ravel())), shape=(n, n))
    return graph.maximum(graph.T)


def geodesic_distances(X, geo_knn: int) -> np.ndarray:
    """All-pairs shortest-path distances through the symmetric kNN graph.

    Unreachable pairs get +inf; disconnection is represented, not an error.
    """
    graph = neighbor_graph(X, geo_knn)
    dist = dijkstra(graph, directed=False)
    # path sums are order-dependent in floating point; enforce exact symmetry
    dist = np.minimum(dist, dist.T)
    np.fill_diagonal(dist, 0.0)
    return dist


def geodesic_from_sources(X, geo_knn: int, sources) -> np.ndarray:
    """Shortest-path distances from the given source indices to every point.

    Returns a len(sources) x n matrix; avoids the full n x n computation.
    """
    graph = neighbor_graph(X, geo_knn)
    return dijkstra(graph, directed=False, indices=np.asarray(sources, dtype=np.intp))


def _gaussianize(dist: np.ndarray, sigma: float) -> np.ndarray:
    # exp(-inf) = 0, so unreachable geodesic pairs drop out of the kernel
    with np.errstate(over="ignore"):
        return np.exp(-(dist**2) / (2.0 * sigma**2))


def kernel_matrix(X, spec: KernelSpec) -> np.ndarray:
    """Full n x n Gaussian kernel for the spec's distance mode."""
    if spec.mode == "euclidean":
        dist = euclidean_distances(X)
    else:
        dist = geodesic_distances(X, spec.geo_knn)
    return _gaussianize(dist, spec.sigma)


def _check_indices(name: str, idx: np.ndarray, n: int) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"{name} contains indices outside [0, {n})")
    return idx


def kernel_cross(X, J, J_rest, spec: KernelSpec) -> np.ndarray:
    """The |J| x |J_rest| kernel block, without materializing the full matrix.

    J and J_rest must be disjoint index sets into X.
    """
    pts = _coords(X)
    n = pts.shape[1]
    J = _check_indices("J", J, n)
    J_rest = _check_indices("J_rest", J_rest, n)
    if np.intersect1d(J, J_rest).size:
        raise ValueError("J and J_rest must be disjoint")
    if J.size == 0 or J_rest.size == 0:
        return np.zeros((J.size, J_rest.size))
    if spec.mode == "euclidean":
        dist = cdist(pts[:, J].T, pts[:, J_rest].T)
    else:
        dist = geodesic_from_sources(pts, spec.geo_knn, J)[:, J_rest]
    return _gaussianize(dist, spec.sigma)


def cross_kernel(A, B, sigma: float) -> np.ndarray:
    """Euclidean Gaussian kernel between two separate coordinate sets (d x a, d x b)."""
    return _gaussianize(cdist(_coords(A).T, _coords(B).T), sigma)
