"""Landmark graph construction, Laplacian eigenmaps, and the end-to-end pipeline.

Neighborhoods may be selected by Euclidean distance or by the Bhattacharyya
distance between the Gaussians (x_i, C_i) attached to the landmarks; the
latter follows the local sheet geometry and resists short cuts across nearby
folds of a sparsely sampled manifold.  Edge weights are always Gaussian
kernel values of the Euclidean distance, so the graph stays a sparsified
kernel matrix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import cho_factor, cho_solve, eigh
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import eigsh

from .datasets import PointSet
from .kernels import KernelSpec, cross_kernel, euclidean_distances
from .nystrom import oos_extend
from .sampling import LandmarkSelection, Welsch, efficient_dpp_sample

__all__ = [
    "NeighborhoodGraph",
    "SpectralEmbedding",
    "GraphError",
    "DisconnectedGraphError",
    "PipelineError",
    "PipelineResult",
    "bhattacharyya_distance",
    "pairwise_bhattacharyya",
    "graph_from_distances",
    "build_graph",
    "laplacian_eigenmaps",
    "pipeline",
    "write_edge_list",
]

DENSE_EIGEN_MAX = 500
_SHIFT = -1e-3  # factorization shift; generalized eigenvalues live in [0, 2]


class GraphError(Exception):
    pass


class DisconnectedGraphError(GraphError):
    def __init__(self, components: int):
        super().__init__(f"graph has {components} connected components; embedding needs 1")
        self.components = components


class PipelineError(Exception):
    """Failure of one pipeline stage, labeled with the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class NeighborhoodGraph:
    """Sparse symmetric nonnegative weights over landmarks, with degrees and
    connected-component count."""

    weights: sparse.csr_matrix
    degrees: np.ndarray
    components: int

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]


@dataclass
class SpectralEmbedding:
    """Rows of ``coords`` embed the landmarks; ``eigenvalues`` are the matching
    smallest nonzero generalized eigenvalues, ascending."""

    coords: np.ndarray
    eigenvalues: np.ndarray


@dataclass
class PipelineResult:
    selection: LandmarkSelection
    landmark_embedding: SpectralEmbedding
    all_coords: np.ndarray | None
    diagnostics: dict = field(default_factory=dict)


def _logdet_spd(C: np.ndarray):
    try:
        factor = cho_factor(C, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"covariance is not positive definite: {exc}") from None
    return factor, 2.0 * float(np.sum(np.log(np.diag(factor[0]))))


def bhattacharyya_distance(x_i, cov_i, x_j, cov_j) -> float:
    """Bhattacharyya distance between Gaussians (x_i, C_i) and (x_j, C_j).

    1/8 (x_i-x_j)^T C^-1 (x_i-x_j) + 1/2 ln(|C| / sqrt(|C_i| |C_j|)) with
    C = (C_i + C_j)/2.  1-D covariance arrays are taken as diagonals and use
    the closed diagonal form.
    """
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    cov_i = np.asarray(cov_i, dtype=np.float64)
    cov_j = np.asarray(cov_j, dtype=np.float64)
    diff = x_i - x_j
    if cov_i.ndim == 1:
        if np.any(cov_i <= 0) or np.any(cov_j <= 0):
            raise ValueError("diagonal covariances must be strictly positive")
        mean = 0.5 * (cov_i + cov_j)
        maha = float(np.sum(diff**2 / mean))
        logdet = float(np.sum(np.log(mean)) - 0.5 * (np.sum(np.log(cov_i)) + np.sum(np.log(cov_j))))
    else:
        mean_factor, logdet_mean = _logdet_spd(0.5 * (cov_i + cov_j))
        _, logdet_i = _logdet_spd(cov_i)
        _, logdet_j = _logdet_spd(cov_j)
        maha = float(diff @ cho_solve(mean_factor, diff))
        logdet = logdet_mean - 0.5 * (logdet_i + logdet_j)
    return 0.125 * maha + 0.5 * logdet


def pairwise_bhattacharyya(points: np.ndarray, covariances: np.ndarray) -> np.ndarray:
    """Symmetric k x k Bhattacharyya distance matrix over landmark Gaussians.

    ``points`` is d x k; ``covariances`` is (k, d, d) or (k, d) for diagonals.
    """
    points = np.asarray(points, dtype=np.float64)
    covariances = np.asarray(covariances, dtype=np.float64)
    d, k = points.shape
    out = np.empty((k, k))
    if covariances.ndim == 2:
        if np.any(covariances <= 0):
            raise ValueError("diagonal covariances must be strictly positive")
        logdets = np.sum(np.log(covariances), axis=1)
        for i in range(k):
            mean = 0.5 * (covariances[i] + covariances)  # (k, d)
            diff = points.T - points[:, i]
            maha = np.sum(diff**2 / mean, axis=1)
            logdet = np.sum(np.log(mean), axis=1) - 0.5 * (logdets[i] + logdets)
            out[i] = 0.125 * maha + 0.5 * logdet
    else:
        sign, logdets = np.linalg.slogdet(covariances)
        if np.any(sign <= 0):
            raise ValueError("covariances must be positive definite")
        for i in range(k):
            mean = 0.5 * (covariances[i] + covariances)  # (k, d, d)
            diff = points.T - points[:, i]
            sign, logdet_mean = np.linalg.slogdet(mean)
            if np.any(sign <= 0):
                raise ValueError("covariance midpoints must be positive definite")
            solved = np.linalg.solve(mean, diff[:, :, None])[:, :, 0]
            maha = np.einsum("ij,ij->i", diff, solved)
            out[i] = 0.125 * maha + 0.5 * (logdet_mean - 0.5 * (logdets[i] + logdets))
    np.fill_diagonal(out, 0.0)
    return np.maximum(out, out.T)  # exact symmetry; entries agree to rounding


def _neighbor_mask(dist: np.ndarray, knn: int | None, eps: float | None) -> np.ndarray:
    k = dist.shape[0]
    if (knn is None) == (eps is None):
        raise ValueError("exactly one of knn and eps must be given")
    mask = np.zeros((k, k), dtype=bool)
    if knn is not None:
        if not 1 <= knn <= k - 1:
            raise ValueError(f"knn must be in [1, {k - 1}], got {knn}")
        work = dist.copy()
        np.fill_diagonal(work, np.inf)
        order = np.argpartition(work, knn - 1, axis=1)[:, :knn]
        mask[np.repeat(np.arange(k), knn), order.ravel()] = True
    else:
        if eps <= 0:
            raise ValueError(f"eps must be > 0, got {eps}")
        mask = dist <= eps
        np.fill_diagonal(mask, False)
    return mask | mask.T  # union symmetrization


def graph_from_distances(
    euclid: np.ndarray,
    neighbor_dist: np.ndarray,
    sigma: float,
    knn: int | None = None,
    eps: float | None = None,
) -> NeighborhoodGraph:
    """Graph with neighbors picked on ``neighbor_dist`` and Gaussian weights on ``euclid``.

    Lets callers that sweep graph parameters reuse precomputed distance
    matrices instead of rebuilding them per sweep point.
    """
    mask = _neighbor_mask(neighbor_dist, knn, eps)
    weights = np.where(mask, np.exp(-(euclid**2) / (2.0 * sigma**2)), 0.0)
    W = sparse.csr_matrix(weights)
    n_components = connected_components(W, directed=False, return_labels=False)
    return NeighborhoodGraph(W, np.asarray(W.sum(axis=1)).ravel(), int(n_components))


def build_graph(
    X,
    selection: LandmarkSelection,
    sigma: float,
    metric: str = "euclidean",
    knn: int | None = None,
    eps: float | None = None,
) -> NeighborhoodGraph:
    """Neighborhood graph over the selected landmarks.

    Neighbors are chosen per ``metric`` ("euclidean" or "bhattacharyya", the
    latter requiring per-landmark covariances) with either a kNN rule or an
    eps-ball rule, then symmetrized by union.  Edge weights are Gaussian
    kernel values of the Euclidean distance regardless of the metric, so W is
    a sparsified version of the landmark kernel block.
    """
    pts = X.coords if isinstance(X, PointSet) else np.asarray(X, dtype=np.float64)
    landmarks = pts[:, selection.indices]
    euclid = euclidean_distances(landmarks)
    if metric == "euclidean":
        dist = euclid
    elif metric == "bhattacharyya":
        if selection.covariances is None:
            raise GraphError("bhattacharyya neighborhoods need per-landmark covariances")
        dist = pairwise_bhattacharyya(landmarks, selection.covariances)
    else:
        raise ValueError(f"metric must be 'euclidean' or 'bhattacharyya', got {metric!r}")
    return graph_from_distances(euclid, dist, sigma, knn=knn, eps=eps)


def laplacian_eigenmaps(graph: NeighborhoodGraph, l: int) -> SpectralEmbedding:
    """Embedding from the l smallest nonzero eigenpairs of (D - W) phi = lambda D phi.

    The graph must be connected; the constant zero mode is dropped.  Vectors
    are D-orthonormal, each signed so its largest-magnitude entry is positive.
    Small graphs use a dense solver; larger ones a shifted sparse
    factorization with a fixed start vector for reproducibility.
    """
    k = graph.n_nodes
    if graph.components != 1:
        raise DisconnectedGraphError(graph.components)
    if not 1 <= l < k:
        raise ValueError(f"l must be in [1, {k - 1}], got {l}")
    W = graph.weights
    degrees = graph.degrees
    laplacian = sparse.diags(degrees) - W
    if k <= DENSE_EIGEN_MAX:
        values, vectors = eigh(laplacian.toarray(), np.diag(degrees))
        values, vectors = values[1 : l + 1], vectors[:, 1 : l + 1]
    else:
        v0 = np.random.default_rng(0).standard_normal(k)
        values, vectors = eigsh(
            laplacian.tocsc(),
            k=l + 1,
            M=sparse.diags(degrees).tocsc(),
            sigma=_SHIFT,
            which="LM",
            v0=v0,
        )
        order = np.argsort(values)
        values, vectors = values[order][1:], vectors[:, order][:, 1:]
    signs = np.sign(vectors[np.argmax(np.abs(vectors), axis=0), np.arange(l)])
    vectors = vectors * np.where(signs == 0, 1.0, signs)
    return SpectralEmbedding(vectors, np.clip(values, 0.0, None))


def pipeline(
    X: PointSet,
    k: int,
    m: int,
    sigma: float,
    l: int,
    seed=0,
    f=None,
    metric: str = "euclidean",
    knn: int | None = None,
    eps: float | None = None,
    diagonal_covariances: bool = False,
    landmarks: LandmarkSelection | None = None,
    extend: bool = True,
    compute_error: bool = False,
) -> PipelineResult:
    """Sample landmarks, build their graph, embed them, and extend to all points.

    Any stage failure is re-raised as :class:`PipelineError` labeled with the
    stage name ("sampling", "graph", "embedding", "extension").  When
    ``extend`` is set, ``all_coords`` holds one embedding row per input point
    (landmark rows come from the eigenvectors, the rest from the Nystrom
    extension, streamed in column tiles).
    """
    if f is None:
        f = Welsch(sigma)
    try:
        if landmarks is None:
            landmarks = efficient_dpp_sample(
                X,
                k,
                m,
                f=f,
                seed=seed,
                estimate_covariances=(metric == "bhattacharyya"),
                diagonal_covariances=diagonal_covariances,
            )
    except Exception as exc:
        raise PipelineError("sampling", str(exc)) from exc

    try:
        graph = build_graph(X, landmarks, sigma, metric=metric, knn=knn, eps=eps)
    except Exception as exc:
        raise PipelineError("graph", str(exc)) from exc

    try:
        embedding = laplacian_eigenmaps(graph, l)
    except Exception as exc:
        raise PipelineError("embedding", str(exc)) from exc

    diagnostics: dict = {"components": graph.components, "k": landmarks.k}
    spec = KernelSpec(sigma=sigma)
    if compute_error:
        diagnostics["reconstruction_error"] = _lazy_error(X, spec, landmarks.indices)

    all_coords = None
    if extend:
        try:
            all_coords = _extend_all(X, landmarks, embedding, sigma)
        except Exception as exc:
            raise PipelineError("extension", str(exc)) from exc
    return PipelineResult(landmarks, embedding, all_coords, diagnostics)


def _lazy_error(X: PointSet, spec: KernelSpec, indices: np.ndarray) -> float:
    from .nystrom import reconstruction_error

    return reconstruction_error((X, spec), indices)


def _extend_all(
    X: PointSet,
    landmarks: LandmarkSelection,
    embedding: SpectralEmbedding,
    sigma: float,
    tile: int = 8192,
) -> np.ndarray:
    pts = X.coords
    n = pts.shape[1]
    rest = np.setdiff1d(np.arange(n), landmarks.indices)
    landmark_pts = pts[:, landmarks.indices]
    landmark_kernel = cross_kernel(landmark_pts, landmark_pts, sigma)
    out = np.empty((n, embedding.coords.shape[1]))
    out[landmarks.indices] = embedding.coords
    for start in range(0, rest.size, tile):
        chunk = rest[start : start + tile]
        k_cross = cross_kernel(landmark_pts, pts[:, chunk], sigma)
        out[chunk] = oos_extend(embedding.coords, embedding.eigenvalues, k_cross, landmark_kernel)
    return out


def write_edge_list(graph: NeighborhoodGraph, path) -> None:
    """Export the upper-triangle edges as CSV rows (i, j, weight)."""
    coo = sparse.triu(graph.weights, k=1).tocoo()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "weight"])
        for i, j, w in zip(coo.row, coo.col, coo.data):
            writer.writerow([int(i), int(j), repr(float(w))])
