"""Landmark subset selection.

Exact determinantal point process sampling, a brute-force volume-sampling
oracle, a linear-time approximate DPP sampler with locally restricted
probability updates, and the uniform / K-means baselines it is compared
against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .datasets import PointSet

__all__ = [
    "LandmarkSelection",
    "SelectionState",
    "SamplingError",
    "WeightsExhaustedError",
    "Welsch",
    "SineSquared",
    "exact_dpp_sample",
    "projection_update",
    "volume_sampling_enumerate",
    "efficient_dpp_sample",
    "uniform_sample",
    "kmeanspp_seed",
    "kmeans",
]

EIGENVALUE_CLAMP_REL = 1e-8
COVARIANCE_REG_REL = 1e-6


class SamplingError(Exception):
    pass


class WeightsExhaustedError(SamplingError):
    """All selection weights reached zero before the requested subset size."""

    def __init__(self, iteration: int):
        super().__init__(f"selection weights are all zero at iteration {iteration}")
        self.iteration = iteration


@dataclass
class LandmarkSelection:
    """Ordered distinct point indices, optionally with a local covariance per landmark.

    ``covariances`` is a (k, d, d) stack of full matrices or a (k, d) array of
    diagonals, aligned with ``indices``.
    """

    indices: np.ndarray
    covariances: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.indices = np.asarray(self.indices, dtype=np.intp)
        if self.indices.ndim != 1:
            raise ValueError("indices must be a flat index list")
        if np.unique(self.indices).size != self.indices.size:
            raise ValueError("landmark indices must be distinct")
        if self.indices.size and self.indices.min() < 0:
            raise ValueError("landmark indices must be nonnegative")
        if self.covariances is not None:
            self.covariances = np.asarray(self.covariances, dtype=np.float64)
            if self.covariances.shape[0] != self.indices.size:
                raise ValueError("one covariance per landmark required")

    @property
    def k(self) -> int:
        return self.indices.size


@dataclass
class SelectionState:
    """Selection weights over all points plus the indices drawn so far."""

    weights: np.ndarray
    selected: list[int]


@dataclass(frozen=True)
class Welsch:
    """Update factor 1 - exp(-delta^2 / (2 sigma^2)); the Gaussian kernel's complement."""

    sigma: float

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")

    def __call__(self, deltas: np.ndarray) -> np.ndarray:
        return -np.expm1(-(deltas**2) / (2.0 * self.sigma**2))


@dataclass(frozen=True)
class SineSquared:
    """Update factor sin^2(delta / tau).

    With ``tau=None`` the scale is set per neighborhood to 2*max(delta)/pi,
    which keeps the arguments within [0, pi/2].
    """

    tau: float | None = None

    def __post_init__(self) -> None:
        if self.tau is not None and self.tau <= 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")

    def __call__(self, deltas: np.ndarray) -> np.ndarray:
        tau = self.tau
        if tau is None:
            largest = float(np.max(deltas)) if deltas.size else 0.0
            if largest == 0.0:
                return np.zeros_like(deltas)
            tau = 2.0 * largest / np.pi
        return np.sin(deltas / tau) ** 2


def _weighted_draw(weights: np.ndarray, rng: np.random.Generator) -> int:
    cumulative = np.cumsum(weights)
    total = cumulative[-1]
    if not total > 0:
        raise ValueError("weights sum to zero")
    return int(np.searchsorted(cumulative, rng.random() * total, side="right"))


def _coords(X) -> np.ndarray:
    if isinstance(X, PointSet):
        return X.coords
    return np.asarray(X, dtype=np.float64)


def exact_dpp_sample(K: np.ndarray, seed=0) -> LandmarkSelection:
    """Draw a subset J with probability det(K_J) / det(K + I).

    Eigenvectors enter a basis independently with probability
    lambda / (lambda + 1); a point is then drawn per basis vector with
    probability proportional to its squared row norm, and the rows are
    projected onto the orthogonal complement of the chosen row.  The subset
    size is random: it cannot be fixed in this scheme.

    Eigenvalues in [-1e-8 * lambda_max, 0) are treated as rounding noise and
    clamped to 0; anything lower raises.
    """
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"K must be square, got shape {K.shape}")
    if not np.allclose(K, K.T, rtol=1e-10, atol=1e-12):
        raise ValueError("K must be symmetric")
    rng = np.random.default_rng(seed)
    eigenvalues, eigenvectors = np.linalg.eigh(K)
    scale = max(float(eigenvalues[-1]), 0.0)
    floor = -EIGENVALUE_CLAMP_REL * max(scale, 1.0)
    if eigenvalues[0] < floor:
        raise ValueError(
            f"K is indefinite: smallest eigenvalue {eigenvalues[0]:.3e} below {floor:.3e}"
        )
    eigenvalues = np.clip(eigenvalues, 0.0, None)

    include = rng.random(eigenvalues.size) < eigenvalues / (eigenvalues + 1.0)
    B = eigenvectors[:, include]  # row i spans point i's coordinates in the kept basis
    chosen: list[int] = []
    for _ in range(B.shape[1]):
        norms = np.einsum("ij,ij->i", B, B)
        i = _weighted_draw(norms, rng)
        chosen.append(i)
        b = B[i].copy()
        B -= np.outer(B @ b / (b @ b), b)
        B[i] = 0.0  # exact zero so the row cannot be redrawn through rounding noise
    return LandmarkSelection(np.array(chosen, dtype=np.intp))


def projection_update(b_i: np.ndarray, b_j: np.ndarray) -> np.ndarray:
    """Project b_j onto the orthogonal complement of b_i.

    The result's squared norm is ||b_j||^2 sin^2(angle between b_i and b_j).
    """
    b_i = np.asarray(b_i, dtype=np.float64)
    b_j = np.asarray(b_j, dtype=np.float64)
    denom = float(b_i @ b_i)
    if denom == 0.0:
        raise ValueError("b_i must be nonzero")
    return b_j - (b_j @ b_i) / denom * b_i


def volume_sampling_enumerate(K: np.ndarray, k: int, s: float = 1.0, seed=0) -> LandmarkSelection:
    """Draw a k-subset with probability proportional to det(K_J)^s by full enumeration.

    A combinatorial oracle for small problems (n <= 20).  s = 0 reduces to
    uniform sampling over k-subsets.
    """
    K = np.asarray(K, dtype=np.float64)
    n = K.shape[0]
    if n > 20:
        raise ValueError(f"enumeration oracle limited to n <= 20, got n = {n}")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if s < 0:
        raise ValueError(f"s must be >= 0, got {s}")
    subsets = np.array(list(itertools.combinations(range(n), k)), dtype=np.intp)
    blocks = K[subsets[:, :, None], subsets[:, None, :]]
    determinants = np.clip(np.linalg.det(blocks), 0.0, None)
    weights = determinants**s  # 0**0 == 1, so s = 0 keeps zero-determinant subsets
    if not weights.sum() > 0:
        raise ValueError("all subset determinants are zero")
    rng = np.random.default_rng(seed)
    return LandmarkSelection(subsets[_weighted_draw(weights, rng)])


def _m_nearest(delta: np.ndarray, m: int, center: int) -> np.ndarray:
    """Indices of the m smallest deltas; ties at the boundary go to lower indices.

    ``center`` (the selected point, delta 0) is always included so that its
    weight is zeroed by f(0) = 0.
    """
    n = delta.size
    if m >= n:
        return np.arange(n)
    cutoff = np.partition(delta, m - 1)[m - 1]
    below = np.flatnonzero(delta < cutoff)
    ties = np.flatnonzero(delta == cutoff)
    neighbors = np.concatenate([below, ties[: m - below.size]])
    if center not in neighbors:  # only possible when >= m points coincide with it
        neighbors[-1] = center
    return neighbors


def _local_covariance(points: np.ndarray, diagonal: bool) -> np.ndarray:
    d = points.shape[0]
    centered = points - points.mean(axis=1, keepdims=True)
    cov = centered @ centered.T / points.shape[1]
    reg = COVARIANCE_REG_REL * np.trace(cov) / d
    if diagonal:
        return np.diag(cov) + reg
    return cov + reg * np.eye(d)


def efficient_dpp_sample(
    X,
    k: int,
    m: int,
    f=None,
    seed=0,
    estimate_covariances: bool = False,
    diagonal_covariances: bool = False,
    return_state: bool = False,
):
    """Approximate DPP sampling of k landmarks in O(n d k).

    Maintains a weight per point, initially all ones.  Each iteration draws a
    point proportionally to the weights, then multiplies the weights of its m
    nearest neighbors (itself included) by f(distance).  Since f(0) = 0 the
    drawn point can never repeat; points near recent selections are unlikely
    to be drawn, which yields a diverse subset.

    When ``estimate_covariances`` is set, the sample covariance of each
    selected point's neighborhood is attached to the selection (full d x d
    matrices, or just their diagonals), regularized to stay positive
    definite even when the neighborhood is smaller than d.
    """
    pts = _coords(X)
    d, n = pts.shape
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if not 1 <= m <= n:
        raise ValueError(f"m must be in [1, {n}], got {m}")
    if f is None:
        f = Welsch(1.0)
    rng = np.random.default_rng(seed)
    weights = np.ones(n)
    chosen: list[int] = []
    covariances: list[np.ndarray] = []
    for iteration in range(k):
        if not weights.sum() > 0:
            raise WeightsExhaustedError(iteration)
        i = _weighted_draw(weights, rng)
        chosen.append(i)
        delta = np.sqrt(np.sum((pts - pts[:, i : i + 1]) ** 2, axis=0))
        neighbors = _m_nearest(delta, m, i)
        weights[neighbors] *= f(delta[neighbors])
        weights[i] = 0.0
        if estimate_covariances:
            covariances.append(_local_covariance(pts[:, neighbors], diagonal_covariances))
    selection = LandmarkSelection(
        np.array(chosen, dtype=np.intp),
        covariances=np.array(covariances) if estimate_covariances else None,
    )
    if return_state:
        return selection, SelectionState(weights, chosen)
    return selection


def uniform_sample(n: int, k: int, seed=0) -> LandmarkSelection:
    """Uniform k-subset of [0, n) without replacement."""
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    return LandmarkSelection(rng.choice(n, size=k, replace=False))


def _kmeanspp_indices(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = pts.shape[1]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((pts - pts[:, chosen[0] : chosen[0] + 1]) ** 2, axis=0)
    for _ in range(k - 1):
        if d2.sum() > 0:
            i = _weighted_draw(d2, rng)
        else:
            # all remaining points coincide with a chosen one: fall back to uniform
            remaining = np.setdiff1d(np.arange(n), chosen)
            i = int(rng.choice(remaining))
        chosen.append(i)
        d2 = np.minimum(d2, np.sum((pts - pts[:, i : i + 1]) ** 2, axis=0))
    return np.array(chosen, dtype=np.intp)


def kmeanspp_seed(X, k: int, seed=0) -> LandmarkSelection:
    """K-means++ seeding: each next index drawn proportional to its squared
    distance to the nearest already-chosen landmark."""
    pts = _coords(X)
    if not 1 <= k <= pts.shape[1]:
        raise ValueError(f"k must be in [1, {pts.shape[1]}], got {k}")
    rng = np.random.default_rng(seed)
    return LandmarkSelection(_kmeanspp_indices(pts, k, rng))


def _snap_to_points(centroids: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Nearest distinct data point per centroid, resolved greedily in centroid order."""
    dist = cdist(centroids, pts.T)
    taken = np.zeros(pts.shape[1], dtype=bool)
    snapped = np.empty(centroids.shape[0], dtype=np.intp)
    for c in range(centroids.shape[0]):
        row = np.where(taken, np.inf, dist[c])
        snapped[c] = np.argmin(row)
        taken[snapped[c]] = True
    return snapped


def kmeans(X, k: int, init: str = "uniform", seed=0, max_iter: int = 100) -> LandmarkSelection:
    """Lloyd's K-means; landmarks are the data points nearest the final centroids.

    ``init`` is "uniform" or "plusplus".  An empty cluster is re-seeded at the
    point farthest from its assigned centroid.  With ``max_iter=0`` and
    plusplus init this returns exactly the K-means++ seeding.
    """
    pts = _coords(X)
    n = pts.shape[1]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if init not in ("uniform", "plusplus"):
        raise ValueError(f"init must be 'uniform' or 'plusplus', got {init!r}")
    rng = np.random.default_rng(seed)
    if init == "plusplus":
        seeds = _kmeanspp_indices(pts, k, rng)
    else:
        seeds = rng.choice(n, size=k, replace=False)
    if max_iter == 0:
        return LandmarkSelection(np.asarray(seeds, dtype=np.intp))

    centroids = pts[:, seeds].T.copy()
    assignment = None
    for _ in range(max_iter):
        d2 = cdist(pts.T, centroids, "sqeuclidean")
        new_assignment = np.argmin(d2, axis=1)
        own = d2[np.arange(n), new_assignment]
        for c in range(k):
            members = new_assignment == c
            if not members.any():
                farthest = int(np.argmax(own))
                centroids[c] = pts[:, farthest]
                new_assignment[farthest] = c
                own[farthest] = 0.0
            else:
                centroids[c] = pts[:, members].mean(axis=1)
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
    return LandmarkSelection(_snap_to_points(centroids, pts))
