"""Nystrom kernel reconstruction, its trace-norm error, and out-of-sample embedding."""

from __future__ import annotations

import numpy as np
from scipy.linalg import pinvh

from .datasets import PointSet
from .kernels import KernelSpec, _gaussianize, geodesic_from_sources, kernel_cross, kernel_matrix

__all__ = [
    "reconstruction_error",
    "nystrom_reconstruct",
    "oos_extend",
]

PINV_RTOL = 1e-10
RECONSTRUCT_MAX_N = 2000
_TILE = 4096


def _pinv_sym(W: np.ndarray) -> np.ndarray:
    # Moore-Penrose inverse; singular values below 1e-10 * s_max are rank noise
    return pinvh(W, atol=0.0, rtol=PINV_RTOL)


def _landmark_indices(J, n: int) -> np.ndarray:
    J = np.asarray(J, dtype=np.intp)
    if J.size == 0:
        raise ValueError("J must be nonempty")
    if J.min() < 0 or J.max() >= n:
        raise IndexError(f"J contains indices outside [0, {n})")
    if np.unique(J).size != J.size:
        raise ValueError("J must not repeat indices")
    return J


def reconstruction_error(kernel, J) -> float:
    """Trace-norm error of the Nystrom reconstruction from landmarks J.

    tr(K_rest) - tr(C^T W^+ C), with W the landmark block and C the
    landmark-to-rest block.  ``kernel`` is either the dense n x n matrix or a
    ``(PointSet, KernelSpec)`` pair; the lazy pair form only ever builds the
    k x k and k x (n-k) blocks (the unreconstructed block enters through its
    trace alone, which is exactly n - k for a Gaussian kernel).
    """
    if isinstance(kernel, tuple):
        X, spec = kernel
        n = X.n if isinstance(X, PointSet) else np.asarray(X).shape[1]
        J = _landmark_indices(J, n)
        rest = np.setdiff1d(np.arange(n), J)
        W_inv = _pinv_sym(_landmark_block(X, J, spec))
        trace_rest = float(rest.size)  # unit diagonal
        explained = 0.0
        for start in range(0, rest.size, _TILE):
            tile = kernel_cross(X, J, rest[start : start + _TILE], spec)
            explained += float(np.sum(tile * (W_inv @ tile)))
    else:
        K = np.asarray(kernel, dtype=np.float64)
        n = K.shape[0]
        J = _landmark_indices(J, n)
        rest = np.setdiff1d(np.arange(n), J)
        W_inv = _pinv_sym(K[np.ix_(J, J)])
        C = K[np.ix_(J, rest)]
        trace_rest = float(np.trace(K[np.ix_(rest, rest)]))
        explained = float(np.sum(C * (W_inv @ C)))
    return max(trace_rest - explained, 0.0)


def _landmark_block(X, J, spec: KernelSpec) -> np.ndarray:
    if spec.mode == "euclidean":
        pts = X.coords if isinstance(X, PointSet) else np.asarray(X)
        return kernel_matrix(pts[:, J], spec)
    # geodesic distances must be computed on the full graph, then restricted
    dist = geodesic_from_sources(X, spec.geo_knn, J)[:, J]
    return _gaussianize(dist, spec.sigma)


def nystrom_reconstruct(K: np.ndarray, J) -> np.ndarray:
    """Explicit reconstruction C^T W^+ C of the non-landmark block (testing sizes only)."""
    K = np.asarray(K, dtype=np.float64)
    n = K.shape[0]
    if n > RECONSTRUCT_MAX_N:
        raise ValueError(f"explicit reconstruction limited to n <= {RECONSTRUCT_MAX_N}")
    J = _landmark_indices(J, n)
    rest = np.setdiff1d(np.arange(n), J)
    C = K[np.ix_(J, rest)]
    return C.T @ _pinv_sym(K[np.ix_(J, J)]) @ C


def oos_extend(
    phi: np.ndarray,
    eigenvalues: np.ndarray,
    k_cross: np.ndarray,
    landmark_kernel: np.ndarray,
) -> np.ndarray:
    """Extend a landmark embedding to the remaining points.

    Each non-landmark point j receives ktilde[:, j] @ phi / eigenvalues,
    where ktilde normalizes the landmark-to-point kernel column by the
    landmark count and by the square roots of two means taken over the
    landmark set: the mean kernel value from the landmarks to point j, and
    the mean kernel value from landmark i to the landmarks.

    phi: (k, l) landmark embedding rows; eigenvalues: (l,) positive;
    k_cross: (k, n_rest); landmark_kernel: (k, k) landmark block used for the
    row-mean normalization.
    """
    phi = np.asarray(phi, dtype=np.float64)
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    k_cross = np.asarray(k_cross, dtype=np.float64)
    landmark_kernel = np.asarray(landmark_kernel, dtype=np.float64)
    k = phi.shape[0]
    if k_cross.shape[0] != k or landmark_kernel.shape != (k, k):
        raise ValueError("kernel blocks disagree with the landmark count")
    if np.any(eigenvalues <= 0):
        raise ValueError("all embedding eigenvalues must be positive")
    col_means = k_cross.mean(axis=0)
    bad = np.flatnonzero(col_means <= 0)
    if bad.size:
        raise ValueError(f"isolated points with zero kernel column: {bad.tolist()}")
    row_means = landmark_kernel.mean(axis=1)
    ktilde = k_cross / (k * np.sqrt(np.outer(row_means, col_means)))
    return (ktilde.T @ phi) / eigenvalues
