"""Scalable manifold learning via diverse landmark selection.

Determinantal point process sampling (exact and a linear-time approximation),
Nystrom kernel reconstruction and out-of-sample embedding, and robust
landmark-graph construction using local covariances and the Bhattacharyya
distance.
"""

__version__ = "0.1.0"

from .datasets import (
    PointSet,
    generate_fish_bowl,
    generate_swiss_roll,
    read_csv,
    read_idx,
    write_csv,
)
from .kernels import (
    KernelSpec,
    cross_kernel,
    euclidean_distances,
    geodesic_distances,
    kernel_cross,
    kernel_matrix,
)
from .sampling import (
    LandmarkSelection,
    SineSquared,
    Welsch,
    efficient_dpp_sample,
    exact_dpp_sample,
    kmeans,
    kmeanspp_seed,
    projection_update,
    uniform_sample,
    volume_sampling_enumerate,
)
from .nystrom import nystrom_reconstruct, oos_extend, reconstruction_error
from .graph_embedding import (
    NeighborhoodGraph,
    SpectralEmbedding,
    bhattacharyya_distance,
    build_graph,
    laplacian_eigenmaps,
    pipeline,
)

__all__ = [
    "__version__",
    "PointSet",
    "KernelSpec",
    "LandmarkSelection",
    "NeighborhoodGraph",
    "SpectralEmbedding",
    "SineSquared",
    "Welsch",
    "generate_swiss_roll",
    "generate_fish_bowl",
    "read_csv",
    "read_idx",
    "write_csv",
    "euclidean_distances",
    "geodesic_distances",
    "kernel_matrix",
    "kernel_cross",
    "cross_kernel",
    "exact_dpp_sample",
    "projection_update",
    "volume_sampling_enumerate",
    "efficient_dpp_sample",
    "uniform_sample",
    "kmeanspp_seed",
    "kmeans",
    "reconstruction_error",
    "nystrom_reconstruct",
    "oos_extend",
    "bhattacharyya_distance",
    "build_graph",
    "laplacian_eigenmaps",
    "pipeline",
]
