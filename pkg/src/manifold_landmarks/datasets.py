"""Synthetic manifold datasets and point-set file I/O (CSV, IDX)."""

from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PointSet",
    "DatasetError",
    "IdxMagicError",
    "IdxTruncatedError",
    "IdxCountMismatchError",
    "CsvFormatError",
    "generate_swiss_roll",
    "generate_fish_bowl",
    "read_idx",
    "read_csv",
    "write_csv",
]

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

SWISS_ROLL_T_RANGE = (1.5 * np.pi, 4.5 * np.pi)
SWISS_ROLL_HEIGHT = 21.0

# The bowl is the unit sphere minus the cap above z = 0.9 (top 5% of the
# sphere's height).  Under w -> (4*w, |w|^2 - 4) / (|w|^2 + 4) a plane disk of
# radius 2*sqrt(19) covers exactly z <= 0.9, so the open unit disk is scaled
# by that factor before projecting.
FISH_BOWL_PUNCTURE_Z = 0.9
_BOWL_DISK_SCALE = 2.0 * np.sqrt(19.0)


class DatasetError(Exception):
    """Raised for malformed dataset files."""


class IdxMagicError(DatasetError):
    """IDX file does not start with the expected magic number."""


class IdxTruncatedError(DatasetError):
    """IDX file ends before the payload announced in its header."""


class IdxCountMismatchError(DatasetError):
    """Image and label files disagree on the number of records."""


class CsvFormatError(DatasetError):
    """CSV point file is empty, ragged, or contains non-numeric cells."""


@dataclass
class PointSet:
    """A d x n matrix of column points with optional labels and generative parameters.

    ``coords[:, i]`` is point i.  ``labels`` holds one integer per point.
    For synthetic manifolds ``truth`` stores the low-dimensional parameters
    that generated each column (one column per point), enabling quality
    checks against ground truth.
    """

    coords: np.ndarray
    labels: np.ndarray | None = None
    truth: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.coords = np.ascontiguousarray(np.asarray(self.coords, dtype=np.float64))
        if self.coords.ndim != 2:
            raise ValueError(f"coords must be 2-D (d x n), got shape {self.coords.shape}")
        if self.coords.shape[0] < 1 or self.coords.shape[1] < 1:
            raise ValueError(f"coords must be non-empty, got shape {self.coords.shape}")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("coords contain non-finite values")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.n,):
                raise ValueError(
                    f"labels must have length n={self.n}, got shape {self.labels.shape}"
                )
        if self.truth is not None:
            self.truth = np.asarray(self.truth, dtype=np.float64)
            if self.truth.ndim != 2 or self.truth.shape[1] != self.n:
                raise ValueError(
                    f"truth must have n={self.n} columns, got shape {self.truth.shape}"
                )

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    @property
    def n(self) -> int:
        return self.coords.shape[1]


def generate_swiss_roll(n: int, noise: float = 0.0, seed: int = 0) -> PointSet:
    """Sample n points from the swiss-roll surface (t cos t, h, t sin t).

    t is uniform on [3*pi/2, 9*pi/2] and the height h uniform on [0, 21].
    Optional isotropic Gaussian noise of the given scale is added in 3D.
    ``truth`` stores the (t, h) parameters, so the 3D sample can be mapped
    back onto the flat 2D sheet.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if noise < 0:
        raise ValueError(f"noise must be >= 0, got {noise}")
    rng = np.random.default_rng(seed)
    t = rng.uniform(*SWISS_ROLL_T_RANGE, size=n)
    h = rng.uniform(0.0, SWISS_ROLL_HEIGHT, size=n)
    coords = np.stack([t * np.cos(t), h, t * np.sin(t)])
    if noise > 0:
        coords = coords + noise * rng.standard_normal((3, n))
    return PointSet(coords, truth=np.stack([t, h]))


def generate_fish_bowl(n: int, seed: int = 0) -> PointSet:
    """Sample n points from a punctured unit sphere with density rising toward the top.

    2D points are drawn uniformly from the open unit disk, scaled, and mapped
    onto the sphere by inverse stereographic projection (plane tangent at the
    south pole, projecting from the north pole).  The disk center maps to the
    bottom of the sphere and the disk rim to the rim of the puncture, the cap
    above z = 0.9.  The projection's area distortion makes the bowl provably
    denser near the top.  ``truth`` stores the plane pre-images.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    radius = np.sqrt(rng.uniform(0.0, 1.0, size=n))
    angle = rng.uniform(0.0, 2.0 * np.pi, size=n)
    plane = _BOWL_DISK_SCALE * radius * np.stack([np.cos(angle), np.sin(angle)])
    rho2 = np.sum(plane**2, axis=0)
    denom = rho2 + 4.0
    coords = np.stack([4.0 * plane[0] / denom, 4.0 * plane[1] / denom, (rho2 - 4.0) / denom])
    return PointSet(coords, truth=plane)


def _read_exact(handle, nbytes: int, path) -> bytes:
    data = handle.read(nbytes)
    if len(data) != nbytes:
        raise IdxTruncatedError(
            f"{path}: expected {nbytes} more bytes, file ends after {len(data)}"
        )
    return data


def _open_binary(path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx(images_path, labels_path, limit: int | None = None) -> PointSet:
    """Read an IDX image/label file pair (the MNIST distribution format).

    Each image becomes one column, flattened row-major and scaled to [0, 1].
    Plain and gzip-compressed files are both accepted.  ``limit`` truncates
    to the first ``limit`` records.
    """
    with _open_binary(images_path) as f:
        magic, count, rows, cols = struct.unpack(">IIII", _read_exact(f, 16, images_path))
        if magic != IMAGES_MAGIC:
            raise IdxMagicError(
                f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}"
            )
        pixels = np.frombuffer(_read_exact(f, count * rows * cols, images_path), dtype=np.uint8)
    with _open_binary(labels_path) as f:
        magic, label_count = struct.unpack(">II", _read_exact(f, 8, labels_path))
        if magic != LABELS_MAGIC:
            raise IdxMagicError(
                f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x}"
            )
        labels = np.frombuffer(_read_exact(f, label_count, labels_path), dtype=np.uint8)
    if label_count != count:
        raise IdxCountMismatchError(
            f"{count} images in {images_path} but {label_count} labels in {labels_path}"
        )
    if limit is not None:
        if limit < 1:
            raise ValueError(f"limit must be >= 1, got {limit}")
        count = min(limit, count)
    coords = pixels.reshape(-1, rows * cols)[:count].T.astype(np.float64) / 255.0
    return PointSet(coords, labels=labels[:count].astype(np.int64))


def write_csv(points: PointSet, path) -> None:
    """Write one point per row under a ``x0,...,x{d-1}[,label]`` header.

    Floats are written with ``repr`` so a read_csv round trip is exact.
    ``truth`` is not stored.
    """
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        header = [f"x{i}" for i in range(points.dim)]
        if points.labels is not None:
            header.append("label")
        writer.writerow(header)
        for i in range(points.n):
            row = [repr(v) for v in points.coords[:, i]]
            if points.labels is not None:
                row.append(str(int(points.labels[i])))
            writer.writerow(row)


def read_csv(path) -> PointSet:
    """Read a point set written by :func:`write_csv`."""
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        if not header:
            raise CsvFormatError(f"{path}: empty header row")
        has_labels = header[-1].strip().lower() == "label"
        dim = len(header) - 1 if has_labels else len(header)
        if dim < 1:
            raise CsvFormatError(f"{path}: no coordinate columns")
        columns: list[list[float]] = []
        labels: list[int] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}"
                )
            try:
                columns.append([float(v) for v in row[:dim]])
                if has_labels:
                    labels.append(int(row[dim]))
            except ValueError as exc:
                raise CsvFormatError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
        if not columns:
            raise CsvFormatError(f"{path}: no data rows")
    coords = np.array(columns, dtype=np.float64).T
    return PointSet(coords, labels=np.array(labels) if has_labels else None)
