"""Benchmark harness: reconstruction-error tables, graph-parameter robustness
sweeps, and landmark-embedding classification, all seeded and emitted as CSV
with reproducibility metadata."""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import spearmanr

from . import __version__
from .datasets import PointSet, generate_fish_bowl, generate_swiss_roll, read_csv, read_idx
from .graph_embedding import (
    DisconnectedGraphError,
    build_graph,
    graph_from_distances,
    laplacian_eigenmaps,
    pairwise_bhattacharyya,
)
from .kernels import KernelSpec, cross_kernel, euclidean_distances
from .nystrom import oos_extend, reconstruction_error
from .sampling import (
    LandmarkSelection,
    Welsch,
    efficient_dpp_sample,
    kmeans,
    kmeanspp_seed,
    uniform_sample,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ResultTable",
    "bench_reconstruction",
    "bench_robustness",
    "bench_classification",
    "emit_plotdata",
    "embedding_quality_score",
    "read_table",
]

SAMPLERS = ("uniform", "kmeans-uniform", "kmeans++-seed", "kmeans++", "efficient-dpp")
GRAPH_SUFFIX = "+bhattacharyya"
DATASET_NAMES = ("swiss-roll", "fish-bowl", "blobs", "idx", "csv")


class ConfigError(Exception):
    """Carries every validation failure found in an experiment config."""

    def __init__(self, problems: list[str]):
        super().__init__("invalid config:\n" + "\n".join(f"  - {p}" for p in problems))
        self.problems = problems


@dataclass
class ExperimentConfig:
    dataset: dict
    samplers: list[str] = field(default_factory=lambda: list(SAMPLERS))
    k_values: list[int] = field(default_factory=lambda: [25, 50, 60, 70, 80, 90, 100])
    repetitions: int = 50
    sigma: float = 1.0
    m: int = 30
    graph_metrics: list[str] = field(default_factory=lambda: ["euclidean", "bhattacharyya"])
    graph_knn: list[int] = field(default_factory=lambda: [25, 60, 200, 500])
    l: int = 2
    seed: int = 0
    out: str | None = None
    workers: int = 1
    test_dataset: dict | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        problems = [f"unknown field {key!r}" for key in raw if key not in known]
        config = cls(**{k: v for k, v in raw.items() if k in known})
        problems += config.validate()
        if problems:
            raise ConfigError(problems)
        return config

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def validate(self) -> list[str]:
        problems: list[str] = []
        problems += _validate_dataset("dataset", self.dataset)
        if self.test_dataset is not None:
            problems += _validate_dataset("test_dataset", self.test_dataset)
        for name in self.samplers:
            if name.removesuffix(GRAPH_SUFFIX) not in SAMPLERS:
                problems.append(f"unknown sampler {name!r}")
            elif name.endswith(GRAPH_SUFFIX) and name.removesuffix(GRAPH_SUFFIX) != "efficient-dpp":
                problems.append(
                    f"{name!r}: the {GRAPH_SUFFIX} variant needs the covariance-estimating sampler"
                )
        if not self.samplers:
            problems.append("samplers must be nonempty")
        if not self.k_values or any(k < 1 for k in self.k_values):
            problems.append("k_values must be a nonempty list of positive counts")
        n = self.dataset.get("n") if isinstance(self.dataset, dict) else None
        if isinstance(n, int) and any(k > n for k in self.k_values):
            problems.append(f"k_values must not exceed dataset n = {n}")
        if self.repetitions < 1:
            problems.append("repetitions must be >= 1")
        if self.sigma <= 0:
            problems.append("sigma must be > 0")
        if self.m < 1:
            problems.append("m must be >= 1")
        for metric in self.graph_metrics:
            if metric not in ("euclidean", "bhattacharyya"):
                problems.append(f"unknown graph metric {metric!r}")
        if not self.graph_knn or any(g < 1 for g in self.graph_knn):
            problems.append("graph_knn must be a nonempty list of positive counts")
        if self.l < 1:
            problems.append("l must be >= 1")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        return problems

    def to_json(self) -> str:
        return json.dumps(
            {k: getattr(self, k) for k in self.__dataclass_fields__}, sort_keys=True
        )


def _validate_dataset(label: str, spec) -> list[str]:
    if not isinstance(spec, dict) or "name" not in spec:
        return [f"{label} must be a dict with a 'name' key"]
    name = spec["name"]
    if name not in DATASET_NAMES:
        return [f"{label}: unknown dataset {name!r}"]
    problems = []
    if name in ("swiss-roll", "fish-bowl", "blobs"):
        if not isinstance(spec.get("n"), int) or spec["n"] < 1:
            problems.append(f"{label}: synthetic dataset needs a positive integer 'n'")
    if name == "idx":
        for key in ("images", "labels"):
            if key not in spec:
                problems.append(f"{label}: idx dataset needs {key!r} path")
            elif not Path(spec[key]).exists():
                problems.append(f"{label}: file not found: {spec[key]}")
    if name == "csv":
        if "path" not in spec:
            problems.append(f"{label}: csv dataset needs 'path'")
        elif not Path(spec["path"]).exists():
            problems.append(f"{label}: file not found: {spec['path']}")
    return problems


def _generate_blobs(n: int, seed: int, separation: float = 10.0, dim: int = 3) -> PointSet:
    """Two labeled isotropic Gaussian blobs; a trivially separable sanity dataset."""
    rng = np.random.default_rng(seed)
    half = n // 2
    labels = np.concatenate([np.zeros(half, dtype=int), np.ones(n - half, dtype=int)])
    centers = np.zeros((dim, n))
    centers[0, half:] = separation
    coords = centers + rng.standard_normal((dim, n))
    return PointSet(coords, labels=labels)


@lru_cache(maxsize=8)
def _load_dataset_cached(spec_json: str, seed: int) -> PointSet:
    spec = json.loads(spec_json)
    name = spec["name"]
    if name == "swiss-roll":
        return generate_swiss_roll(spec["n"], noise=spec.get("noise", 0.0), seed=seed)
    if name == "fish-bowl":
        return generate_fish_bowl(spec["n"], seed=seed)
    if name == "blobs":
        return _generate_blobs(spec["n"], seed, separation=spec.get("separation", 10.0))
    if name == "idx":
        return read_idx(spec["images"], spec["labels"], limit=spec.get("limit"))
    if name == "csv":
        return read_csv(spec["path"])
    raise ValueError(f"unknown dataset {name!r}")


def load_dataset(spec: dict, seed: int) -> PointSet:
    return _load_dataset_cached(json.dumps(spec, sort_keys=True), seed)


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[tuple]
    metadata: dict = field(default_factory=dict)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for key in sorted(self.metadata):
                fh.write(f"# {key}: {self.metadata[key]}\n")
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_table(path) -> ResultTable:
    """Read back a ResultTable CSV, '#' metadata lines included."""
    metadata: dict = {}
    columns: list[str] | None = None
    rows: list[tuple] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                metadata[key.strip()] = value.strip()
            elif columns is None:
                columns = line.split(",")
            else:
                rows.append(tuple(_parse_cell(v) for v in line.split(",")))
    if columns is None:
        raise ValueError(f"{path}: no header row")
    return ResultTable(columns, rows, metadata)


def _parse_cell(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _metadata(config: ExperimentConfig, **extra) -> dict:
    meta = {"config": config.to_json(), "seed": config.seed, "version": __version__}
    meta.update(extra)
    return meta


def _trial_seed(config_seed: int, *parts: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([config_seed, *parts])


def run_sampler(name: str, X: PointSet, k: int, sigma: float, m: int, seed) -> LandmarkSelection:
    base = name.removesuffix(GRAPH_SUFFIX)
    if base == "uniform":
        return uniform_sample(X.n, k, seed)
    if base == "kmeans-uniform":
        return kmeans(X, k, init="uniform", seed=seed)
    if base == "kmeans++-seed":
        return kmeanspp_seed(X, k, seed)
    if base == "kmeans++":
        return kmeans(X, k, init="plusplus", seed=seed)
    if base == "efficient-dpp":
        return efficient_dpp_sample(X, k, m, f=Welsch(sigma), seed=seed)
    raise ValueError(f"unknown sampler {name!r}")


def _recon_trial(args) -> tuple[str, int, int, float, float]:
    spec_json, config_seed, sampler, sampler_idx, k, rep, sigma, m = args
    X = _load_dataset_cached(spec_json, config_seed)
    seed = _trial_seed(config_seed, sampler_idx, k, rep)
    start = time.perf_counter()
    selection = run_sampler(sampler, X, k, sigma, m, seed)
    error = reconstruction_error((X, KernelSpec(sigma=sigma)), selection.indices)
    elapsed_ms = (time.perf_counter() - start) * 1e3
    return sampler, k, rep, error, elapsed_ms


def bench_reconstruction(config: ExperimentConfig) -> ResultTable:
    """Mean/std Nystrom reconstruction error per (sampler, subset size)."""
    problems = config.validate()
    if problems:
        raise ConfigError(problems)
    spec_json = json.dumps(config.dataset, sort_keys=True)
    _load_dataset_cached(spec_json, config.seed)  # fail early on unreadable data
    trials = [
        (spec_json, config.seed, sampler, si, k, rep, config.sigma, config.m)
        for si, sampler in enumerate(config.samplers)
        for k in config.k_values
        for rep in range(config.repetitions)
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_recon_trial, trials, chunksize=8))
    else:
        outcomes = [_recon_trial(t) for t in trials]

    grouped: dict[tuple[str, int], list[tuple[float, float]]] = {}
    for sampler, k, _rep, error, elapsed in outcomes:
        grouped.setdefault((sampler, k), []).append((error, elapsed))
    dataset_name = config.dataset["name"]
    rows = []
    for sampler, k in sorted(grouped):
        errs = np.array([e for e, _ in grouped[(sampler, k)]])
        times = np.array([t for _, t in grouped[(sampler, k)]])
        rows.append(
            (dataset_name, sampler, k, float(errs.mean()), float(errs.std()),
             round(float(times.mean()), 3), config.seed)
        )
    return ResultTable(
        ["dataset", "sampler", "k", "mean", "std", "runtime_ms", "seed"],
        rows,
        _metadata(config),
    )


def embedding_quality_score(coords: np.ndarray, truth: np.ndarray) -> float:
    """Mean |Spearman rho| between embedding columns and truth rows, best pairing.

    ``coords`` is (k, 2) and ``truth`` (2, k).  Both assignments of embedding
    columns to truth parameters are tried and the better mean is returned.
    """
    rho = np.empty((2, 2))
    for a in range(2):
        for b in range(2):
            rho[a, b] = abs(spearmanr(coords[:, a], truth[b]).statistic)
    return float(max((rho[0, 0] + rho[1, 1]) / 2.0, (rho[0, 1] + rho[1, 0]) / 2.0))


def bench_robustness(config: ExperimentConfig) -> ResultTable:
    """Embedding quality across graph-kNN values for both neighborhood metrics.

    For each repetition one landmark set (with covariances) is drawn; each
    (metric, knn) pair then builds a graph from precomputed distances and is
    scored by :func:`embedding_quality_score` against the dataset truth.
    Disconnected graphs score 0 and are flagged, not fatal.
    """
    problems = config.validate()
    if config.l != 2:
        problems.append("robustness scoring needs l = 2")
    if problems:
        raise ConfigError(problems)
    X = load_dataset(config.dataset, config.seed)
    if X.truth is None or X.truth.shape[0] != 2:
        raise ConfigError(["robustness needs a dataset with 2-row truth parameters"])
    k = config.k_values[0]
    scores: dict[tuple[str, int], list[float]] = {}
    flags: dict[tuple[str, int], int] = {}
    for rep in range(config.repetitions):
        selection = efficient_dpp_sample(
            X, k, config.m, f=Welsch(config.sigma),
            seed=_trial_seed(config.seed, rep),
            estimate_covariances="bhattacharyya" in config.graph_metrics,
        )
        landmark_pts = X.coords[:, selection.indices]
        truth = X.truth[:, selection.indices]
        euclid = euclidean_distances(landmark_pts)
        dists = {"euclidean": euclid}
        if "bhattacharyya" in config.graph_metrics:
            dists["bhattacharyya"] = pairwise_bhattacharyya(landmark_pts, selection.covariances)
        for metric in config.graph_metrics:
            for knn in config.graph_knn:
                graph = graph_from_distances(euclid, dists[metric], config.sigma, knn=knn)
                key = (metric, knn)
                try:
                    embedding = laplacian_eigenmaps(graph, 2)
                    scores.setdefault(key, []).append(
                        embedding_quality_score(embedding.coords, truth)
                    )
                except DisconnectedGraphError:
                    scores.setdefault(key, []).append(0.0)
                    flags[key] = flags.get(key, 0) + 1
    rows = []
    for metric, knn in sorted(scores):
        vals = np.array(scores[(metric, knn)])
        rows.append(
            (metric, knn, float(vals.mean()), float(vals.std()), flags.get((metric, knn), 0))
        )
    return ResultTable(
        ["metric", "knn", "score_mean", "score_std", "disconnected"],
        rows,
        _metadata(config, note="desk-scale sweep; dataset size per config"),
    )


def _embed_and_classify(
    train: PointSet,
    test: PointSet,
    selection: LandmarkSelection,
    metric: str,
    config: ExperimentConfig,
) -> float:
    graph = build_graph(train, selection, config.sigma, metric=metric, knn=config.graph_knn[0])
    embedding = laplacian_eigenmaps(graph, config.l)
    landmark_pts = train.coords[:, selection.indices]
    landmark_kernel = cross_kernel(landmark_pts, landmark_pts, config.sigma)

    n_train = train.n
    train_coords = np.empty((n_train, config.l))
    train_coords[selection.indices] = embedding.coords
    rest = np.setdiff1d(np.arange(n_train), selection.indices)
    if rest.size:
        k_cross = cross_kernel(landmark_pts, train.coords[:, rest], config.sigma)
        train_coords[rest] = oos_extend(
            embedding.coords, embedding.eigenvalues, k_cross, landmark_kernel
        )
    k_cross_test = cross_kernel(landmark_pts, test.coords, config.sigma)
    test_coords = oos_extend(
        embedding.coords, embedding.eigenvalues, k_cross_test, landmark_kernel
    )
    predicted = _nearest_label(test_coords, train_coords, train.labels)
    return float(np.mean(predicted == test.labels))


def _nearest_label(queries: np.ndarray, refs: np.ndarray, labels: np.ndarray, tile: int = 256):
    out = np.empty(queries.shape[0], dtype=labels.dtype)
    for start in range(0, queries.shape[0], tile):
        block = queries[start : start + tile]
        out[start : start + tile] = labels[np.argmin(cdist(block, refs), axis=1)]
    return out


def bench_classification(config: ExperimentConfig) -> ResultTable:
    """1-nearest-neighbor accuracy in the landmark embedding, per sampler and k.

    Landmarks come from the training set; train and test points are embedded
    by the Nystrom extension and each test point takes the label of its
    nearest embedded training point.  Samplers may carry a
    "+bhattacharyya" suffix to switch the landmark-graph metric.
    """
    problems = config.validate()
    if config.test_dataset is None:
        problems.append("classification needs test_dataset")
    if problems:
        raise ConfigError(problems)
    train = load_dataset(config.dataset, config.seed)
    test = load_dataset(config.test_dataset, config.seed + 1)
    if train.labels is None or test.labels is None:
        raise ConfigError(["classification needs labeled train and test datasets"])

    rows = []
    dataset_name = config.dataset["name"]
    for si, sampler in enumerate(sorted(set(config.samplers))):
        base = sampler.removesuffix(GRAPH_SUFFIX)
        metric = "bhattacharyya" if sampler.endswith(GRAPH_SUFFIX) else "euclidean"
        base_idx = SAMPLERS.index(base)
        for k in config.k_values:
            accuracies = []
            start = time.perf_counter()
            for rep in range(config.repetitions):
                seed = _trial_seed(config.seed, base_idx, k, rep)
                if base == "efficient-dpp":
                    selection = efficient_dpp_sample(
                        train, k, config.m, f=Welsch(config.sigma), seed=seed,
                        estimate_covariances=(metric == "bhattacharyya"),
                        diagonal_covariances=True,
                    )
                else:
                    selection = run_sampler(base, train, k, config.sigma, config.m, seed)
                accuracies.append(_embed_and_classify(train, test, selection, metric, config))
            elapsed_ms = (time.perf_counter() - start) * 1e3 / config.repetitions
            acc = np.array(accuracies)
            rows.append(
                (dataset_name, sampler, k, float(acc.mean()), float(acc.std()),
                 round(elapsed_ms, 3), config.seed)
            )
    rows.sort(key=lambda r: (r[1], r[2]))
    return ResultTable(
        ["dataset", "sampler", "k", "mean", "std", "runtime_ms", "seed"],
        rows,
        _metadata(config),
    )


PLOT_KINDS = ("error-vs-k", "bars", "scatter")


def emit_plotdata(table: ResultTable, kind: str, out_prefix) -> list[Path]:
    """Write plot-ready CSV series for the given figure kind.

    error-vs-k: one (k, mean, std) series file per sampler.
    bars: one (label, mean, std) file.
    scatter: one (phi0, phi1, truth0, truth1) file from an embedding table.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
    if not table.rows:
        raise ValueError("empty result table")
    out_prefix = Path(out_prefix)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []

    def _require(*names: str) -> dict[str, int]:
        missing = [c for c in names if c not in table.columns]
        if missing:
            raise ValueError(f"table lacks columns {missing} needed by kind {kind!r}")
        return {c: table.columns.index(c) for c in names}

    if kind == "error-vs-k":
        idx = _require("sampler", "k", "mean", "std")
        by_sampler: dict[str, list[tuple]] = {}
        for row in table.rows:
            by_sampler.setdefault(row[idx["sampler"]], []).append(row)
        for sampler, rows in sorted(by_sampler.items()):
            path = out_prefix.with_name(f"{out_prefix.name}_{_slug(sampler)}.csv")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("k,mean,std\n")
                for row in sorted(rows, key=lambda r: r[idx["k"]]):
                    fh.write(f"{row[idx['k']]},{_cell(row[idx['mean']])},{_cell(row[idx['std']])}\n")
            paths.append(path)
    elif kind == "bars":
        idx = _require("sampler", "k", "mean", "std")
        path = out_prefix.with_name(f"{out_prefix.name}_bars.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("label,mean,std\n")
            for row in table.rows:
                label = f"{row[idx['sampler']]}@k={row[idx['k']]}"
                fh.write(f"{label},{_cell(row[idx['mean']])},{_cell(row[idx['std']])}\n")
        paths.append(path)
    else:  # scatter
        idx = _require("phi0", "phi1", "truth0", "truth1")
        path = out_prefix.with_name(f"{out_prefix.name}_scatter.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("phi0,phi1,truth0,truth1\n")
            for row in table.rows:
                fh.write(",".join(_cell(row[idx[c]]) for c in ("phi0", "phi1", "truth0", "truth1")) + "\n")
        paths.append(path)
    return paths


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "-" for c in name)
