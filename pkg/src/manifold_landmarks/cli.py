"""Command-line interface.

Subcommands: generate, sample, embed, bench-recon, bench-robust,
bench-classify, plotdata.  Benchmarks take a JSON config file; --seed and
--out override the config.  Exit code 0 on success, 2 on any stage-labeled
failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .bench import (
    ConfigError,
    ExperimentConfig,
    ResultTable,
    bench_classification,
    bench_reconstruction,
    bench_robustness,
    emit_plotdata,
    read_table,
    run_sampler,
)
from .datasets import generate_fish_bowl, generate_swiss_roll, read_csv, write_csv, PointSet
from .graph_embedding import PipelineError, pipeline
from .sampling import efficient_dpp_sample, Welsch


def _add_generate(subparsers) -> None:
    p = subparsers.add_parser("generate", help="write a synthetic dataset as CSV")
    p.add_argument("--dataset", required=True, choices=["swiss-roll", "fish-bowl"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out", help="also write the generative parameters as CSV")


def _add_sample(subparsers) -> None:
    p = subparsers.add_parser("sample", help="select landmarks from a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--sampler", default="efficient-dpp")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--m", type=int, default=30)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV of selected indices")
    p.add_argument("--cov-out", help="CSV of per-landmark covariances (efficient-dpp only)")
    p.add_argument("--diag-cov", action="store_true", help="store covariance diagonals only")


def _add_embed(subparsers) -> None:
    p = subparsers.add_parser("embed", help="landmark embedding plus extension to all points")
    p.add_argument("--data", required=True)
    p.add_argument("--truth", help="CSV of generative parameters to append for plotting")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--m", type=int, default=30)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--l", type=int, default=2)
    p.add_argument("--metric", default="euclidean", choices=["euclidean", "bhattacharyya"])
    p.add_argument("--graph-knn", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)


def _add_bench(subparsers, name: str, help_text: str) -> None:
    p = subparsers.add_parser(name, help=help_text)
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="override the config output path")


def _add_plotdata(subparsers) -> None:
    p = subparsers.add_parser("plotdata", help="emit plot-ready series from a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--kind", required=True)
    p.add_argument("--out-prefix", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="manifold-landmarks")
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="command", required=True)
    _add_generate(subparsers)
    _add_sample(subparsers)
    _add_embed(subparsers)
    _add_bench(subparsers, "bench-recon", "reconstruction-error table")
    _add_bench(subparsers, "bench-robust", "graph-parameter robustness sweep")
    _add_bench(subparsers, "bench-classify", "landmark-embedding classification")
    _add_plotdata(subparsers)
    return parser


def _cmd_generate(args) -> int:
    if args.dataset == "swiss-roll":
        points = generate_swiss_roll(args.n, noise=args.noise, seed=args.seed)
    else:
        points = generate_fish_bowl(args.n, seed=args.seed)
    write_csv(points, args.out)
    if args.truth_out:
        write_csv(PointSet(points.truth), args.truth_out)
    print(f"wrote {points.n} points (d={points.dim}) to {args.out}")
    return 0


def _cmd_sample(args) -> int:
    data = read_csv(args.data)
    if args.cov_out:
        selection = efficient_dpp_sample(
            data, args.k, args.m, f=Welsch(args.sigma), seed=args.seed,
            estimate_covariances=True, diagonal_covariances=args.diag_cov,
        )
    else:
        selection = run_sampler(args.sampler, data, args.k, args.sigma, args.m, args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(f"# sampler: {args.sampler}\n# seed: {args.seed}\n# version: {__version__}\n")
        fh.write("index\n")
        for i in selection.indices:
            fh.write(f"{int(i)}\n")
    if args.cov_out:
        covs = selection.covariances
        with open(args.cov_out, "w", encoding="utf-8") as fh:
            width = covs[0].size
            fh.write("index," + ",".join(f"c{i}" for i in range(width)) + "\n")
            for idx, cov in zip(selection.indices, covs):
                fh.write(f"{int(idx)}," + ",".join(repr(v) for v in cov.ravel()) + "\n")
    print(f"selected {selection.k} landmarks from {data.n} points")
    return 0


def _cmd_embed(args) -> int:
    data = read_csv(args.data)
    if args.truth:
        truth = read_csv(args.truth)
        data = PointSet(data.coords, labels=data.labels, truth=truth.coords)
    result = pipeline(
        data, args.k, args.m, args.sigma, args.l, seed=args.seed,
        metric=args.metric, knn=args.graph_knn,
    )
    columns = [f"phi{i}" for i in range(args.l)]
    rows = [tuple(row) for row in result.all_coords]
    if data.truth is not None:
        columns += [f"truth{i}" for i in range(data.truth.shape[0])]
        rows = [r + tuple(data.truth[:, i]) for i, r in enumerate(rows)]
    is_landmark = np.zeros(data.n, dtype=int)
    is_landmark[result.selection.indices] = 1
    columns.append("is_landmark")
    rows = [r + (int(is_landmark[i]),) for i, r in enumerate(rows)]
    table = ResultTable(columns, rows, {"seed": args.seed, "version": __version__})
    table.write_csv(args.out)
    print(
        f"embedded {data.n} points with {result.selection.k} landmarks; "
        f"eigenvalues: {np.array2string(result.landmark_embedding.eigenvalues, precision=6)}"
    )
    return 0


def _cmd_bench(args, runner) -> int:
    config = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.out = args.out
    table = runner(config)
    if config.out:
        table.write_csv(config.out)
        print(f"wrote {len(table.rows)} result rows to {config.out}")
    else:
        print(",".join(table.columns))
        for row in table.rows:
            print(",".join(str(v) for v in row))
    return 0


def _cmd_plotdata(args) -> int:
    table = read_table(args.results)
    paths = emit_plotdata(table, args.kind, args.out_prefix)
    for path in paths:
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "sample":
            return _cmd_sample(args)
        if args.command == "embed":
            return _cmd_embed(args)
        if args.command == "bench-recon":
            return _cmd_bench(args, bench_reconstruction)
        if args.command == "bench-robust":
            return _cmd_bench(args, bench_robustness)
        if args.command == "bench-classify":
            return _cmd_bench(args, bench_classification)
        if args.command == "plotdata":
            return _cmd_plotdata(args)
        raise AssertionError(f"unhandled command {args.command}")
    except PipelineError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
