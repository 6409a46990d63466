"""Command-line driver: ingest, normalize, approx, partition, expand.

Every run writes its reports into ``--out DIR`` together with the full
effective configuration and sha256 checksums of the input files, so that
identical configs on identical inputs reproduce identical reports.

Exit codes: 0 success, 2 validation error, 3 solver non-convergence
(results are still written), 4 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import expansion, lowrank, partition, preprocess
from .preprocess import TensorFileError
from .sparse_tensor import SparseTensor3, is_12_symmetric

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NONCONVERGED = 3
EXIT_IO = 4


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_run_config(args: argparse.Namespace, outdir: Path, inputs: list[str]) -> None:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    for key, val in cfg.items():
        if isinstance(val, Path):
            cfg[key] = str(val)
    cfg["input_checksums"] = {p: _sha256(p) for p in inputs if Path(p).is_file()}
    with open(outdir / "run_config.json", "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, indent=2, default=str)


def _load_tensor(args) -> SparseTensor3:
    T = preprocess.load_coordinate_file(args.input)
    if args.normalize == "adjacency":
        T = preprocess.normalize_slices_adjacency(T)
    elif args.normalize == "frobenius":
        T = preprocess.normalize_slices_frobenius(T, skip_empty=True)
    return T


def _solver_config(args) -> lowrank.SolverConfig:
    return lowrank.SolverConfig(
        max_iters=args.max_iter,
        rel_tol=args.tol,
        seed=args.seed,
        num_restarts=args.restarts,
    )


def _load_labels(args, extent: int):
    if args.labels is None:
        return None
    return preprocess.load_labels(args.labels, extent)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.format == "tns":
        T = preprocess.load_coordinate_file(args.input)
        labels = None
    else:
        log = preprocess.load_record_log(args.input)
        T, labels = preprocess.bin_and_symmetrize(
            log, args.bin_size, restrict_bidirectional=args.bidirectional_only
        )
    preprocess.save_coordinate_file(T, outdir / "tensor.tns")
    if labels is not None:
        preprocess.save_labels(labels, outdir / "labels.txt")
    _write_run_config(args, outdir, [str(args.input)])
    print(f"dims {T.dims[0]} {T.dims[1]} {T.dims[2]}  nnz {T.nnz}")
    return EXIT_OK


def cmd_normalize(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    T = preprocess.load_coordinate_file(args.input)
    if args.normalize == "adjacency":
        T = preprocess.normalize_slices_adjacency(T)
    elif args.normalize == "frobenius":
        T = preprocess.normalize_slices_frobenius(T, skip_empty=True)
    elif args.normalize == "nonsymmetric":
        T = preprocess.nonsymmetric_normalize(T)
    else:
        raise ValueError(f"nothing to do for --normalize {args.normalize}")
    preprocess.save_coordinate_file(T, outdir / "tensor.tns")
    _write_run_config(args, outdir, [str(args.input)])
    print(f"normalized ({args.normalize})  dims {T.dims}  nnz {T.nnz}")
    return EXIT_OK


def _run_approx(args, T: SparseTensor3):
    cfg = _solver_config(args)
    ranks = tuple(args.rank)
    if args.symmetric:
        if not is_12_symmetric(T, tol=1e-12):
            raise ValueError("--symmetric given but the tensor is not (1,2)-symmetric")
        return lowrank.hooi_symmetric(T, ranks, cfg)
    return lowrank.hooi(T, ranks, cfg)


def cmd_approx(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    T = _load_tensor(args)
    approx = _run_approx(args, T)
    lowrank.save_approximation(approx, outdir)
    _write_run_config(args, outdir, [str(args.input)])
    print(f"objective {approx.objective:.6g}  iterations {len(approx.objective_history)}")
    return EXIT_OK if approx.converged else EXIT_NONCONVERGED


def cmd_partition(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    T = _load_tensor(args)
    labels = _load_labels(args, T.dims[0])
    approx = _run_approx(args, T)
    report, _ = partition.partition_tensor(
        T, approx, labels=labels, corner_width=args.corner_width
    )
    if args.recurse is not None:
        index_sets = json.loads(Path(args.recurse).read_text(encoding="utf-8"))
        nested, _ = partition.restrict_and_recurse(
            T,
            index_sets["I"],
            index_sets["J"],
            index_sets.get("K", list(range(T.dims[2]))),
            tuple(args.rank),
            _solver_config(args),
            labels=labels,
            symmetric=args.symmetric,
            corner_width=args.corner_width,
        )
        partition.save_partition_report(nested, outdir, prefix="partition_nested")
    partition.save_partition_report(report, outdir)
    _write_run_config(args, outdir, [str(args.input)])
    print(f"splits {report.split_points}  total norm {report.total_norm:.6g}")
    return EXIT_OK if approx.converged else EXIT_NONCONVERGED


def cmd_expand(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    T = _load_tensor(args)
    if not is_12_symmetric(T, tol=1e-12):
        raise ValueError("expansion needs a (1,2)-symmetric tensor")
    labels = _load_labels(args, T.dims[0])
    terms, residual_norms = expansion.expand(
        T,
        q=args.terms,
        theta=args.theta,
        mode=args.threshold_mode,
        cfg=_solver_config(args),
    )
    expansion.save_expansion_report(terms, residual_norms, outdir, labels=labels)
    _write_run_config(args, outdir, [str(args.input)])
    for v, term in enumerate(terms, start=1):
        l1, l2 = term.eigenvalues
        print(
            f"term {v}: ||B_hat|| {term.norm_B_hat:.4g}  ||F|| {term.norm_F:.4g}  "
            f"eig {l1:.4g}/{l2:.4g}  structured {term.structured}"
        )
    print(f"final residual norm {residual_norms[-1]:.6g}")
    if any(t.B_hat.nnz == 0 for t in terms):
        print("warning: at least one term has an empty B_hat", file=sys.stderr)
    return EXIT_OK if all(t.converged for t in terms) else EXIT_NONCONVERGED


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rank", nargs=3, type=int, default=[2, 2, 2], metavar=("R1", "R2", "R3"))
    p.add_argument("--symmetric", action="store_true", help="use the shared-factor solver")
    p.add_argument("--normalize", choices=["adjacency", "frobenius", "none"], default="none")
    p.add_argument("--tol", type=float, default=1e-8, help="relative objective tolerance")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--labels", type=Path, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tenspart",
        description="Sparse 3-tensor partitioning and rank-(2,2,1) expansion toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert inputs to canonical .tns form")
    p.add_argument("input", type=Path)
    p.add_argument("--format", choices=["tns", "log-csv"], required=True)
    p.add_argument("--bin-size", type=int, default=1)
    p.add_argument("--bidirectional-only", action="store_true")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("normalize", help="slice normalization")
    p.add_argument("input", type=Path)
    p.add_argument(
        "--normalize",
        choices=["adjacency", "frobenius", "nonsymmetric"],
        required=True,
    )
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("approx", help="best rank-(r1,r2,r3) approximation")
    p.add_argument("input", type=Path)
    _add_solver_args(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("partition", help="reorder, split and report block norms")
    p.add_argument("input", type=Path)
    _add_solver_args(p)
    p.add_argument("--corner-width", type=int, default=None)
    p.add_argument(
        "--recurse",
        type=Path,
        default=None,
        help="JSON file with index sets I, J (and optional K) for a nested run",
    )
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("expand", help="rank-(2,2,1) expansion of a symmetric tensor")
    p.add_argument("input", type=Path)
    _add_solver_args(p)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument(
        "--threshold-mode", choices=["positive", "absolute"], default="positive"
    )
    p.add_argument("--terms", type=int, required=True, metavar="Q")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_expand)

    return parser


def _apply_thread_cap() -> None:
    """Honor TENSPART_THREADS by capping the BLAS thread pools when possible."""
    cap = os.environ.get("TENSPART_THREADS")
    if not cap:
        return
    try:
        n = int(cap)
    except ValueError:
        raise ValueError(f"TENSPART_THREADS must be an integer, got {cap!r}")
    if n < 1:
        raise ValueError("TENSPART_THREADS must be >= 1")
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=n)
    except ImportError:
        # best effort: only affects libraries loaded after this point
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(n))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_thread_cap()
        return args.func(args)
    except TensorFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
