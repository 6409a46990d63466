"""Reordering-based spectral-style partitioning of 3-tensors.

The workflow mirrors the matrix case: take the factor matrices of a best
low-rank approximation, reorder each mode so the second factor column
becomes monotone (nonincreasing), split at the sign change of that column,
and read off block norms and per-end label rankings from the reordered
tensor.  The third (temporal) mode is treated exactly like modes 1 and 2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lowrank import RankApproximation, SolverConfig, hooi, hooi_symmetric
from .preprocess import LabelTable
from .sparse_tensor import SparseTensor3, frobenius_norm, permute_mode, subtensor

__all__ = [
    "PartitionReport",
    "monotone_reorder",
    "sign_change_split",
    "block_norms",
    "corner_block_norms",
    "significance_ranking",
    "partition_tensor",
    "restrict_and_recurse",
    "save_partition_report",
]


@dataclass
class PartitionReport:
    """Everything the reordering workflow produces for one tensor."""

    mode1_perm: np.ndarray
    mode2_perm: np.ndarray
    mode3_perm: np.ndarray
    split_points: dict[int, int]
    no_split_flags: dict[int, bool]
    total_norm: float
    block_norm_table: np.ndarray | None = None
    block_boundaries: tuple[list[int], list[int]] | None = None
    top_terms: dict[str, list[tuple[str, float]]] | None = None
    insignificance_scores: np.ndarray | None = None
    symmetric: bool = False

    def to_dict(self) -> dict:
        d = {
            "mode1_perm": self.mode1_perm.tolist(),
            "mode2_perm": self.mode2_perm.tolist(),
            "mode3_perm": self.mode3_perm.tolist(),
            "split_points": {str(k): v for k, v in self.split_points.items()},
            "no_split_flags": {str(k): v for k, v in self.no_split_flags.items()},
            "total_norm": self.total_norm,
            "symmetric": self.symmetric,
        }
        if self.block_norm_table is not None:
            d["block_norm_table"] = self.block_norm_table.tolist()
            d["block_boundaries"] = [list(b) for b in self.block_boundaries]
            total_sq = self.total_norm**2
            d["block_mass_fractions"] = (
                (self.block_norm_table**2 / total_sq).tolist() if total_sq > 0 else None
            )
        if self.top_terms is not None:
            d["top_terms"] = self.top_terms
        if self.insignificance_scores is not None:
            d["insignificance_scores"] = self.insignificance_scores.tolist()
        return d


def monotone_reorder(U: np.ndarray, nonincreasing: bool = True):
    """Permutation sorting the second factor column monotonically.

    Returns (perm, u1_reordered, u2_reordered) where ``perm`` is in gather
    convention (``u2[perm]`` is sorted).  The sort is stable, so ties keep
    their original relative order.
    """
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[1] < 2:
        raise ValueError("need a factor matrix with at least two columns")
    key = -U[:, 1] if nonincreasing else U[:, 1]
    perm = np.argsort(key, kind="stable")
    return perm, U[perm, 0], U[perm, 1]


def sign_change_split(u2_reordered: np.ndarray, nonincreasing: bool = True):
    """Index of the sign change in a monotone second-column vector.

    Returns (split, no_split_flag): the smallest s with u2[s-1] >= 0 > u2[s]
    under the nonincreasing convention.  Without a sign change the split is
    0 or the extent and the flag is set.
    """
    u2 = np.asarray(u2_reordered, dtype=float)
    change = np.flatnonzero(u2 < 0) if nonincreasing else np.flatnonzero(u2 >= 0)
    if change.size == 0:
        return len(u2), True
    s = int(change[0])
    return (s, False) if s > 0 else (0, True)


def block_norms(
    T: SparseTensor3,
    bounds1: list[int],
    bounds2: list[int],
) -> np.ndarray:
    """Frobenius norms of the blocks T[I_a, J_b, :] defined by boundary cuts.

    ``bounds1``/``bounds2`` are increasing cut positions including 0 and
    the extent; block (a, b) covers rows [bounds1[a], bounds1[a+1]) and
    columns [bounds2[b], bounds2[b+1]).  Over a full partition the squared
    norms sum to ||T||^2.
    """
    l, m, _ = T.dims
    for bounds, extent in ((bounds1, l), (bounds2, m)):
        if bounds[0] != 0 or bounds[-1] != extent or any(
            b >= c for b, c in zip(bounds, bounds[1:])
        ):
            raise ValueError(f"invalid block boundaries {bounds} for extent {extent}")
    table = np.zeros((len(bounds1) - 1, len(bounds2) - 1))
    K = np.arange(T.dims[2])
    for a in range(table.shape[0]):
        I = np.arange(bounds1[a], bounds1[a + 1])
        for b in range(table.shape[1]):
            J = np.arange(bounds2[b], bounds2[b + 1])
            table[a, b] = frobenius_norm(subtensor(T, I, J, K))
    return table


def corner_block_norms(T: SparseTensor3, width: int):
    """3x3 corner-block table: outermost blocks are ``width`` indices wide."""
    l, m, _ = T.dims
    if not 0 < width < min(l, m) / 2:
        raise ValueError(f"corner width {width} invalid for dims {T.dims}")
    b1 = [0, width, l - width, l]
    b2 = [0, width, m - width, m]
    return block_norms(T, b1, b2), (b1, b2)


def significance_ranking(
    u1: np.ndarray, u2: np.ndarray, labels: LabelTable, k: int
) -> dict[str, list[tuple[str, float]]]:
    """Top-k labels at each end of the reordered mode plus a middle sample.

    Expects already-reordered u1/u2 and labels permuted the same way.  The
    middle sample is centered at the sign-change split of u2.  Scores are
    the |u1| magnitudes (small values mark insignificant indices).
    """
    extent = len(u1)
    if k > extent:
        raise ValueError(f"k={k} exceeds extent {extent}")
    if len(labels) != extent:
        raise ValueError("labels length must equal the mode extent")
    split, _ = sign_change_split(u2)
    mid_lo = max(0, min(extent - k, split - k // 2))
    score = np.abs(np.asarray(u1, dtype=float))

    def take(idx):
        return [(labels[int(t)], float(score[int(t)])) for t in idx]

    return {
        "head": take(range(k)),
        "middle": take(range(mid_lo, mid_lo + k)),
        "tail": take(range(extent - k, extent)),
    }


def partition_tensor(
    T: SparseTensor3,
    approx: RankApproximation,
    labels: LabelTable | None = None,
    corner_width: int | None = None,
    top_k: int = 25,
    insignificance_factor: float = 1e-2,
):
    """Reorder the tensor by the approximation factors and report the splits.

    Returns (report, reordered tensor).  In the symmetric case (V is U) one
    permutation is used for modes 1 and 2.  ``corner_width`` defaults to
    10% of the smaller mode-1/2 extent.
    """
    l, m, n = T.dims
    if approx.U.shape[0] != l or approx.V.shape[0] != m or approx.W.shape[0] != n:
        raise ValueError("approximation factors do not match tensor dims")
    symmetric = approx.V is approx.U

    p1, u1, u2 = monotone_reorder(approx.U)
    if symmetric:
        p2, v1, v2 = p1, u1, u2
    else:
        p2, v1, v2 = monotone_reorder(approx.V)
    if approx.W.shape[1] >= 2:
        p3, w1, w2 = monotone_reorder(approx.W)
        s3, f3 = sign_change_split(w2)
    else:
        p3 = np.argsort(-approx.W[:, 0], kind="stable")
        s3, f3 = len(p3), True

    s1, f1 = sign_change_split(u2)
    s2, f2 = (s1, f1) if symmetric else sign_change_split(v2)

    reordered = permute_mode(T, p1, 1)
    reordered = permute_mode(reordered, p2, 2)
    reordered = permute_mode(reordered, p3, 3)

    if corner_width is None:
        corner_width = max(1, min(l, m) // 10)
    table = boundaries = None
    if corner_width < min(l, m) / 2:
        table, boundaries = corner_block_norms(reordered, corner_width)

    top_terms = None
    if labels is not None:
        reord_labels = LabelTable(tuple(labels[int(t)] for t in p1))
        top_terms = significance_ranking(u1, u2, reord_labels, min(top_k, l))

    score = np.abs(approx.U[:, 0])
    report = PartitionReport(
        mode1_perm=p1,
        mode2_perm=p2,
        mode3_perm=p3,
        split_points={1: s1, 2: s2, 3: s3},
        no_split_flags={1: f1, 2: f2, 3: f3},
        total_norm=frobenius_norm(T),
        block_norm_table=table,
        block_boundaries=boundaries,
        top_terms=top_terms,
        insignificance_scores=score,
        symmetric=symmetric,
    )
    return report, reordered


def restrict_and_recurse(
    T: SparseTensor3,
    I,
    J,
    K,
    ranks: tuple[int, int, int],
    cfg: SolverConfig | None = None,
    labels: LabelTable | None = None,
    symmetric: bool = False,
    **partition_kwargs,
):
    """Re-run the approximation and partition on the subtensor T[I, J, K].

    Labels, when given, are carried through to the restricted mode-1 index
    set.  Raises when the restriction has no support.
    """
    sub = subtensor(T, I, J, K)
    if sub.nnz == 0:
        raise ValueError("restricted subtensor has no support")
    approx = hooi_symmetric(sub, ranks, cfg) if symmetric else hooi(sub, ranks, cfg)
    sub_labels = None
    if labels is not None:
        sub_labels = LabelTable(tuple(labels[int(t)] for t in np.asarray(I, dtype=int)))
    return partition_tensor(sub, approx, labels=sub_labels, **partition_kwargs)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _format_top_terms(top_terms: dict[str, list[tuple[str, float]]]) -> str:
    cols = ["head", "middle", "tail"]
    rows = max(len(top_terms[c]) for c in cols)
    lines = [f"{'beginning':<28}{'middle':<28}{'end':<28}"]
    lines.append("-" * 84)
    for r in range(rows):
        cells = []
        for c in cols:
            cells.append(top_terms[c][r][0] if r < len(top_terms[c]) else "")
        lines.append("".join(f"{cell:<28}" for cell in cells))
    return "\n".join(lines)


def save_partition_report(report: PartitionReport, outdir, prefix: str = "partition") -> None:
    """Write JSON report, per-mode permutation files and plain-text tables."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / f"{prefix}_report.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    for mode, perm in ((1, report.mode1_perm), (2, report.mode2_perm), (3, report.mode3_perm)):
        np.savetxt(outdir / f"{prefix}_perm_mode{mode}.txt", perm, fmt="%d")
    lines = [f"total norm: {report.total_norm:.6g}"]
    for mode in (1, 2, 3):
        flag = " (no sign change)" if report.no_split_flags[mode] else ""
        lines.append(f"mode {mode} split at {report.split_points[mode]}{flag}")
    if report.block_norm_table is not None:
        lines.append("")
        lines.append("block norms (rows: mode-1 blocks, cols: mode-2 blocks):")
        for row in report.block_norm_table:
            lines.append("  " + "  ".join(f"{x:10.4g}" for x in row))
    if report.top_terms is not None:
        lines.append("")
        lines.append(_format_top_terms(report.top_terms))
    (outdir / f"{prefix}_tables.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
