"""Best rank-(r1, r2, r3) approximation by higher-order orthogonal iteration.

The approximation problem is posed as constrained maximization of the
objective ||A . (X, Y, Z)|| over matrices with orthonormal columns; the
core tensor of a solution (U, V, W) is F = A . (U, V, W) and the implied
best approximation is B = (U, V, W) . F.

The solver here is HOOI with deterministic truncated-HOSVD initialization
and optional seeded random restarts.  The solver interface only touches
the data through mode contractions against matrices with few columns, so
an implicit operator (see :mod:`tenspart.expansion`) can stand in for a
sparse tensor.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg

from .sparse_tensor import SparseTensor3, is_12_symmetric, symmetric_embed

__all__ = [
    "SolverConfig",
    "RankApproximation",
    "dominant_subspace",
    "hosvd_init",
    "hooi",
    "hooi_symmetric",
    "approx_nonsymmetric_via_embedding",
    "reconstruct",
    "save_approximation",
]

# unfoldings at most this many elements are handled by dense SVD
_DENSE_SVD_LIMIT = 200_000


@dataclass
class SolverConfig:
    """Iteration controls for the alternating solver."""

    max_iters: int = 200
    rel_tol: float = 1e-8
    seed: int = 0
    num_restarts: int = 1
    symmetric: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.num_restarts < 1:
            raise ValueError("num_restarts must be >= 1")


@dataclass
class RankApproximation:
    """Factors, core and convergence record of one approximation.

    U, V, W have orthonormal columns; core = A . (U, V, W); the objective
    history (||core|| per iteration) is nondecreasing.  For (1,2)-symmetric
    problems V is U.
    """

    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    core: np.ndarray
    objective_history: list[float] = field(default_factory=list)
    converged: bool = True
    rank_deficient: bool = False

    @property
    def ranks(self) -> tuple[int, int, int]:
        return (self.U.shape[1], self.V.shape[1], self.W.shape[1])

    @property
    def objective(self) -> float:
        return self.objective_history[-1] if self.objective_history else float("nan")


def _fix_column_signs(Q: np.ndarray) -> np.ndarray:
    """Make the largest-|entry| element of each column positive (ties: lowest index)."""
    Q = Q.copy()
    for c in range(Q.shape[1]):
        pivot = Q[np.argmax(np.abs(Q[:, c])), c]
        if pivot < 0:
            Q[:, c] = -Q[:, c]
    return Q


def dominant_subspace(M: np.ndarray, r: int, warn_deficient: bool = True) -> np.ndarray:
    """Orthonormal basis of the r leading left singular directions of M.

    Columns are ordered by singular value and sign-fixed so the
    largest-|entry| element in each column is positive.  When M has rank
    below r the trailing columns are an orthonormal complement supplied by
    the SVD; this is reported with a warning.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError("M must be a matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("M contains non-finite values")
    if not 1 <= r <= min(M.shape):
        raise ValueError(f"r={r} out of range for shape {M.shape}")
    U, s, _ = np.linalg.svd(M, full_matrices=True)
    cutoff = max(M.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    if warn_deficient and (s.size < r or s[r - 1] <= cutoff):
        warnings.warn(
            f"matrix has numerical rank below {r}; subspace padded with an "
            "orthonormal complement",
            RuntimeWarning,
            stacklevel=2,
        )
    return _fix_column_signs(U[:, :r])


def _dominant_subspace_sparse(M: sp.spmatrix, r: int) -> np.ndarray:
    """Leading left singular subspace of a large sparse unfolding.

    Uses the Gram matrix when the short side is small, which is accurate
    enough for an initial guess and avoids densifying the unfolding.
    """
    gram = np.asarray((M @ M.T).todense())
    w, V = np.linalg.eigh(gram)
    order = np.argsort(w)[::-1][:r]
    return _fix_column_signs(V[:, order])


def hosvd_init(T: SparseTensor3, ranks: tuple[int, int, int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Truncated-HOSVD starting factors: per-mode dominant unfolding subspaces."""
    for r, extent in zip(ranks, T.dims):
        if not 1 <= r <= extent:
            raise ValueError(f"rank {r} exceeds extent {extent}")
    factors = []
    for mode, r in zip((1, 2, 3), ranks):
        unfold = T.unfolding(mode)
        if unfold.shape[0] * unfold.shape[1] <= _DENSE_SVD_LIMIT:
            factors.append(dominant_subspace(unfold.toarray(), r, warn_deficient=False))
        else:
            factors.append(_dominant_subspace_sparse(unfold, r))
    return tuple(factors)


def _random_orthonormal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
    return Q


def _core_from_c12(C12: np.ndarray, W: np.ndarray) -> np.ndarray:
    """core[p, q, r] from the modes-(1,2) contraction C12[k, p, q]."""
    return np.einsum("kpq,kr->pqr", C12, W)


def _hooi_sweeps(T, U, V, W, ranks, cfg: SolverConfig):
    """Alternating HOOI updates from given starting factors."""
    r1, r2, r3 = ranks
    history: list[float] = []
    converged = False
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        for _ in range(cfg.max_iters):
            C = T.contract_modes23(V, W)  # (l, r2, r3)
            U = dominant_subspace(C.reshape(C.shape[0], -1), r1)
            C = T.contract_modes13(U, W)  # (m, r1, r3)
            V = dominant_subspace(C.reshape(C.shape[0], -1), r2)
            C12 = T.contract_modes12(U, V)  # (n, r1, r2)
            W = dominant_subspace(C12.reshape(C12.shape[0], -1), r3)
            core = _core_from_c12(C12, W)
            obj = math.sqrt(float(np.sum(core * core)))
            if history and abs(obj - history[-1]) <= cfg.rel_tol * max(obj, 1e-300):
                history.append(obj)
                converged = True
                break
            history.append(obj)
    deficient = any(issubclass(w.category, RuntimeWarning) for w in caught)
    return U, V, W, core, history, converged, deficient


def hooi(T, ranks: tuple[int, int, int], cfg: SolverConfig | None = None) -> RankApproximation:
    """Best rank-(r1, r2, r3) approximation by alternating subspace updates.

    Starts from the truncated HOSVD; with ``cfg.num_restarts > 1`` the
    solve is repeated from seeded random orthonormal factors and the run
    with the largest objective is returned.  Non-convergence is flagged on
    the result, not fatal.
    """
    cfg = cfg or SolverConfig()
    if isinstance(T, SparseTensor3) and T.nnz == 0:
        raise ValueError("cannot approximate an empty tensor")
    l, m, n = T.dims
    for r, extent in zip(ranks, (l, m, n)):
        if not 1 <= r <= extent:
            raise ValueError(f"rank {r} exceeds extent {extent}")

    rng = np.random.default_rng(cfg.seed)
    best: RankApproximation | None = None
    for restart in range(cfg.num_restarts):
        if restart == 0 and isinstance(T, SparseTensor3):
            U, V, W = hosvd_init(T, ranks)
        else:
            U = _random_orthonormal(rng, l, ranks[0])
            V = _random_orthonormal(rng, m, ranks[1])
            W = _random_orthonormal(rng, n, ranks[2])
        U, V, W, core, history, converged, deficient = _hooi_sweeps(T, U, V, W, ranks, cfg)
        cand = RankApproximation(U, V, W, core, history, converged, deficient)
        if best is None or cand.objective > best.objective:
            best = cand
    if not best.converged:
        warnings.warn("HOOI did not converge within max_iters", RuntimeWarning)
    return best


def hooi_symmetric(T, ranks: tuple[int, int, int], cfg: SolverConfig | None = None) -> RankApproximation:
    """Symmetric HOOI: one shared factor for modes 1 and 2.

    The shared factor is updated from the stacked mode-1/mode-2
    contractions.  The core of a converged run is (1,2)-symmetric.  For
    ranks (2, 2, 1) the rotational freedom of the shared factor is fixed
    deterministically from the eigendecomposition of the 2x2 core slice.
    """
    cfg = cfg or SolverConfig()
    l, m, n = T.dims
    if l != m:
        raise ValueError("symmetric solver needs equal mode-1/2 extents")
    if isinstance(T, SparseTensor3) and not is_12_symmetric(T, tol=1e-12):
        raise ValueError("tensor is not (1,2)-symmetric")
    r1, r2, r3 = ranks
    if r1 != r2:
        raise ValueError("symmetric solver needs r1 == r2")

    rng = np.random.default_rng(cfg.seed)
    best: RankApproximation | None = None
    for restart in range(cfg.num_restarts):
        if restart == 0 and isinstance(T, SparseTensor3):
            U, _, W = hosvd_init(T, ranks)
        elif restart == 0:
            # implicit operator: start from contractions against random probes
            U = _random_orthonormal(rng, l, r1)
            W = _random_orthonormal(rng, n, r3)
        else:
            U = _random_orthonormal(rng, l, r1)
            W = _random_orthonormal(rng, n, r3)

        history: list[float] = []
        converged = False
        deficient = False
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RuntimeWarning)
            for _ in range(cfg.max_iters):
                C1 = T.contract_modes23(U, W)  # (l, r, r3)
                C2 = T.contract_modes13(U, W)  # (l, r, r3)
                stacked = np.hstack(
                    (C1.reshape(l, -1), C2.reshape(l, -1))
                )
                U = dominant_subspace(stacked, r1)
                C12 = T.contract_modes12(U, U)  # (n, r, r)
                W = dominant_subspace(C12.reshape(n, -1), r3)
                core = _core_from_c12(C12, W)
                obj = math.sqrt(float(np.sum(core * core)))
                if history and abs(obj - history[-1]) <= cfg.rel_tol * max(obj, 1e-300):
                    history.append(obj)
                    converged = True
                    break
                history.append(obj)
            deficient = any(issubclass(w.category, RuntimeWarning) for w in caught)

        if ranks[:2] == (2, 2) and r3 == 1:
            G = 0.5 * (core[:, :, 0] + core[:, :, 0].T)
            evals, P = np.linalg.eigh(G)
            order = np.argsort(evals)[::-1]
            P = _fix_column_signs(P[:, order])
            evals = evals[order]
            if evals[0] * evals[1] < 0:
                mix = np.array([[1.0, -1.0], [1.0, 1.0]]) / math.sqrt(2.0)
                R = P @ mix.T
            else:
                R = P
            U = _fix_column_signs(U @ R)
            # fix the temporal sign, then recompute the core in the new basis
            if W[np.argmax(np.abs(W[:, 0])), 0] < 0:
                W = -W
            C12 = T.contract_modes12(U, U)
            core = _core_from_c12(C12, W)

        cand = RankApproximation(U, U, W, core, history, converged, deficient)
        if best is None or cand.objective > best.objective:
            best = cand
    if not best.converged:
        warnings.warn("symmetric HOOI did not converge within max_iters", RuntimeWarning)
    return best


def approx_nonsymmetric_via_embedding(
    T: SparseTensor3, ranks: tuple[int, int, int], cfg: SolverConfig | None = None
) -> RankApproximation:
    """Approximate a general tensor through its symmetric block embedding.

    Runs the symmetric solver on [[0, T], [T', 0]] with a stacked factor of
    r1 + r2 columns, splits it into top and bottom blocks, re-orthonormalizes
    each into U and V, and then polishes with alternating updates on T
    itself before computing W and the core directly from T.
    """
    cfg = cfg or SolverConfig()
    l, m, n = T.dims
    r1, r2, r3 = ranks
    emb = symmetric_embed(T)
    sym = hooi_symmetric(emb, (r1 + r2, r1 + r2, r3), cfg)

    top, bottom = sym.U[:l], sym.U[l:]
    U = dominant_subspace(top, r1, warn_deficient=False)
    V = dominant_subspace(bottom, r2, warn_deficient=False)
    C12 = T.contract_modes12(U, V)
    W = dominant_subspace(C12.reshape(n, -1), r3, warn_deficient=False)

    # polish to a stationary point of the direct problem
    U, V, W, core, history, converged, deficient = _hooi_sweeps(T, U, V, W, ranks, cfg)
    return RankApproximation(U, V, W, core, history, converged, deficient)


def reconstruct(approx: RankApproximation) -> np.ndarray:
    """Dense best-approximation tensor B = (U, V, W) . F."""
    return np.einsum("pqr,ip,jq,kr->ijk", approx.core, approx.U, approx.V, approx.W)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _write_matrix_csv(path, name: str, M: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([name, M.shape[0], M.shape[1]])
        for row in np.atleast_2d(M):
            writer.writerow([repr(float(x)) for x in row])


def save_approximation(approx: RankApproximation, outdir, prefix: str = "approx") -> dict:
    """Write factors and core as CSV plus a JSON run report; returns the report."""
    from pathlib import Path

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_matrix_csv(outdir / f"{prefix}_U.csv", "U", approx.U)
    _write_matrix_csv(outdir / f"{prefix}_V.csv", "V", approx.V)
    _write_matrix_csv(outdir / f"{prefix}_W.csv", "W", approx.W)
    r1, r2, r3 = approx.core.shape
    _write_matrix_csv(
        outdir / f"{prefix}_core.csv", f"core_{r1}x{r2}x{r3}", approx.core.reshape(r1, r2 * r3)
    )
    report = {
        "shapes": {
            "U": list(approx.U.shape),
            "V": list(approx.V.shape),
            "W": list(approx.W.shape),
            "core": list(approx.core.shape),
        },
        "objective_history": approx.objective_history,
        "converged": approx.converged,
        "rank_deficient": approx.rank_deficient,
    }
    with open(outdir / f"{prefix}_report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    return report
