import json
import math

import numpy as np
import pytest
import scipy.sparse as sp

from tenspart import (
    DeflatedOperator,
    LabelTable,
    SolverConfig,
    SparseTensor3,
    deflate,
    expand,
    form_B,
    frobenius_norm,
    overlap_cosines,
    rank221_term,
    subgraph_export,
    symmetric_embed,
    threshold_B,
)
from tenspart.expansion import save_expansion_report

from conftest import planted_bipartite, random_symmetric

TIGHT = SolverConfig(rel_tol=1e-12, max_iters=500)


def planted_two_terms(seed=0):
    """Sum of two disjoint bipartite-block terms with distinct temporal profiles."""
    rng = np.random.default_rng(seed)
    l, n = 20, 6
    u1 = np.zeros(l)
    v1 = np.zeros(l)
    u1[0:4] = rng.random(4) + 0.5
    v1[4:8] = rng.random(4) + 0.5
    u2 = np.zeros(l)
    v2 = np.zeros(l)
    u2[10:13] = rng.random(3) + 0.5
    v2[13:17] = rng.random(4) + 0.5
    for x in (u1, v1, u2, v2):
        x /= np.linalg.norm(x)
    w1 = np.zeros(n)
    w1[:3] = [1.0, 0.8, 0.6]
    w2 = np.zeros(n)
    w2[3:] = [0.9, 0.7, 0.5]
    A1 = np.outer(u1, v1)
    A1 = A1 + A1.T
    A2 = np.outer(u2, v2)
    A2 = A2 + A2.T
    d = 8.0 * A1[:, :, None] * w1[None, None, :] + 5.0 * A2[:, :, None] * w2[None, None, :]
    return SparseTensor3.from_dense(d), (A1, w1, 8.0), (A2, w2, 5.0)


class TestFormB:
    def test_norm_equals_core_norm(self, rng):
        T = random_symmetric(rng, 8, 3, density=0.5)
        ap = rank221_term(T, TIGHT)
        B = form_B(ap.U, ap.core)
        G = ap.core[:, :, 0]
        assert np.linalg.norm(B) == pytest.approx(np.linalg.norm(G), rel=1e-12)

    def test_symmetric_and_rank_two(self, rng):
        T = random_symmetric(rng, 8, 3, density=0.5)
        ap = rank221_term(T, TIGHT)
        B = form_B(ap.U, ap.core)
        assert np.abs(B - B.T).max() <= 1e-12
        assert np.linalg.matrix_rank(B, tol=1e-10) <= 2

    def test_eigen_structure_matches_core(self, rng):
        T = random_symmetric(rng, 8, 3, density=0.5)
        ap = rank221_term(T, TIGHT)
        B = form_B(ap.U, ap.core)
        G = 0.5 * (ap.core[:, :, 0] + ap.core[:, :, 0].T)
        ev = np.linalg.eigvalsh(B)
        nonzero = np.sort(ev[np.argsort(-np.abs(ev))[:2]])
        assert np.allclose(nonzero, np.sort(np.linalg.eigvalsh(G)), atol=1e-10)

    def test_bad_shapes_rejected(self):
        with pytest.raises(ValueError):
            form_B(np.ones((4, 3)), np.eye(2))
        with pytest.raises(ValueError):
            form_B(np.ones((4, 2)), np.eye(3))


class TestBipartitePlantedTerm:
    """A single bipartite block must come back exactly, with the expected core."""

    def test_exact_core_and_vectors(self):
        tau = 2.0
        w = np.array([3.0, 4.0]) / 5.0
        T, u, v, w = planted_bipartite(4, 5, 2, tau=tau, w=w, seed=11)
        ap = rank221_term(T, TIGHT)
        G = ap.core[:, :, 0]
        # canonical core is anti-diagonal with value tau
        assert abs(G[0, 0]) <= 1e-10 and abs(G[1, 1]) <= 1e-10
        assert abs(abs(G[0, 1]) - tau) <= 1e-10
        assert abs(abs(ap.W[:, 0] @ w) - 1.0) <= 1e-10

    def test_structure_flag_from_expand(self):
        w = np.array([3.0, 4.0]) / 5.0
        T, _, _, _ = planted_bipartite(4, 5, 2, tau=2.0, w=w, seed=11)
        terms, _ = expand(T, 1, theta=0.0, mode="absolute", cfg=TIGHT)
        t = terms[0]
        assert t.structured
        l1, l2 = t.eigenvalues
        assert l1 * l2 < 0
        assert t.lambda_sum_ratio <= 0.05

    def test_unstructured_positive_blocks(self):
        # two same-sign diagonal blocks: eigenvalues both positive
        d = np.zeros((8, 8, 2))
        d[0:4, 0:4, :] = 1.0
        d[4:8, 4:8, :] = 0.7
        T = SparseTensor3.from_dense(d)
        terms, _ = expand(T, 1, theta=0.0, mode="absolute", cfg=TIGHT)
        l1, l2 = terms[0].eigenvalues
        assert l1 > 0 and l2 > 0
        assert not terms[0].structured


class TestThresholdB:
    def test_positive_mode_oracle(self, rng):
        B = rng.standard_normal((7, 7))
        B = B + B.T
        theta = 0.3
        Bh = threshold_B(B, theta, "positive").toarray()
        expect = np.where(B > theta * B.max(), B, 0.0)
        assert np.array_equal(Bh, expect)

    def test_absolute_mode_oracle(self, rng):
        B = rng.standard_normal((7, 7))
        B = B + B.T
        theta = 0.4
        Bh = threshold_B(B, theta, "absolute").toarray()
        expect = np.where(np.abs(B) > theta * np.abs(B).max(), B, 0.0)
        assert np.array_equal(Bh, expect)

    def test_theta_zero_absolute_keeps_all(self, rng):
        B = rng.standard_normal((6, 6))
        B = B + B.T
        Bh = threshold_B(B, 0.0, "absolute")
        assert Bh.nnz == np.count_nonzero(B)

    def test_nnz_monotone_in_theta(self, rng):
        B = np.abs(rng.standard_normal((10, 10)))
        B = B + B.T
        sizes = [threshold_B(B, th, "positive").nnz for th in (0.0, 0.2, 0.5, 0.9)]
        assert sizes == sorted(sizes, reverse=True)

    def test_result_symmetric(self, rng):
        B = rng.standard_normal((9, 9))
        B = B + B.T
        Bh = threshold_B(B, 0.25, "absolute")
        assert (Bh != Bh.T).nnz == 0

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            threshold_B(np.eye(2), 1.0)
        with pytest.raises(ValueError):
            threshold_B(np.eye(2), -0.1)
        with pytest.raises(ValueError):
            threshold_B(np.eye(2), 0.5, "weird")


class TestDeflatedOperator:
    def test_matches_materialized_residual(self, rng):
        T = random_symmetric(rng, 7, 4, density=0.5)
        w = rng.random(4)
        B = sp.csr_matrix(np.triu(rng.random((7, 7))) + np.triu(rng.random((7, 7))).T)
        R = deflate(DeflatedOperator(T), w, B)
        dense = T.to_dense() - B.toarray()[:, :, None] * w[None, None, :]
        V = rng.standard_normal((7, 2))
        W = rng.standard_normal((4, 2))
        assert np.abs(
            R.contract_modes23(V, W) - np.einsum("ijk,jq,kr->iqr", dense, V, W)
        ).max() <= 1e-12
        assert np.abs(
            R.contract_modes13(V, W) - np.einsum("ijk,ip,kr->jpr", dense, V, W)
        ).max() <= 1e-12
        assert np.abs(
            R.contract_modes12(V, V) - np.einsum("ijk,ip,jq->kpq", dense, V, V)
        ).max() <= 1e-12
        assert R.norm() == pytest.approx(np.linalg.norm(dense), rel=1e-12)
        assert np.abs(R.to_dense() - dense).max() <= 1e-12

    def test_base_untouched(self, rng):
        T = random_symmetric(rng, 6, 3, density=0.5)
        before = T.to_dense().copy()
        R0 = DeflatedOperator(T)
        R1 = deflate(R0, np.ones(3), sp.eye(6, format="csr"))
        assert np.array_equal(T.to_dense(), before)
        assert not R0.terms and len(R1.terms) == 1

    def test_shape_validation(self, rng):
        T = random_symmetric(rng, 6, 3, density=0.5)
        with pytest.raises(ValueError):
            deflate(DeflatedOperator(T), np.ones(2), sp.eye(6, format="csr"))
        with pytest.raises(ValueError):
            deflate(DeflatedOperator(T), np.ones(3), sp.eye(5, format="csr"))


class TestExpand:
    def test_two_planted_terms_recovered(self):
        T, (A1, w1, c1), (A2, w2, c2) = planted_two_terms(seed=4)
        terms, residuals = expand(T, 2, theta=0.0, mode="absolute", cfg=TIGHT)
        # stronger term first
        got_w = [t.w / np.linalg.norm(t.w) for t in terms]
        assert abs(got_w[0] @ (w1 / np.linalg.norm(w1))) >= 0.999
        assert abs(got_w[1] @ (w2 / np.linalg.norm(w2))) >= 0.999
        assert residuals[0] > residuals[1] > residuals[2]
        assert residuals[2] <= 1e-5 * residuals[0]
        C = overlap_cosines(terms)
        assert abs(C[0, 1]) <= 0.01
        assert all(t.structured for t in terms)

    def test_pythagorean_residual_decrease(self, rng):
        # theta=0 absolute keeps B_hat == B, so each deflation step removes
        # an orthogonal component: ||R_next||^2 = ||R||^2 - ||F||^2
        T = random_symmetric(rng, 8, 4, density=0.6)
        terms, residuals = expand(T, 2, theta=0.0, mode="absolute", cfg=TIGHT)
        for v, t in enumerate(terms):
            lhs = residuals[v + 1] ** 2
            rhs = residuals[v] ** 2 - t.norm_F**2
            assert abs(lhs - rhs) <= 1e-9 * residuals[0] ** 2

    def test_residual_norms_length(self, rng):
        T = random_symmetric(rng, 6, 3, density=0.6)
        terms, residuals = expand(T, 3, theta=0.0, mode="absolute", cfg=TIGHT)
        assert len(terms) == 3 and len(residuals) == 4
        assert residuals[0] == pytest.approx(frobenius_norm(T), rel=1e-12)

    def test_asymmetric_rejected(self, rng):
        d = rng.random((5, 5, 2))
        with pytest.raises(ValueError):
            expand(SparseTensor3.from_dense(d), 1, theta=0.1)

    def test_empty_term_warns(self):
        # theta close to 1 in positive mode on an all-negative B empties B_hat
        d = np.zeros((6, 6, 2))
        d[0:3, 3:6, :] = -1.0
        d[3:6, 0:3, :] = -1.0
        T = SparseTensor3.from_dense(d)
        with pytest.warns(UserWarning, match="empty"):
            expand(T, 1, theta=0.9, mode="positive", cfg=TIGHT)

    def test_invalid_q(self, rng):
        T = random_symmetric(rng, 5, 2, density=0.5)
        with pytest.raises(ValueError):
            expand(T, 0, theta=0.1)


class TestOverlapCosines:
    def test_disjoint_supports_zero(self):
        T, _, _ = planted_two_terms(seed=9)
        terms, _ = expand(T, 2, theta=0.0, mode="absolute", cfg=TIGHT)
        C = overlap_cosines(terms)
        assert C.shape == (2, 2)
        assert np.allclose(np.diag(C), 1.0)
        assert abs(C[0, 1]) <= 0.01

    def test_identical_terms_cosine_one(self, rng):
        T = random_symmetric(rng, 6, 3, density=0.6)
        terms, _ = expand(T, 1, theta=0.0, mode="absolute", cfg=TIGHT)
        C = overlap_cosines(terms + terms)
        assert C[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            overlap_cosines([])


class TestSubgraphExport:
    def test_edges_cover_support(self):
        T, _, _ = planted_two_terms(seed=2)
        terms, _ = expand(T, 1, theta=0.1, mode="absolute", cfg=TIGHT)
        labels = LabelTable(tuple(f"n{t}" for t in range(20)))
        edges, vertices = subgraph_export(terms[0], labels)
        coo = terms[0].B_hat.tocoo()
        assert len(edges) == sum(1 for i, j in zip(coo.row, coo.col) if i <= j)
        touched = {f"n{t}" for t in set(coo.row.tolist()) | set(coo.col.tolist())}
        assert set(vertices) == touched

    def test_label_mismatch_rejected(self):
        T, _, _ = planted_two_terms(seed=2)
        terms, _ = expand(T, 1, theta=0.1, mode="absolute", cfg=TIGHT)
        with pytest.raises(ValueError):
            subgraph_export(terms[0], LabelTable.default(5))


class TestSaveExpansionReport:
    def test_files_and_json(self, tmp_path):
        T, _, _ = planted_two_terms(seed=6)
        terms, residuals = expand(T, 2, theta=0.0, mode="absolute", cfg=TIGHT)
        report = save_expansion_report(terms, residuals, tmp_path)
        data = json.loads((tmp_path / "expansion_report.json").read_text())
        assert data["num_terms"] == 2
        assert data["residual_norms"] == pytest.approx(residuals)
        assert len(data["terms"]) == 2
        for v in (1, 2):
            assert (tmp_path / f"expansion_term{v}_edges.txt").exists()
            assert (tmp_path / f"expansion_term{v}_w.csv").exists()
        assert "overlap_cosines" in data
