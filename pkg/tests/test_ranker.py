import numpy as np
import pytest

import conerank as cr
from conerank.errors import InvalidInputError

from conftest import random_basis
from oracles import kendall_tau_b


class TestPredictPair:
    def test_cone_member_votes_positive(self):
        rng = np.random.default_rng(0)
        basis = random_basis(rng, 5, 3)
        w = rng.uniform(0.1, 1.0, 3)
        assert cr.predict_pair(basis, basis.U @ w) == 1

    def test_antisymmetry(self):
        rng = np.random.default_rng(1)
        flips = 0
        for _ in range(50):
            basis = random_basis(rng, 6, 3)
            z = rng.standard_normal(6)
            s = cr.predict_pair(basis, z)
            assert s in (1, -1)
            if cr.predict_pair(basis, -z) == -s:
                flips += 1
        assert flips == 50  # coefficient sums are almost surely nonzero

    def test_planted_pairs_vote_correctly(self, planted, planted_model):
        _, test_set, _ = planted
        model, _ = planted_model
        standardized, _ = cr.standardize(test_set, model.stats)
        total = correct = 0
        for g in standardized:
            for s in cr.generate_pairs(g, model.hyper.alpha, model.hyper.rho):
                total += 1
                correct += cr.predict_pair(model.basis, s.z) == 1
        assert correct / total >= 0.99

    def test_dimension_mismatch(self):
        basis = cr.ConeBasis(np.eye(3), c=1.0)
        with pytest.raises(InvalidInputError):
            cr.predict_pair(basis, np.ones(5))


class TestRankQuery:
    def test_single_document(self):
        basis = cr.ConeBasis(np.eye(3), c=1.0)
        result = cr.rank_query(basis, np.ones((1, 3)), 1.0, np.sqrt(3))
        assert result.ordered_doc_indices.tolist() == [0]
        assert result.votes.tolist() == [0]

    def test_two_documents_winner_first(self):
        rng = np.random.default_rng(2)
        basis = random_basis(rng, 4, 2)
        X = rng.standard_normal((2, 4))
        result = cr.rank_query(basis, X, 1.0, 2.0)
        z = cr.normalize_pair(X[0] - X[1], 1.0, 2.0)
        expected_first = 0 if cr.predict_pair(basis, z) == 1 else 1
        assert result.ordered_doc_indices[0] == expected_first
        assert result.votes.sum() == 1

    def test_vote_conservation(self):
        rng = np.random.default_rng(3)
        basis = random_basis(rng, 5, 3)
        for n in (2, 5, 9):
            X = rng.standard_normal((n, 5))
            result = cr.rank_query(basis, X, 1.0, np.sqrt(5))
            assert result.votes.sum() == n * (n - 1) // 2

    def test_output_is_permutation(self):
        rng = np.random.default_rng(4)
        basis = random_basis(rng, 5, 2)
        X = rng.standard_normal((7, 5))
        result = cr.rank_query(basis, X, 1.0, np.sqrt(5))
        assert sorted(result.ordered_doc_indices.tolist()) == list(range(7))

    def test_ordering_non_increasing_with_index_tiebreak(self):
        rng = np.random.default_rng(5)
        basis = random_basis(rng, 5, 2)
        X = rng.standard_normal((8, 5))
        result = cr.rank_query(basis, X, 1.0, np.sqrt(5))
        ranked_votes = result.votes[result.ordered_doc_indices]
        assert all(a >= b for a, b in zip(ranked_votes, ranked_votes[1:]))
        for a, b in zip(result.ordered_doc_indices, result.ordered_doc_indices[1:]):
            if result.votes[a] == result.votes[b]:
                assert a < b

    def test_document_order_independence(self):
        rng = np.random.default_rng(6)
        basis = random_basis(rng, 5, 3)
        X = rng.standard_normal((6, 5))
        base = cr.rank_query(basis, X, 1.0, np.sqrt(5))
        perm = rng.permutation(6)
        permuted = cr.rank_query(basis, X[perm], 1.0, np.sqrt(5))
        # votes follow the documents around
        np.testing.assert_array_equal(permuted.votes, base.votes[perm])

    def test_planted_query_kendall_tau(self, planted, planted_model):
        _, test_set, _ = planted
        model, _ = planted_model
        standardized, _ = cr.standardize(test_set, model.stats)
        g = standardized[0]
        sub = cr.QueryGroup(g.query_id, g.features[:5], g.relevances[:5])
        result = cr.rank_query(model.basis, sub.features, model.hyper.alpha, model.hyper.rho)
        # higher predicted position should mean higher relevance
        positions = np.empty(5, dtype=int)
        positions[result.ordered_doc_indices] = np.arange(5)
        tau = kendall_tau_b(-positions, sub.relevances)
        assert tau >= 0.8

    def test_empty_query_rejected(self):
        basis = cr.ConeBasis(np.eye(3), c=1.0)
        with pytest.raises(InvalidInputError):
            cr.rank_query(basis, np.zeros((0, 3)), 1.0, 1.0)


class TestRankDataset:
    def test_covers_all_queries(self, planted, planted_model):
        _, test_set, _ = planted
        model, _ = planted_model
        results = cr.rank_dataset(model, test_set)
        assert set(results) == {g.query_id for g in test_set}
        for g in test_set:
            assert sorted(results[g.query_id].ordered_doc_indices.tolist()) == list(
                range(g.n_docs)
            )
