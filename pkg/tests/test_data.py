import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import conerank as cr
from conerank.errors import InvalidInputError, LetorParseError

FIXTURE_LINES = [
    "2 qid:10 1:0.5 2:0.3 #docA",
    "0 qid:10 1:-1.25 2:0.75 4:2 #docB",
    "1 qid:7 2:0.125 3:1.5",
    "",
    "1 qid:10 3:4.5",
    "0 qid:7 1:1 2:2 3:3 4:4",
]


class TestParseLetor:
    def test_single_line(self):
        groups = cr.parse_letor(["2 qid:10 1:0.5 2:0.3 #docA"])
        assert len(groups) == 1
        g = groups[0]
        assert g.query_id == "10"
        assert g.relevances.tolist() == [2]
        np.testing.assert_allclose(g.features, [[0.5, 0.3]])
        assert g.comments == ["docA"]

    def test_grouping_preserves_first_seen_order(self):
        groups = cr.parse_letor(FIXTURE_LINES)
        assert [g.query_id for g in groups] == ["10", "7"]
        assert groups[0].n_docs == 3
        assert groups[1].n_docs == 2

    def test_missing_indices_fill_with_zero(self):
        # independent reference: build the expected matrix by hand
        groups = cr.parse_letor(FIXTURE_LINES)
        by_id = {g.query_id: g for g in groups}
        expected_10 = np.array(
            [
                [0.5, 0.3, 0.0, 0.0],
                [-1.25, 0.75, 0.0, 2.0],
                [0.0, 0.0, 4.5, 0.0],
            ]
        )
        np.testing.assert_array_equal(by_id["10"].features, expected_10)
        expected_7 = np.array(
            [
                [0.0, 0.125, 1.5, 0.0],
                [1.0, 2.0, 3.0, 4.0],
            ]
        )
        np.testing.assert_array_equal(by_id["7"].features, expected_7)

    def test_round_trip_identity(self):
        first = cr.parse_letor(FIXTURE_LINES)
        second = cr.parse_letor(cr.serialize_letor(first))
        assert len(first) == len(second)
        for a, b in zip(first, second):
            assert a.query_id == b.query_id
            np.testing.assert_array_equal(a.features, b.features)
            np.testing.assert_array_equal(a.relevances, b.relevances)

    @pytest.mark.parametrize(
        "line, lineno",
        [
            ("x qid:1 1:0.5", 1),
            ("1.5 qid:1 1:0.5", 1),
            ("-1 qid:1 1:0.5", 1),
            ("2 noqid 1:0.5", 1),
            ("2 qid:1 1:abc", 1),
            ("2 qid:1 0:0.5", 1),
            ("2 qid:1 2:0.5 1:0.3", 1),
            ("2 qid:1 1:0.5 1:0.3", 1),
            ("2 qid:1 1:nan", 1),
            ("2", 1),
        ],
    )
    def test_malformed_lines_carry_line_number(self, line, lineno):
        with pytest.raises(LetorParseError) as exc:
            cr.parse_letor(["1 qid:0 1:1"][:0] + [line])
        assert exc.value.line_number == lineno

    def test_error_line_number_counts_from_one(self):
        with pytest.raises(LetorParseError) as exc:
            cr.parse_letor(["1 qid:1 1:1", "2 qid:1 bad"])
        assert exc.value.line_number == 2

    def test_empty_stream_rejected(self):
        with pytest.raises(LetorParseError):
            cr.parse_letor([])


class TestStandardize:
    def test_constant_feature_maps_to_zero(self):
        g = cr.QueryGroup("1", np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]), [0, 1, 2])
        out, stats = cr.standardize([g])
        assert np.all(out[0].features[:, 0] == 0.0)
        assert stats.stds[0] == 1.0

    def test_already_standard_unchanged(self):
        x = np.array([-1.0, 0.0, 1.0]) * np.sqrt(1.5)  # zero mean, unit population std
        g = cr.QueryGroup("1", x[:, None], [0, 1, 2])
        out, _ = cr.standardize([g])
        np.testing.assert_allclose(out[0].features, g.features, atol=1e-12)

    def test_three_doc_fixture_recompute(self):
        rng = np.random.default_rng(0)
        g = cr.QueryGroup("1", rng.standard_normal((3, 4)) * 5 + 2, [0, 1, 2])
        out, _ = cr.standardize([g])
        X = out[0].features
        assert np.abs(X.mean(axis=0)).max() <= 1e-12
        np.testing.assert_allclose(X.std(axis=0), 1.0, atol=1e-12)

    def test_idempotent_with_own_stats(self):
        rng = np.random.default_rng(1)
        gs = [
            cr.QueryGroup(str(i), rng.standard_normal((4, 3)), rng.integers(0, 3, 4))
            for i in range(3)
        ]
        once, stats = cr.standardize(gs)
        twice, _ = cr.standardize(once)
        for a, b in zip(once, twice):
            np.testing.assert_allclose(a.features, b.features, atol=1e-12)

    def test_supplied_stats_applied_unchanged(self):
        stats = cr.FeatureStats(np.array([1.0, 2.0]), np.array([2.0, 4.0]))
        g = cr.QueryGroup("1", np.array([[3.0, 10.0]]), [1])
        out, out_stats = cr.standardize([g], stats)
        assert out_stats is stats
        np.testing.assert_allclose(out[0].features, [[1.0, 2.0]])

    def test_dimension_mismatch_rejected(self):
        stats = cr.FeatureStats(np.zeros(3), np.ones(3))
        g = cr.QueryGroup("1", np.ones((1, 2)), [1])
        with pytest.raises(InvalidInputError):
            cr.standardize([g], stats)


class TestGeneratePairs:
    def test_equal_relevance_yields_nothing(self):
        g = cr.QueryGroup("1", np.eye(3), [1, 1, 1])
        assert cr.generate_pairs(g, 1.0, 2.0) == []

    def test_single_ordered_pair(self):
        g = cr.QueryGroup("1", np.array([[1.0, 0.0], [0.0, 1.0]]), [2, 0])
        pairs = cr.generate_pairs(g, 1.0, 2.0)
        assert len(pairs) == 1
        p = pairs[0]
        assert p.phi == 2.0
        assert (p.doc_hi, p.doc_lo) == (0, 1)
        expected = cr.normalize_pair(g.features[0] - g.features[1], 1.0, 2.0)
        np.testing.assert_allclose(p.z, expected)

    def test_three_levels_enumeration(self):
        g = cr.QueryGroup("1", np.diag([1.0, 2.0, 3.0]), [2, 1, 0])
        pairs = cr.generate_pairs(g, 1.0, 2.0)
        assert [(p.doc_hi, p.doc_lo, p.phi) for p in pairs] == [
            (0, 1, 1.0),
            (0, 2, 2.0),
            (1, 2, 1.0),
        ]

    @given(
        st.lists(st.integers(0, 2), min_size=2, max_size=8),
        st.integers(0, 2**31 - 1),
    )
    @settings(max_examples=40, deadline=None)
    def test_pair_count_formula(self, rels, seed):
        rng = np.random.default_rng(seed)
        g = cr.QueryGroup("1", rng.standard_normal((len(rels), 3)), rels)
        a = rels.count(2)
        b = rels.count(1)
        c = rels.count(0)
        pairs = cr.generate_pairs(g, 1.0, np.sqrt(3))
        assert len(pairs) == a * b + a * c + b * c
        for p in pairs:
            assert p.phi > 0
            assert np.linalg.norm(p.z) < np.sqrt(3)


class TestSynthGenerate:
    def test_noiseless_pairs_live_in_truth_cone(self):
        # cone membership: nonnegative combination with no sum constraint,
        # checked against an independent nonnegative-least-squares solver
        from scipy.optimize import nnls

        spec = cr.SynthSpec(N=8, K_true=3, num_queries=6, docs_per_query=6, noise_std=0.0, seed=3)
        dataset, truth = cr.synth_generate(spec)
        rho = np.sqrt(8)
        for g in dataset:
            for s in cr.generate_pairs(g, 1.0, rho):
                _, residual = nnls(truth.U, s.z)
                assert residual < 1e-8

    def test_seed_reproducibility_is_byte_identical(self):
        spec = cr.SynthSpec(N=5, K_true=2, num_queries=4, docs_per_query=5, noise_std=0.1, seed=9)
        a, truth_a = cr.synth_generate(spec)
        b, truth_b = cr.synth_generate(spec)
        assert cr.serialize_letor(a) == cr.serialize_letor(b)
        assert truth_a.U.tobytes() == truth_b.U.tobytes()

    def test_noisy_residuals_below_noise_only_null(self):
        from scipy.optimize import nnls

        spec = cr.SynthSpec(
            N=10, K_true=3, num_queries=20, docs_per_query=8, noise_std=0.1, seed=21
        )
        dataset, truth = cr.synth_generate(spec)
        rho = np.sqrt(10)
        # Monte-Carlo null: cone residuals of normalized pure-noise differences
        rng = np.random.default_rng(12345)
        null = []
        for _ in range(2000):
            eps = rng.normal(0.0, spec.noise_std, 10)
            zn = cr.normalize_pair(eps, 1.0, rho)
            _, r = nnls(truth.U, zn)
            null.append(r)
        threshold = np.percentile(null, 99)
        residuals = []
        for g in dataset:
            for s in cr.generate_pairs(g, 1.0, rho):
                _, r = nnls(truth.U, s.z)
                residuals.append(r)
        frac_below = np.mean(np.asarray(residuals) < threshold)
        assert frac_below >= 0.95

    def test_invalid_specs_rejected(self):
        with pytest.raises(InvalidInputError):
            cr.SynthSpec(N=2, K_true=3, num_queries=1, docs_per_query=2, noise_std=0.0, seed=0)
        with pytest.raises(InvalidInputError):
            cr.SynthSpec(N=3, K_true=1, num_queries=0, docs_per_query=2, noise_std=0.0, seed=0)
        with pytest.raises(InvalidInputError):
            cr.SynthSpec(N=3, K_true=1, num_queries=1, docs_per_query=2, noise_std=-1.0, seed=0)
