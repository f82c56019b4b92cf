import json

import numpy as np
import pytest
from conftest import brute_force_eval, toy_bundle

from hyperkg.data import Vocabulary, make_bundle
from hyperkg.evaluation import (
    EvalReport,
    QueryRank,
    evaluate,
    random_ranking_baseline,
    rank_query,
    report_to_dict,
    write_eval_report,
)
from hyperkg.exceptions import ConfigError
from hyperkg.geometry import poincare_distance
from hyperkg.model import EUCLIDEAN_ADD, ParameterStore, init_params, term_embeddings


def line_world(entity_xs, relation_x=0.2, train=(), valid=(), test=()):
    """Entities on the x-axis with shift 0, so score(s, r, o) = d(e_o + e_s, r)."""
    vocab = Vocabulary()
    for i in range(len(entity_xs)):
        vocab.intern_entity(f"e{i}")
    vocab.intern_relation("r")
    ents = np.array([[x, 0.0] for x in entity_xs])
    store = ParameterStore(ents, np.array([[relation_x, 0.0]]), 0, EUCLIDEAN_ADD)
    bundle = make_bundle(
        np.array(train, dtype=np.int64).reshape(-1, 3),
        np.array(valid, dtype=np.int64).reshape(-1, 3),
        np.array(test, dtype=np.int64).reshape(-1, 3),
        vocab,
    )
    return store, bundle


class TestRankQuery:
    def test_unique_minimum_ranks_first(self):
        # subject at the origin: score(0, r, o) = d(e_o, r); e_1 sits on r
        store, bundle = line_world([0.0, 0.2, 0.35, 0.45], train=[(0, 0, 2)], test=[(0, 0, 1)])
        assert rank_query(store, (0, 0, 1), "object", bundle) == 1.0

    def test_exact_tie_gets_mid_rank(self):
        store, bundle = line_world([0.0, 0.2, 0.2, 0.45], train=[], test=[(0, 0, 1)])
        # e_2 is bitwise equal to the gold e_1: rank 1 + 0 + 1/2
        assert rank_query(store, (0, 0, 1), "object", bundle) == 1.5

    def test_filtering_removes_known_true_competitor(self):
        # raw rank of the gold is 2; the better candidate is a train fact
        store, bundle = line_world([0.0, 0.2, 0.3], train=[(0, 0, 1)], test=[(0, 0, 2)])
        scores = [poincare_distance(np.array([x, 0.0]), np.array([0.2, 0.0])) for x in (0.0, 0.2, 0.3)]
        assert sum(s < scores[2] for s in scores) == 1  # raw rank would be 2
        assert rank_query(store, (0, 0, 2), "object", bundle) == 1.0

    def test_filtered_rank_never_exceeds_raw(self):
        rng = np.random.default_rng(0)
        bundle = toy_bundle(n_entities=6, seed=3)
        store = init_params(bundle.n_entities, bundle.n_relations, 4, seed=7)
        empty = make_bundle(
            bundle.test, np.empty((0, 3)), np.empty((0, 3)), bundle.vocab
        )  # filter holds only the gold triples themselves
        for s, r, o in bundle.test:
            for side in ("subject", "object"):
                filtered = rank_query(store, (s, r, o), side, bundle)
                raw = rank_query(store, (s, r, o), side, empty)
                assert filtered <= raw

    def test_gold_never_filtered_out(self):
        # the gold triple is in train too; it must stay in its candidate list
        store, bundle = line_world([0.0, 0.2, 0.3], train=[(0, 0, 1)], test=[(0, 0, 1)])
        assert rank_query(store, (0, 0, 1), "object", bundle) == 1.0

    def test_invalid_side(self):
        store, bundle = line_world([0.0, 0.2], test=[(0, 0, 1)])
        with pytest.raises(ConfigError):
            rank_query(store, (0, 0, 1), "sideways", bundle)


class TestEvaluate:
    def test_aggregation_arithmetic(self):
        report = EvalReport(
            per_query=[QueryRank(0, 0, 0, "object", r) for r in (1.0, 2.0, 4.0)]
        )
        ranks = np.array([q.rank for q in report.per_query])
        assert float(np.mean(1.0 / ranks)) == pytest.approx((1 + 0.5 + 0.25) / 3)
        assert float(np.mean(ranks <= 10)) == 1.0

    def test_matches_brute_force_oracle(self):
        bundle = toy_bundle(n_entities=6, seed=5)
        store = init_params(bundle.n_entities, bundle.n_relations, 4, seed=11)
        report = evaluate(store, bundle, ks=(1, 3, 10))
        ranks, mrr, hits = brute_force_eval(store, bundle, (1, 3, 10))
        np.testing.assert_array_equal([q.rank for q in report.per_query], ranks)
        assert report.mrr == pytest.approx(mrr, abs=1e-15)
        for k in (1, 3, 10):
            assert report.hits[k] == pytest.approx(hits[k], abs=1e-15)

    def test_all_identical_entities_tie_completely(self):
        vocab = Vocabulary()
        for i in range(5):
            vocab.intern_entity(f"e{i}")
        vocab.intern_relation("r")
        ents = np.tile(np.array([[0.1, 0.05]]), (5, 1))
        store = ParameterStore(ents, np.array([[0.3, 0.0]]), 1, EUCLIDEAN_ADD)
        bundle = make_bundle([(0, 0, 1)], np.empty((0, 3)), [(2, 0, 3)], vocab)
        for q in evaluate(store, bundle).per_query:
            # every candidate survives and ties: rank = 1 + (C - 1) / 2
            assert q.rank == 1 + (5 - 1) / 2

    def test_mrr_in_unit_interval_and_hits_monotone(self):
        bundle = toy_bundle(n_entities=7, seed=9)
        store = init_params(bundle.n_entities, bundle.n_relations, 4, seed=1)
        report = evaluate(store, bundle, ks=(1, 3, 10))
        assert 0.0 < report.mrr <= 1.0
        assert report.hits[1] <= report.hits[3] <= report.hits[10]

    def test_pure_function_bitwise(self):
        bundle = toy_bundle(n_entities=6, seed=5)
        store = init_params(bundle.n_entities, bundle.n_relations, 4, seed=11)
        r1 = evaluate(store, bundle, ks=(10,))
        r2 = evaluate(store, bundle, ks=(10,))
        assert r1.mrr == r2.mrr
        assert [q.rank for q in r1.per_query] == [q.rank for q in r2.per_query]

    def test_rotation_leaves_ranks_unchanged(self):
        # rotating every vector (conjugating the shift accordingly) is an
        # isometry of the score, so all rankings are preserved
        bundle = toy_bundle(n_entities=6, seed=5)
        store = init_params(bundle.n_entities, bundle.n_relations, 2, seed=11)
        q, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((2, 2)))

        def rotated_score(s, r, o):
            term = term_embeddings(store, np.int64(s), np.int64(o))
            return float(poincare_distance(term @ q.T, store.relation_vecs[r] @ q.T))

        base_ranks, _, _ = brute_force_eval(store, bundle, (10,))
        rot_ranks, _, _ = brute_force_eval(store, bundle, (10,), score_fn=rotated_score)
        np.testing.assert_array_equal(base_ranks, rot_ranks)
        report = evaluate(store, bundle, ks=(10,))
        np.testing.assert_array_equal([qr.rank for qr in report.per_query], base_ranks)


class TestBaselineAndExport:
    def test_random_baseline_formula(self):
        # brute-force expectation of 1/rank over a uniform ranking is H(n)/n;
        # the baseline doubles it
        n = 400
        exact_expectation = float(np.mean(1.0 / np.arange(1, n + 1)))  # H(n)/n
        assert random_ranking_baseline(n) == pytest.approx(2 * exact_expectation, abs=1e-15)
        assert random_ranking_baseline(418) < 0.05

    def test_report_export(self, tmp_path):
        bundle = toy_bundle(n_entities=6, seed=5)
        store = init_params(bundle.n_entities, bundle.n_relations, 4, seed=11)
        report = evaluate(store, bundle, ks=(1, 10))
        write_eval_report(report, tmp_path / "report.json", tmp_path / "per_query.csv")
        payload = json.loads((tmp_path / "report.json").read_text())
        assert set(payload) == {"mrr", "hits", "n_queries"}
        assert payload["n_queries"] == 2 * bundle.test.shape[0]
        lines = (tmp_path / "per_query.csv").read_text().strip().splitlines()
        assert lines[0] == "subject,relation,object,side,rank"
        assert len(lines) == 1 + report.n_queries
        assert report_to_dict(report)["mrr"] == report.mrr
