import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from honem.corpus import FirstOrderNetwork, build_fon
from honem.evaltasks import (
    PairScoreList,
    all_pairs,
    auroc,
    average_precision,
    evaluate_classification,
    evaluate_link_prediction,
    evaluate_reconstruction,
    fit_logistic,
    linkpred_split,
    map_score,
    mask_neighborhood,
    parse_labels,
    per_node_ap,
    precision_at_k,
    rank_pairs,
    score_pairs,
    split_labels,
)
from honem.neighborhood import NeighborhoodMatrix, build_neighborhood
from honem.ruleminer import extract_rules
from honem.spectral import EmbeddingMatrix, embed
from oracles import (
    ap_by_enumeration,
    auroc_by_pairs,
    best_direction_auroc,
    map_by_enumeration,
    ranking_by_brute_force,
)


def ranked(pairs):
    """A PairScoreList holding ``pairs`` in the given order."""
    n = len(pairs)
    rows = np.array([p[0] for p in pairs])
    cols = np.array([p[1] for p in pairs])
    return PairScoreList(rows, cols, np.arange(n, 0, -1, dtype=float))


@pytest.fixture
def toy_S(toy_corpus):
    return build_neighborhood(extract_rules(toy_corpus, 1, threshold_scale=0.25))


def test_identity_scores():
    e = EmbeddingMatrix(np.eye(2), np.eye(2), 0)
    s = score_pairs(e, [(0, 1), (0, 0)])
    assert dict(zip(s.pairs(), s.scores)) == {(0, 0): 1.0, (0, 1): 0.0}


def test_diag_scores():
    e = embed(np.diag([3.0, 2.0]), 2)
    s = score_pairs(e, [(0, 0), (1, 1), (0, 1), (1, 0)])
    got = dict(zip(s.pairs(), s.scores))
    assert got[(0, 0)] == pytest.approx(3.0, abs=1e-12)
    assert got[(1, 1)] == pytest.approx(2.0, abs=1e-12)
    assert got[(0, 1)] == pytest.approx(0.0, abs=1e-12)


def test_toy_scores_match_matrix(toy_S):
    e = embed(toy_S, 5)
    s = score_pairs(e)
    dense = toy_S.entries.toarray()
    for (i, j), v in zip(s.pairs(), s.scores):
        assert v == pytest.approx(dense[i, j], abs=1e-8)
    assert len(s) == 20


def test_score_pairs_errors():
    e = EmbeddingMatrix(np.eye(2), np.eye(2), 0)
    with pytest.raises(ValueError):
        score_pairs(e, [(0, 2)])
    bad = EmbeddingMatrix(np.array([[np.nan]]), np.eye(1), 0)
    with pytest.raises(ValueError):
        score_pairs(bad)


def test_rank_ties_break_by_pair():
    s = rank_pairs([1, 0, 0], [0, 2, 1], [1.0, 1.0, 2.0])
    assert s.pairs() == [(0, 1), (0, 2), (1, 0)]


def test_precision_examples():
    assert precision_at_k(ranked([(0, 1)]), {(0, 1)}, 1) == 1.0
    assert precision_at_k(ranked([(0, 1), (1, 0)]), set(), 2) == 0.0
    s = ranked([(0, 1), (0, 2), (1, 0), (1, 2)])
    assert precision_at_k(s, {(0, 2), (1, 2), (2, 0)}, 4) == 0.5
    with pytest.raises(ValueError):
        precision_at_k(s, set(), 5)
    with pytest.raises(ValueError):
        precision_at_k(s, set(), 0)


def test_ap_examples():
    assert average_precision(ranked([(0, 1), (0, 2), (0, 3)]), {(0, 1), (0, 3)}) == pytest.approx(
        (1 + 2 / 3) / 2, abs=1e-15
    )
    assert average_precision(ranked([(0, 1)]), {(0, 1)}) == 1.0
    assert average_precision(ranked([(0, 1), (0, 2)]), {(0, 2)}) == 0.5
    with pytest.raises(ValueError):
        average_precision(ranked([(0, 1)]), set())


def test_map_examples():
    assert map_score({0: 1.0, 1: 0.5}) == 0.75
    assert map_score([0.8333]) == 0.8333
    # Node 1 has no truth edges, so only node 0 counts.
    s = ranked([(0, 1), (1, 0), (0, 2), (1, 2)])
    aps = per_node_ap(s, {(0, 2)})
    assert aps == {0: 0.5}
    assert map_score(aps) == 0.5
    assert map_score(aps, "all", n_nodes=2) == 0.25
    with pytest.raises(ValueError):
        map_score({})
    with pytest.raises(ValueError):
        map_score([1.0], "sometimes")


def test_split_examples(toy_corpus):
    adj = np.zeros((5, 5))
    for k, (i, j) in enumerate([(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]):
        adj[i, j] = 1
    fon = FirstOrderNetwork(sparse.csr_matrix(adj))
    kept, held = linkpred_split(fon, 0.2, seed=1)
    assert (len(kept), len(held)) == (8, 2)
    assert not set(kept) & set(held)
    assert linkpred_split(fon, 0.2, seed=1) == (kept, held)
    kept, held = linkpred_split(build_fon(toy_corpus), 0.2, seed=0)
    assert (len(kept), len(held)) == (6, 1)


def test_split_errors():
    fon = FirstOrderNetwork(sparse.csr_matrix(np.array([[0, 1], [0, 0]])))
    with pytest.raises(ValueError, match="empty"):
        linkpred_split(fon, 0.2)
    with pytest.raises(ValueError):
        linkpred_split(fon, 1.0)


def test_mask_examples(toy_corpus, toy_S):
    v = toy_corpus.vocabulary
    assert (mask_neighborhood(toy_S, []).entries != toy_S.entries).nnz == 0
    rows, cols = toy_S.entries.nonzero()
    assert mask_neighborhood(toy_S, list(zip(rows, cols))).entries.nnz == 0
    m = mask_neighborhood(toy_S, [(v["A"], v["C"])])
    assert m.entries[v["A"], v["C"]] == 0
    assert m.entries[v["A"], v["D"]] == toy_S.entries[v["A"], v["D"]]
    assert m.entries.nnz == toy_S.entries.nnz - 1


def test_auroc_examples():
    assert auroc([0.9, 0.4, 0.6, 0.1], [1, 1, 0, 0]) == 0.75
    assert auroc([1, 2, 3, 4], [0, 0, 1, 1]) == 1.0
    assert auroc([5, 5, 5], [0, 1, 1]) == 0.5
    with pytest.raises(ValueError):
        auroc([1, 2], [1, 1])


@given(st.lists(st.integers(0, 5), min_size=2, max_size=20), st.data())
def test_auroc_matches_pairs_and_antisymmetry(scores, data):
    labels = data.draw(st.lists(st.integers(0, 1), min_size=len(scores), max_size=len(scores)))
    if len(set(labels)) < 2:
        return
    s = np.array(scores, dtype=float)
    y = np.array(labels)
    a = auroc(s, y)
    assert a == pytest.approx(auroc_by_pairs(s[y == 1], s[y == 0]), abs=1e-12)
    assert auroc(-s, y) == pytest.approx(1 - a, abs=1e-12)


def test_classifier_separable():
    X = np.array([[-1.0], [-1.1], [-0.9], [1.0], [1.1], [0.9]])
    y = np.array([0, 0, 0, 1, 1, 1])
    model = fit_logistic(X, y)
    assert auroc(model.predict_proba(np.array([[-1.05], [1.05]])), [0, 1]) == 1.0


def test_classifier_single_class():
    with pytest.raises(ValueError, match="single class"):
        fit_logistic(np.ones((3, 1)), np.zeros(3))


def test_classifier_matches_grid_search():
    rng = np.random.default_rng(42)
    n = 100
    X = np.vstack([rng.normal([0, 0], 1.0, (n, 2)), rng.normal([1.5, 1.0], 1.0, (n, 2))])
    labels = {i: int(i >= n) for i in range(2 * n)}
    split = split_labels(labels, seed=3)
    emb = EmbeddingMatrix(X, X, 0)
    got = evaluate_classification(emb, split).metrics["auroc"]
    tr, te = np.array(split.train), np.array(split.test)
    y = np.array([labels[i] for i in range(2 * n)])
    ref = best_direction_auroc(X[tr], y[tr], X[te], y[te])
    assert abs(got - ref) <= 0.02


def test_split_labels_stratified():
    labels = {i: int(i % 3 == 0) for i in range(30)}
    s = split_labels(labels, seed=0)
    assert abs(len(s.train) - 21) <= 1
    assert set(s.train) | set(s.test) == set(labels)
    assert not set(s.train) & set(s.test)
    assert split_labels(labels, seed=0) == s


def test_parse_labels():
    assert parse_labels("token,label\nA,1\nB,0\n", ["A", "B"]) == {0: 1, 1: 0}
    with pytest.raises(ValueError, match="line 2"):
        parse_labels("A,1\nQ,0\n", ["A"])
    with pytest.raises(ValueError, match="0 or 1"):
        parse_labels("A,2\n", ["A"])


def test_reconstruction_report(toy_corpus, toy_S):
    fon = build_fon(toy_corpus)
    first = build_neighborhood(extract_rules(toy_corpus, 1))
    report = evaluate_reconstruction(embed(first, 5), fon, [7])
    assert report.metrics["precision@7"] == 1.0
    assert report.metrics["map"] == 1.0
    assert report.format().startswith("task\treconstruct\nprecision@7\t1\n")
    # Second-order entries (e^-1) outrank the weakest edge C->E (1/3).
    report = evaluate_reconstruction(embed(toy_S, 5), fon, [7])
    assert report.metrics["precision@7"] == pytest.approx(6 / 7)


def test_link_prediction_report(toy_corpus, toy_S):
    fon = build_fon(toy_corpus)
    a = evaluate_link_prediction(toy_S, fon, dim=3, seed=0, ks=[1])
    b = evaluate_link_prediction(toy_S, fon, dim=3, seed=0, ks=[1])
    assert a.format() == b.format()
    assert a.params["heldout"] == 1
    assert 0 <= a.metrics["map"] <= 1


def test_all_pairs_excludes():
    rows, cols = all_pairs(3, exclude=[(0, 1)])
    assert list(zip(rows.tolist(), cols.tolist())) == [(0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.data())
def test_ap_map_brute_force(n, data):
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    values = data.draw(st.lists(st.integers(0, 4), min_size=len(pairs), max_size=len(pairs)))
    truth = set(data.draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=len(pairs))))
    scores = dict(zip(pairs, map(float, values)))
    s = rank_pairs([p[0] for p in pairs], [p[1] for p in pairs], list(scores.values()))
    assert s.pairs() == ranking_by_brute_force(scores)
    for i in {p[0] for p in truth}:
        node = s.for_node(i)
        node_truth = {p for p in truth if p[0] == i}
        assert average_precision(node, node_truth) == pytest.approx(
            ap_by_enumeration(node.pairs(), node_truth), abs=1e-15
        )
    for denom in ("defined", "all"):
        got = map_score(per_node_ap(s, truth), denom, n)
        assert got == pytest.approx(map_by_enumeration(scores, truth, n, denom), abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.1, 10.0, 1 / 7]))
def test_ranking_invariant_under_scaling(seed, c):
    rng = np.random.default_rng(seed)
    A = rng.random((7, 7)) * (rng.random((7, 7)) < 0.4)
    S = NeighborhoodMatrix(sparse.csr_matrix(A), 1)
    truth = {(i, j) for i, j in zip(*A.nonzero()) if i != j} or {(0, 1)}
    a = score_pairs(embed(S, 3, seed=0))
    b = score_pairs(embed(S.scaled(c), 3, seed=0))
    assert a.pairs() == b.pairs()
    assert map_score(per_node_ap(a, truth)) == map_score(per_node_ap(b, truth))
