import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from glossa.corpus import sentence
from glossa.dictionary import TagDictionary
from glossa.graph import EmptyCorpus, LabelGraph, build_label_graph, type_node
from glossa.propagation import (
    NoSeeds, PropagationConfig, PropagationResult, expand_dictionary, propagate,
)
from glossa.tags import atomic


def seed_dict(entries):
    d = TagDictionary()
    for word, tag, prov in entries:
        d.add(word, atomic(tag), prov)
    return d


# -- graph construction ---------------------------------------------------------

def mono_corpus():
    return [
        sentence(["o", "kùo", "ène", "mèa"]),
        sentence(["o", "kàdo", "ène", "mèa"]),
        sentence(["o", "kùo", "tréi"]),
        sentence(["o", "kàdo", "tréi"]),
        sentence(["ène", "mèa"]),
    ]


def test_frequency_floor_drops_singletons():
    seeds = seed_dict([("kùo", "N", "gold")])
    graph = build_label_graph(mono_corpus() + [sentence(["hapax", "kùo"])], seeds)
    assert type_node("hapax") not in graph.index
    assert type_node("kùo") in graph.index


def test_types_sharing_contexts_are_connected():
    seeds = seed_dict([("kùo", "N", "gold")])
    graph = build_label_graph(mono_corpus(), seeds)
    # kùo and kàdo appear in identical contexts: a path must exist
    assert graph.has_path(type_node("kùo"), type_node("kàdo"))


def test_seed_distribution_uniform_over_tags():
    seeds = TagDictionary()
    seeds.add("kùo", atomic("V"), "gold")
    seeds.add("kùo", atomic("C"), "gold")
    graph = build_label_graph(mono_corpus(), seeds)
    dist = graph.seeds[type_node("kùo")]
    assert dist.shape == (2,)
    assert np.allclose(dist, [0.5, 0.5])


def test_no_self_loops_and_positive_weights():
    seeds = seed_dict([("kùo", "N", "gold")])
    graph = build_label_graph(mono_corpus(), seeds)
    W = graph.weights
    assert W.diagonal().sum() == 0.0
    assert np.all(W.data > 0.0)
    assert (abs(W - W.T)).sum() == 0.0  # undirected


def test_empty_corpus_rejected():
    with pytest.raises(EmptyCorpus):
        build_label_graph([], seed_dict([("a", "N", "gold")]))


def test_provenance_confidence_scales_injection():
    seeds = TagDictionary()
    seeds.add("kùo", atomic("N"), "gold")
    seeds.add("kàdo", atomic("N"), "projected")
    graph = build_label_graph(mono_corpus(), seeds,
                              provenance_confidence={"projected": 0.5})
    assert graph.seed_confidence[type_node("kùo")] == 1.0
    assert graph.seed_confidence[type_node("kàdo")] == 0.5


# -- propagation -------------------------------------------------------------------

def _graph(nodes, edges, seeds, labels):
    index = {n: i for i, n in enumerate(nodes)}
    n = len(nodes)
    if edges:
        rows, cols, vals = [], [], []
        for a, b, w in edges:
            rows += [index[a], index[b]]
            cols += [index[b], index[a]]
            vals += [w, w]
        W = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    else:
        W = sparse.csr_matrix((n, n))
    seed_dists = {name: np.asarray(dist, dtype=float) for name, dist in seeds.items()}
    return LabelGraph(list(nodes), index, W, [atomic(l) for l in labels],
                      seed_dists, {})


def test_isolated_seed_is_exact_fixed_point():
    graph = _graph(["type:a"], [], {"type:a": [0.75, 0.25]}, ["N", "V"])
    result = propagate(graph, PropagationConfig())
    dist = result.distribution("type:a")
    assert dist[atomic("N")] == pytest.approx(0.75, abs=1e-15)
    assert dist[atomic("V")] == pytest.approx(0.25, abs=1e-15)
    assert result.residual < 1e-6


def test_three_node_path_matches_independent_oracle():
    """Plain-dict re-implementation of the update rule, iterated to a fixed
    point, must agree with the vectorized implementation."""
    cfg = PropagationConfig(max_iters=500, tol=1e-12)
    graph = _graph(["type:a", "type:b", "type:c"],
                   [("type:a", "type:b", 2.0), ("type:b", "type:c", 1.0)],
                   {"type:a": [1.0, 0.0]}, ["N", "V"])
    result = propagate(graph, cfg)

    # oracle: scalar arithmetic over explicit adjacency
    mu1, mu2, mu3 = cfg.mu1, cfg.mu2, cfg.mu3
    neighbors = {"type:a": [("type:b", 2.0)],
                 "type:b": [("type:a", 2.0), ("type:c", 1.0)],
                 "type:c": [("type:b", 1.0)]}
    seeds = {"type:a": [1.0, 0.0, 0.0]}
    p_inj = {n: (1.0 if n in seeds else 0.0) for n in neighbors}
    p_abnd = {n: 1.0 - 0.9 * p_inj[n] for n in neighbors}
    y = {n: list(seeds.get(n, [0.0, 0.0, 0.0])) for n in neighbors}
    for _ in range(4000):
        new = {}
        for v in neighbors:
            num = [mu1 * p_inj[v] * s for s in seeds.get(v, [0.0, 0.0, 0.0])]
            wsum = 0.0
            for u, w in neighbors[v]:
                wsum += w
                for l in range(3):
                    num[l] += mu2 * w * y[u][l]
            num[2] += mu3 * p_abnd[v] * 1.0
            den = mu1 * p_inj[v] + mu2 * wsum + mu3
            new[v] = [x / den for x in num]
        y = new
    for node in neighbors:
        real = y[node][:2]
        total = sum(real)
        expected = [x / total for x in real] if total > 0 else [0.0, 0.0]
        got = result.distribution(node)
        assert got[atomic("N")] == pytest.approx(expected[0], abs=1e-6)
        assert got[atomic("V")] == pytest.approx(expected[1], abs=1e-6)


def test_symmetric_seeds_give_midpoint_half_half():
    graph = _graph(
        ["type:l", "type:m", "type:r"],
        [("type:l", "type:m", 1.0), ("type:m", "type:r", 1.0)],
        {"type:l": [1.0, 0.0], "type:r": [0.0, 1.0]}, ["N", "V"])
    result = propagate(graph, PropagationConfig(max_iters=500, tol=1e-12))
    mid = result.distribution("type:m")
    assert mid[atomic("N")] == pytest.approx(0.5, abs=1e-9)
    assert mid[atomic("V")] == pytest.approx(0.5, abs=1e-9)


def test_distributions_are_valid_everywhere():
    seeds = seed_dict([("kùo", "N", "gold"), ("ène", "V", "gold")])
    graph = build_label_graph(mono_corpus(), seeds)
    result = propagate(graph, PropagationConfig(max_iters=200))
    for node, dist in result.distributions.items():
        values = np.array(list(dist.values()))
        assert np.all(values >= 0.0)
        total = values.sum()
        assert total == 0.0 or abs(total - 1.0) < 1e-9


def test_no_seeds_rejected():
    graph = _graph(["type:a"], [], {}, ["N"])
    with pytest.raises(NoSeeds):
        propagate(graph)


def test_termination_residual_below_tolerance():
    seeds = seed_dict([("kùo", "N", "gold")])
    graph = build_label_graph(mono_corpus(), seeds)
    result = propagate(graph, PropagationConfig(max_iters=1000, tol=1e-6))
    assert result.residual < 1e-6


# -- dictionary expansion -------------------------------------------------------

def _result(dists, seeded=()):
    labels = sorted({t for d in dists.values() for t in d}, key=str)
    return PropagationResult(dists, labels, 0.0, 1, set(seeded))


def test_threshold_keeps_expected_tags():
    result = _result({"type:x": {atomic("N"): 0.7, atomic("V"): 0.25, atomic("Adj"): 0.05}})
    d = expand_dictionary(result, keep_threshold=0.1)
    assert d.tags_for("x") == {atomic("N"), atomic("V")}
    assert all(e.provenance == "propagated" for e in d.entries("x"))


def test_seeded_entries_pass_through_unchanged():
    existing = seed_dict([("x", "C", "gold")])
    result = _result({"type:x": {atomic("N"): 0.9}}, seeded=["type:x"])
    d = expand_dictionary(result, existing=existing)
    assert d.tags_for("x") == {atomic("C")}


def test_feature_nodes_never_enter_dictionary():
    result = _result({"suf1:a": {atomic("N"): 0.9}, "type:x": {atomic("N"): 0.9}})
    d = expand_dictionary(result)
    assert d.types() == {"x"}


@given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=2, max_size=6),
       st.floats(min_value=0.05, max_value=0.5))
@settings(max_examples=60)
def test_raising_threshold_is_monotone(weights, thr):
    total = sum(weights) or 1.0
    labels = ["V", "N", "Adj", "Adv", "Pr", "C"][: len(weights)]
    dist = {atomic(l): w / total for l, w in zip(labels, weights)}
    result = _result({"type:w": dist})
    low = expand_dictionary(result, keep_threshold=thr)
    high = expand_dictionary(result, keep_threshold=min(1.0, thr * 2))
    assert high.tags_for("w") <= low.tags_for("w")
