import itertools
import math

import numpy as np
import pytest

from glossa.corpus import sentence
from glossa.dictionary import TagDictionary
from glossa.hmm import (
    EmptyDictionary, HmmModel, NoAnnotatedData, decode_hmm,
    forward_log_likelihood, posterior_confidence, train_semisup_hmm,
)
from glossa.tags import atomic


def _dict(entries):
    d = TagDictionary()
    for word, tag in entries:
        d.add(word, atomic(tag), "gold")
    return d


def _annotated():
    return [
        sentence(["o", "kùo", "ène"], tags=["D", "N", "V"]),
        sentence(["o", "kàdo", "ène"], tags=["D", "N", "V"]),
        sentence(["ène", "mèa"], tags=["V", "Adj"]),
        sentence(["o", "kùo", "tréi"], tags=["D", "N", "V"]),
    ]


def _mono():
    return [
        sentence(["o", "kàdo", "tréi"]),
        sentence(["o", "kùo", "ène", "mèa"]),
        sentence(["ène", "mèa"]),
        sentence(["o", "kàdo", "ène"]),
    ]


def brute_force_log_likelihood(model: HmmModel, sent) -> float:
    """Enumerate every tag path; probability-space oracle."""
    norms = sent.norms
    cols = np.exp(model.emission_log_columns(norms))
    K = model.n_tags
    total = 0.0
    for path in itertools.product(range(K), repeat=len(norms)):
        p = model.start[path[0]] * cols[0][path[0]]
        for t in range(1, len(path)):
            p *= model.trans[path[t - 1], path[t]] * cols[t][path[t]]
        p *= model.stop[path[-1]]
        total += p
    return math.log(total)


def brute_force_decode(model: HmmModel, sent):
    norms = sent.norms
    cols = model.emission_log_columns(norms)
    with np.errstate(divide="ignore"):
        ls, lt, lp = np.log(model.start), np.log(model.trans), np.log(model.stop)
    best, best_score = None, -np.inf
    for path in itertools.product(range(model.n_tags), repeat=len(norms)):
        s = ls[path[0]] + cols[0][path[0]]
        for t in range(1, len(path)):
            s += lt[path[t - 1], path[t]] + cols[t][path[t]]
        s += lp[path[-1]]
        if s > best_score + 1e-12:
            best, best_score = path, s
    return [model.tagset[k] for k in best]


def test_zero_em_equals_smoothed_supervised_mle():
    d = _dict([("o", "D")])
    model = train_semisup_hmm(_mono(), _annotated(), d, em_iters=0)
    # hand-check one smoothed transition: counts over annotated with +0.1
    idx = model.tag_index()
    V = len(model.vocab)
    # D -> N occurs 3 times; D also never starts->stop etc.
    K = model.n_tags
    expected = (3 + 0.1) / (3 + 0.1 * (K + 1))  # row: K tags + stop
    assert model.trans[idx[atomic("D")], idx[atomic("N")]] == pytest.approx(expected)


def test_distributions_normalized():
    d = _dict([("o", "D")])
    model = train_semisup_hmm(_mono(), _annotated(), d, em_iters=3)
    assert model.start.sum() == pytest.approx(1.0, abs=1e-9)
    out = model.trans.sum(axis=1) + model.stop
    assert np.all(np.abs(out - 1.0) < 1e-9)
    assert np.all(np.abs(model.emit.sum(axis=1) - 1.0) < 1e-9)


def test_dictionary_constraint_zeroes_emissions():
    d = _dict([("o", "D"), ("ène", "V")])
    model = train_semisup_hmm(_mono(), _annotated(), d, em_iters=2)
    idx = model.tag_index()
    col = model.vocab["o"]
    for tag, k in idx.items():
        if tag != atomic("D"):
            assert model.emit[k, col] == 0.0


def test_forward_matches_enumeration():
    d = _dict([("o", "D")])
    model = train_semisup_hmm(_mono(), _annotated(), d, em_iters=2)
    for words in (["o"], ["o", "kùo"], ["o", "kùo", "ène"], ["o", "kùo", "ène", "mèa"]):
        sent = sentence(words)
        assert forward_log_likelihood(model, sent) == pytest.approx(
            brute_force_log_likelihood(model, sent), abs=1e-10)


def test_em_log_likelihood_monotone():
    d = _dict([("o", "D")])
    model = train_semisup_hmm(_mono(), _annotated(), d, em_iters=8)
    lls = np.array(model.log_likelihoods)
    assert len(lls) == 9  # per-iteration entries plus the final value
    assert np.all(np.diff(lls) >= -1e-9)


def test_decode_matches_enumeration():
    d = _dict([("o", "D")])
    model = train_semisup_hmm(_mono(), _annotated(), d, em_iters=2)
    rng = np.random.RandomState(0)
    words = list(model.vocab)
    for _ in range(25):
        sent = sentence([words[rng.randint(len(words))] for _ in range(rng.randint(1, 5))])
        assert decode_hmm(model, sent) == brute_force_decode(model, sent)


def test_uniform_model_tie_breaks_to_first_tag():
    tagset = [atomic("D"), atomic("N")]
    vocab = {"a": 0, "b": 1}
    K, V = 2, 2
    model = HmmModel(tagset, vocab,
                     start=np.full(K, 1.0 / K),
                     trans=np.full((K, K), 0.5 / K),
                     stop=np.full(K, 0.5),
                     emit=np.full((K, V), 1.0 / V),
                     tag_dictionary=TagDictionary())
    assert decode_hmm(model, sentence(["a", "b"])) == [atomic("D"), atomic("D")]


def test_decode_empty_sentence():
    d = _dict([("o", "D")])
    model = train_semisup_hmm(_mono(), _annotated(), d, em_iters=0)
    assert decode_hmm(model, sentence([])) == []


def test_supervised_decode_recovers_gold_on_deterministic_grammar():
    # The annotated grammar is unambiguous, so the 0-EM supervised model
    # must reproduce gold tags on its own training sentences.
    d = _dict([("o", "D")])
    model = train_semisup_hmm(_mono(), _annotated(), d, em_iters=0)
    for sent in _annotated():
        assert decode_hmm(model, sent) == list(sent.tags)


def test_in_dictionary_decode_always_respects_dictionary():
    d = _dict([("o", "D"), ("ène", "V"), ("mèa", "Adj")])
    model = train_semisup_hmm(_mono(), _annotated(), d, em_iters=3)
    rng = np.random.RandomState(1)
    words = list(model.vocab)
    for _ in range(200):
        sent = sentence([words[rng.randint(len(words))] for _ in range(rng.randint(1, 6))])
        tags = decode_hmm(model, sent)
        for norm, tag in zip(sent.norms, tags):
            if norm in d:
                assert tag in d.tags_for(norm)


def test_oov_words_restricted_to_open_class():
    d = _dict([("o", "D")])
    model = train_semisup_hmm(_mono(), _annotated(), d, em_iters=1)
    tags = decode_hmm(model, sentence(["totallyunseen"]))
    assert tags[0].is_open_class


def test_errors():
    with pytest.raises(NoAnnotatedData):
        train_semisup_hmm(_mono(), [], _dict([("o", "D")]))
    with pytest.raises(EmptyDictionary):
        train_semisup_hmm(_mono(), _annotated(), TagDictionary())


def test_posterior_confidence_in_unit_interval():
    d = _dict([("o", "D")])
    model = train_semisup_hmm(_mono(), _annotated(), d, em_iters=2)
    sent = sentence(["o", "kùo", "ène"])
    tags = decode_hmm(model, sent)
    conf = posterior_confidence(model, sent, tags)
    assert len(conf) == 3
    assert all(0.0 <= c <= 1.0 for c in conf)
