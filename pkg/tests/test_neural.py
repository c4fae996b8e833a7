import numpy as np
import pytest

import glossa.autograd as autograd
from glossa.corpus import sentence
from glossa.neural import (
    UNK, NeuralConfig, NeuralError, NeuralModel, forward, gradient_check,
    predict, train_neural,
)
from glossa.tags import atomic

SMALL = NeuralConfig(input_embed_dim=8, hidden_dim=8, tag_embed_dim=4,
                     lr=0.01, max_epochs=50, dev_size=0, seed=3)


def _small_model(n_words: int = 5, n_tags: int = 3, cfg: NeuralConfig = SMALL) -> NeuralModel:
    vocab = {UNK: 0}
    for i in range(n_words):
        vocab[f"w{i}"] = len(vocab)
    tagset = [atomic(l) for l in ("V", "N", "Adj", "Adv", "Pr")[:n_tags]]
    return NeuralModel(vocab, tagset, cfg)


def _memorizable_corpus():
    return [
        sentence(["w0", "w1"], tags=["V", "N"]),
        sentence(["w1", "w2", "w3"], tags=["N", "V", "Adj"]),
        sentence(["w2", "w0"], tags=["V", "V"]),
        sentence(["w3", "w4"], tags=["Adj", "N"]),
        sentence(["w4", "w1", "w0"], tags=["N", "N", "V"]),
    ]


# -- forward -------------------------------------------------------------------

def test_probabilities_sum_to_one():
    model = _small_model()
    log_probs = forward(model, sentence(["w0", "w1", "unseen"]))
    sums = np.exp(log_probs).sum(axis=1)
    assert np.all(np.abs(sums - 1.0) < 1e-6)


def test_zero_output_layer_gives_uniform():
    model = _small_model(n_tags=3)
    model.params["out.w"].data[:] = 0.0
    model.params["out.b"].data[:] = 0.0
    log_probs = forward(model, sentence(["w0", "w2"]))
    assert np.allclose(np.exp(log_probs), 1.0 / 3.0, atol=1e-12)


def test_unknown_words_map_to_unk():
    model = _small_model()
    a = forward(model, sentence(["neverseen1"]))
    b = forward(model, sentence(["neverseen2"]))
    assert np.array_equal(a, b)


def test_empty_sentence_rejected():
    model = _small_model()
    with pytest.raises(NeuralError):
        forward(model, sentence([]))


def test_forward_matches_hand_unrolled_lstm():
    """Independent scalar reference: one forward LSTM pass, the backward
    pass, the bottleneck and the softmax, all written against raw numpy
    arrays pulled out of the parameter dict."""
    model = _small_model(n_words=3, n_tags=2)
    ids = [1, 2]
    H = model.cfg.hidden_dim

    def sigmoid(x):
        return 1.0 / (1.0 + np.exp(-x))

    def run_direction(seq, prefix):
        wx = model.params[f"{prefix}.wx"].data
        wh = model.params[f"{prefix}.wh"].data
        b = model.params[f"{prefix}.b"].data
        h = np.zeros(H)
        c = np.zeros(H)
        states = []
        for wid in seq:
            x = model.params["emb"].data[wid]
            gates = x @ wx + h @ wh + b
            i = sigmoid(gates[:H])
            f = sigmoid(gates[H:2 * H])
            o = sigmoid(gates[2 * H:3 * H])
            g = np.tanh(gates[3 * H:])
            c = f * c + i * g
            h = o * np.tanh(c)
            states.append(h)
        return states

    h_fwd = run_direction(ids, "fwd")
    h_bwd = run_direction(list(reversed(ids)), "bwd")[::-1]
    expected = []
    for hf, hb in zip(h_fwd, h_bwd):
        mid = np.tanh(np.concatenate([hf, hb]) @ model.params["mid.w"].data
                      + model.params["mid.b"].data)
        scores = mid @ model.params["out.w"].data + model.params["out.b"].data
        expected.append(scores - (np.max(scores) + np.log(np.sum(np.exp(scores - np.max(scores))))))
    got = np.stack([lp.data for lp in model.token_log_probs(ids)])
    assert np.allclose(got, np.stack(expected), atol=1e-12)


# -- gradients ------------------------------------------------------------------

def test_gradient_check_fresh_model():
    model = _small_model(n_words=6, n_tags=3)
    batch = [
        sentence(["w0", "w1", "w2"], tags=["V", "N", "Adj"]),
        sentence(["w3", "w4"], tags=["N", "V"]),
    ]
    err = gradient_check(model, batch, sample_fraction=0.25, seed=1)
    assert err < 1e-3


def test_gradients_near_zero_at_perfect_fit():
    # Drive the output bias towards a one-hot so the loss is ~0, then the
    # gradient of every parameter should be ~0 as well.
    model = _small_model(n_words=2, n_tags=2)
    model.params["out.b"].data[:] = np.array([50.0, -50.0])
    ids = [1, 2]
    loss = model.sentence_loss(ids, [0, 0])
    assert float(loss.data) < 1e-6
    model.zero_grad()
    loss.backward()
    for p in model.params.values():
        if p.grad is not None:
            assert np.max(np.abs(p.grad)) < 1e-6


def test_corrupted_backward_rule_is_detected(monkeypatch):
    model = _small_model(n_words=6, n_tags=3)
    batch = [sentence(["w0", "w1", "w2"], tags=["V", "N", "Adj"])]
    baseline = gradient_check(model, batch, sample_fraction=1.0, seed=2)

    true_tanh = autograd.Tensor.tanh

    def corrupted_tanh(self):
        out = true_tanh(self)
        t = out.data

        def bad_backward(g):
            if self.requires_grad:
                self._accumulate(g * (1.0 - t))  # wrong derivative

        out._backward = bad_backward
        return out

    monkeypatch.setattr(autograd.Tensor, "tanh", corrupted_tanh)
    corrupted = gradient_check(model, batch, sample_fraction=1.0, seed=2)
    assert corrupted > 100 * max(baseline, 1e-8)
    assert corrupted > 1e-2


# -- training --------------------------------------------------------------------

def test_overfits_small_corpus():
    cfg = NeuralConfig(input_embed_dim=16, hidden_dim=16, tag_embed_dim=8,
                       lr=0.05, max_epochs=50, dev_size=0, seed=0,
                       unk_replace_prob=0.0)
    model, log = train_neural(_memorizable_corpus(), cfg)
    assert min(log.train_losses) < 0.01


def test_best_dev_snapshot_returned():
    cfg = NeuralConfig(input_embed_dim=8, hidden_dim=8, tag_embed_dim=4,
                       lr=0.02, max_epochs=8, dev_size=1, seed=1,
                       unk_replace_prob=0.0)
    corpus = _memorizable_corpus() * 3
    model, log = train_neural(corpus, cfg)
    best = int(np.argmax(log.dev_accuracies))
    assert log.best_epoch == best
    assert log.dev_accuracies[log.best_epoch] == max(log.dev_accuracies)


def test_training_is_deterministic():
    cfg = NeuralConfig(input_embed_dim=8, hidden_dim=8, tag_embed_dim=4,
                       lr=0.02, max_epochs=3, dev_size=1, seed=7)
    corpus = _memorizable_corpus() * 2
    m1, _ = train_neural(corpus, cfg)
    m2, _ = train_neural(corpus, cfg)
    for key in m1.params:
        assert np.array_equal(m1.params[key].data, m2.params[key].data)


def test_insufficient_data_rejected():
    with pytest.raises(NeuralError):
        train_neural(_memorizable_corpus(), NeuralConfig(dev_size=40))


def test_loss_is_finite_even_with_large_scores():
    model = _small_model(n_words=2, n_tags=2)
    model.params["out.b"].data[:] = np.array([1e4, -1e4])
    loss = model.sentence_loss([1], [1])
    assert np.isfinite(float(loss.data))


def test_checkpoint_round_trip(tmp_path):
    cfg = NeuralConfig(input_embed_dim=8, hidden_dim=8, tag_embed_dim=4,
                       lr=0.02, max_epochs=2, dev_size=1, seed=5)
    model, _ = train_neural(_memorizable_corpus() * 2, cfg)
    path = tmp_path / "model.npz"
    model.save(path)
    loaded = NeuralModel.load(path)
    assert loaded.vocab == model.vocab
    assert loaded.tagset == model.tagset
    assert loaded.cfg == model.cfg
    for key in model.params:
        assert np.array_equal(loaded.params[key].data, model.params[key].data)
    sent = sentence(["w0", "w1", "zzz"])
    assert predict(loaded, sent) == predict(model, sent)
