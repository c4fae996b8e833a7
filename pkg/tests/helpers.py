"""Shared independent oracles and fixture builders.

The oracles here deliberately avoid the library's own inference paths:
partition functions and argmax decodes are computed by exhaustive
enumeration, gradients by central finite differences.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from glossa.corpus import Sentence, sentence
from glossa.crf import CrfModel
from glossa.tags import Tag, atomic


def enumerate_sequences(n_tags: int, length: int):
    return itertools.product(range(n_tags), repeat=length)


def brute_force_log_partition(model: CrfModel, sent: Sentence) -> float:
    """log sum over all tag sequences of exp(score), by enumeration."""
    if not len(sent):
        return 0.0
    scores = []
    for ys in enumerate_sequences(model.n_tags, len(sent)):
        tags = [model.tagset[y] for y in ys]
        scores.append(model.score_sequence(sent, tags))
    m = max(scores)
    return m + math.log(sum(math.exp(s - m) for s in scores))

def brute_force_argmax(model: CrfModel, sent: Sentence) -> tuple[list[Tag], float]:
    """Exhaustive argmax; ties resolve to the lexicographically smallest
    index sequence, matching the decoder's lowest-tag-index rule."""
    best_ys, best_score = None, -math.inf
    for ys in enumerate_sequences(model.n_tags, len(sent)):
        tags = [model.tagset[y] for y in ys]
        s = model.score_sequence(sent, tags)
        if s > best_score + 1e-12:
            best_ys, best_score = ys, s
    return [model.tagset[y] for y in best_ys], best_score


def random_crf_model(rng: np.random.RandomState, n_tags: int, vocab: list[str],
                     scale: float = 1.0) -> CrfModel:
    from glossa.tags import ATOMIC_LABELS
    tagset = [atomic(l) for l in ATOMIC_LABELS[:n_tags]]
    obs = [f"w={w}" for w in vocab]
    obs += [f"w-1={w}" for w in vocab + ["<s>"]]
    obs += [f"w+1={w}" for w in vocab + ["</s>"]]
    model = CrfModel.zeros(tagset, obs)
    w = model.flat_weights()
    model.set_flat_weights(rng.randn(w.size) * scale)
    return model


def random_sentence(rng: np.random.RandomState, vocab: list[str], length: int) -> Sentence:
    words = [vocab[rng.randint(len(vocab))] for _ in range(length)]
    return sentence(words)


def central_difference_gradient(f, w: np.ndarray, step: float) -> np.ndarray:
    grad = np.zeros_like(w)
    for i in range(w.size):
        wp = w.copy(); wp[i] += step
        wm = w.copy(); wm[i] -= step
        grad[i] = (f(wp) - f(wm)) / (2.0 * step)
    return grad
