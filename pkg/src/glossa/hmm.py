"""Dictionary-constrained HMM trained from gold counts plus EM over
raw monolingual text.

Emissions for in-dictionary types are clamped to the dictionary's tags;
EM (scaled forward-backward) preserves those zeros and its corpus
log-likelihood is non-decreasing by construction. The final model
interpolates the supervised estimate with the EM estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import Sentence
from .dictionary import TagDictionary
from .tags import Tag

SMOOTHING = 0.1
SUPERVISED_WEIGHT = 0.7


class HmmError(ValueError):
    pass


class NoAnnotatedData(HmmError):
    pass


class EmptyDictionary(HmmError):
    pass


@dataclass
class HmmModel:
    tagset: list[Tag]
    vocab: dict[str, int]
    start: np.ndarray        # [K]
    trans: np.ndarray        # [K, K]
    stop: np.ndarray         # [K]
    emit: np.ndarray         # [K, V]
    tag_dictionary: TagDictionary
    log_likelihoods: list[float] = field(default_factory=list)

    FORMAT_VERSION = "glossa-hmm-1"

    @property
    def n_tags(self) -> int:
        return len(self.tagset)

    def save(self, path) -> None:
        import json
        header = {
            "version": self.FORMAT_VERSION,
            "tagset": [str(t) for t in self.tagset],
            "vocab": self.vocab,
            "log_likelihoods": self.log_likelihoods,
            "dictionary": [
                [w, str(e.tag), e.provenance, e.votes]
                for w, entries in self.tag_dictionary.items()
                for e in sorted(entries)
            ],
        }
        with open(path, "wb") as fh:
            np.savez(fh,
                     __header__=np.frombuffer(json.dumps(header).encode("utf-8"),
                                              dtype=np.uint8),
                     start=self.start, trans=self.trans, stop=self.stop,
                     emit=self.emit)

    @classmethod
    def load(cls, path) -> "HmmModel":
        import json
        from .tags import parse_tag
        with np.load(path) as data:
            header = json.loads(bytes(data["__header__"]).decode("utf-8"))
            if header["version"] != cls.FORMAT_VERSION:
                raise HmmError(f"unsupported model version {header['version']!r}")
            dictionary = TagDictionary()
            for w, tag, prov, votes in header["dictionary"]:
                dictionary.add(w, parse_tag(tag), prov, votes)
            return cls(
                tagset=[parse_tag(t) for t in header["tagset"]],
                vocab=header["vocab"],
                start=data["start"].astype(np.float64),
                trans=data["trans"].astype(np.float64),
                stop=data["stop"].astype(np.float64),
                emit=data["emit"].astype(np.float64),
                tag_dictionary=dictionary,
                log_likelihoods=list(header["log_likelihoods"]),
            )

    def tag_index(self) -> dict[Tag, int]:
        return {t: k for k, t in enumerate(self.tagset)}

    def oov_tag_ids(self) -> list[int]:
        """Tags an unknown word may take: open-class atomics plus any
        composite in the tagset."""
        ids = [k for k, t in enumerate(self.tagset)
               if t.is_open_class or t.is_composite]
        return ids or list(range(self.n_tags))

    def emission_log_columns(self, norms: Sequence[str]) -> np.ndarray:
        """[T, K] log-emission scores, with the OOV fallback applied."""
        K = self.n_tags
        out = np.full((len(norms), K), -np.inf)
        oov_logp = -np.log(max(len(self.vocab), 1))
        oov_ids = self.oov_tag_ids()
        with np.errstate(divide="ignore"):
            log_emit = np.log(self.emit)
        for i, w in enumerate(norms):
            col = self.vocab.get(w)
            if col is None:
                out[i, oov_ids] = oov_logp
            else:
                out[i] = log_emit[:, col]
        return out


def _counts_from_annotated(sentences: list[Sentence], tag_index: dict[Tag, int],
                           vocab: dict[str, int], smoothing: float):
    K, V = len(tag_index), len(vocab)
    start = np.full(K, smoothing)
    trans = np.full((K, K), smoothing)
    stop = np.full(K, smoothing)
    emit = np.full((K, V), smoothing)
    for sent in sentences:
        ys = [tag_index[t] for t in sent.tags]
        start[ys[0]] += 1.0
        stop[ys[-1]] += 1.0
        for i in range(1, len(ys)):
            trans[ys[i - 1], ys[i]] += 1.0
        for y, w in zip(ys, sent.norms):
            emit[y, vocab[w]] += 1.0
    return start, trans, stop, emit


def _normalize_model(start, trans, stop, emit, mask):
    """Constrain emissions to `mask` and renormalize everything.

    Transition rows are normalized jointly with the stop column so that
    each tag's outgoing distribution over {tags, STOP} sums to 1.
    """
    start = start / start.sum()
    out_mass = trans.sum(axis=1) + stop
    trans = trans / out_mass[:, None]
    stop = stop / out_mass
    emit = emit * mask
    for k in np.where(emit.sum(axis=1) == 0.0)[0]:
        emit[k] = mask[k]
    rowsums = emit.sum(axis=1, keepdims=True)
    rowsums[rowsums == 0.0] = 1.0  # tag allowed for no word: degenerate zero row
    emit = emit / rowsums
    return start, trans, stop, emit


def _scaled_forward_backward(start, trans, stop, emit_cols):
    """Scaled alpha/beta over one sentence.

    emit_cols: [T, K] emission probabilities per position.
    Returns (alpha, beta, scales, log_likelihood).
    """
    T, K = emit_cols.shape
    alpha = np.zeros((T, K))
    scales = np.zeros(T)
    alpha[0] = start * emit_cols[0]
    scales[0] = alpha[0].sum()
    alpha[0] /= scales[0]
    for t in range(1, T):
        alpha[t] = (alpha[t - 1] @ trans) * emit_cols[t]
        scales[t] = alpha[t].sum()
        alpha[t] /= scales[t]
    final = float(alpha[T - 1] @ stop)
    log_lik = float(np.sum(np.log(scales)) + np.log(max(final, 1e-300)))

    beta = np.zeros((T, K))
    beta[T - 1] = stop / max(final, 1e-300)
    for t in range(T - 2, -1, -1):
        beta[t] = (trans @ (emit_cols[t + 1] * beta[t + 1])) / scales[t + 1]
    return alpha, beta, scales, log_lik


def forward_log_likelihood(model: HmmModel, sent: Sentence) -> float:
    """log P(sentence) under the model (in-vocabulary tokens only)."""
    if not len(sent):
        return 0.0
    cols = np.exp(model.emission_log_columns(sent.norms))
    _, _, _, ll = _scaled_forward_backward(model.start, model.trans, model.stop, cols)
    return ll


def train_semisup_hmm(mono: Iterable[Sentence], annotated: Iterable[Sentence],
                      dictionary: TagDictionary, em_iters: int = 5,
                      lambda_sup: float = SUPERVISED_WEIGHT,
                      smoothing: float = SMOOTHING) -> HmmModel:
    """Supervised initialization, dictionary-constrained EM on `mono`,
    then interpolation back towards the supervised counts."""
    annotated = [s for s in annotated if not s.excluded and len(s) > 0]
    if not annotated:
        raise NoAnnotatedData("no annotated sentences")
    for sent in annotated:
        if sent.tags is None:
            raise NoAnnotatedData("annotated sentences must carry tags")
    if len(dictionary) == 0:
        raise EmptyDictionary("tag dictionary is empty")
    mono = [s for s in mono if not s.excluded and len(s) > 0]

    tagset = sorted(
        {t for s in annotated for t in s.tags}
        | {e.tag for w in dictionary.types() for e in dictionary.entries(w)},
        key=str)
    tag_index = {t: k for k, t in enumerate(tagset)}
    words = sorted({n for s in annotated for n in s.norms}
                   | {n for s in mono for n in s.norms}
                   | dictionary.types())
    vocab = {w: i for i, w in enumerate(words)}
    K, V = len(tagset), len(vocab)

    mask = np.ones((K, V))
    for w in dictionary.types():
        allowed = {tag_index[t] for t in dictionary.tags_for(w) if t in tag_index}
        col = vocab[w]
        mask[:, col] = 0.0
        for k in allowed:
            mask[k, col] = 1.0

    sup = _normalize_model(*_counts_from_annotated(annotated, tag_index, vocab, smoothing),
                           mask)
    start, trans, stop, emit = (a.copy() for a in sup)

    log_likelihoods: list[float] = []
    id_sentences = [[vocab[n] for n in s.norms] for s in mono]
    for _ in range(em_iters):
        if not id_sentences:
            break
        c_start = np.zeros(K)
        c_trans = np.zeros((K, K))
        c_stop = np.zeros(K)
        c_emit = np.zeros((K, V))
        total_ll = 0.0
        for ids in id_sentences:
            cols = emit[:, ids].T  # [T, K]
            alpha, beta, scales, ll = _scaled_forward_backward(start, trans, stop, cols)
            total_ll += ll
            gamma = alpha * beta
            gamma = gamma / gamma.sum(axis=1, keepdims=True)
            c_start += gamma[0]
            c_stop += gamma[-1]
            for t, w in enumerate(ids):
                c_emit[:, w] += gamma[t]
            T = len(ids)
            for t in range(T - 1):
                xi = (alpha[t][:, None] * trans * (cols[t + 1] * beta[t + 1])[None, :])
                xi = xi / xi.sum()
                c_trans += xi
        log_likelihoods.append(total_ll)
        new_start = c_start / c_start.sum() if c_start.sum() > 0 else start
        out_mass = c_trans.sum(axis=1) + c_stop
        new_trans = trans.copy()
        new_stop = stop.copy()
        for k in range(K):
            if out_mass[k] > 0:
                new_trans[k] = c_trans[k] / out_mass[k]
                new_stop[k] = c_stop[k] / out_mass[k]
        new_emit = emit.copy()
        row = c_emit.sum(axis=1)
        for k in range(K):
            if row[k] > 0:
                new_emit[k] = c_emit[k] / row[k]
        start, trans, stop, emit = new_start, new_trans, new_stop, new_emit
    if id_sentences and em_iters > 0:
        cols_ll = 0.0
        for ids in id_sentences:
            cols = emit[:, ids].T
            _, _, _, ll = _scaled_forward_backward(start, trans, stop, cols)
            cols_ll += ll
        log_likelihoods.append(cols_ll)

    if em_iters > 0 and id_sentences:
        start = lambda_sup * sup[0] + (1 - lambda_sup) * start
        trans = lambda_sup * sup[1] + (1 - lambda_sup) * trans
        stop = lambda_sup * sup[2] + (1 - lambda_sup) * stop
        emit = lambda_sup * sup[3] + (1 - lambda_sup) * emit
    else:
        start, trans, stop, emit = sup

    return HmmModel(tagset, vocab, start, trans, stop, emit, dictionary,
                    log_likelihoods)


def decode_hmm(model: HmmModel, sent: Sentence) -> list[Tag]:
    """Exact Viterbi; ties resolve to the lowest tag index."""
    if not len(sent):
        return []
    log_cols = model.emission_log_columns(sent.norms)
    with np.errstate(divide="ignore"):
        log_start = np.log(model.start)
        log_trans = np.log(model.trans)
        log_stop = np.log(model.stop)
    T, K = log_cols.shape
    delta = log_start + log_cols[0]
    back = np.zeros((T, K), dtype=np.int64)
    for t in range(1, T):
        cand = delta[:, None] + log_trans
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(K)] + log_cols[t]
    delta = delta + log_stop
    k = int(np.argmax(delta))
    path = [k]
    for t in range(T - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    return [model.tagset[k] for k in path]


def posterior_confidence(model: HmmModel, sent: Sentence, tags: Sequence[Tag]) -> list[float]:
    """Posterior marginal probability of each decoded tag."""
    if not len(sent):
        return []
    cols = np.exp(model.emission_log_columns(sent.norms))
    cols = np.maximum(cols, 1e-300)
    alpha, beta, _, _ = _scaled_forward_backward(model.start, model.trans,
                                                 model.stop, cols)
    gamma = alpha * beta
    gamma = gamma / gamma.sum(axis=1, keepdims=True)
    idx = model.tag_index()
    return [float(gamma[i, idx[t]]) for i, t in enumerate(tags)]
