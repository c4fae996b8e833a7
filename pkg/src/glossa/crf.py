"""Linear-chain CRF tagger trained by maximizing L2-regularized
conditional log-likelihood with full-batch gradient ascent and a
backtracking line search.

Weights are stored as dense blocks (observation x tag, transition,
start, stop) but the model exposes the logical view of a single
feature-string -> weight map, which is also its text serialization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import Sentence
from .dictionary import TagDictionary
from .features import FeatureTemplateConfig, extract_features
from .tags import Tag, parse_tag


class CrfError(ValueError):
    pass


class NoTrainingData(CrfError):
    pass


class DegenerateTagset(CrfError):
    pass


def _logsumexp(a: np.ndarray, axis: int | None = None) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis) if axis is not None else out.reshape(())


@dataclass
class CrfModel:
    tagset: list[Tag]
    obs_index: dict[str, int]
    w_obs: np.ndarray       # [n_obs, K]
    w_trans: np.ndarray     # [K, K]
    w_start: np.ndarray     # [K]
    w_stop: np.ndarray      # [K]
    template: FeatureTemplateConfig = field(default_factory=FeatureTemplateConfig.extended)
    l2: float = 0.1

    @classmethod
    def zeros(cls, tagset: Sequence[Tag], obs_strings: Iterable[str],
              template: FeatureTemplateConfig | None = None, l2: float = 0.1) -> "CrfModel":
        tagset = list(tagset)
        obs_index = {s: i for i, s in enumerate(sorted(set(obs_strings)))}
        K = len(tagset)
        return cls(
            tagset=tagset,
            obs_index=obs_index,
            w_obs=np.zeros((len(obs_index), K)),
            w_trans=np.zeros((K, K)),
            w_start=np.zeros(K),
            w_stop=np.zeros(K),
            template=template or FeatureTemplateConfig.extended(),
            l2=l2,
        )

    @property
    def n_tags(self) -> int:
        return len(self.tagset)

    def tag_index(self) -> dict[Tag, int]:
        return {t: k for k, t in enumerate(self.tagset)}

    # -- logical feature view -------------------------------------------------

    def feature_index(self) -> dict[str, int]:
        """Feature string -> flat weight index (observation, transition,
        start, stop blocks in that order)."""
        K = self.n_tags
        index: dict[str, int] = {}
        for obs, o in self.obs_index.items():
            for k, tag in enumerate(self.tagset):
                index[f"U|{obs}|{tag}"] = o * K + k
        base = len(self.obs_index) * K
        for j, a in enumerate(self.tagset):
            for k, b in enumerate(self.tagset):
                index[f"T|{a}|{b}"] = base + j * K + k
        base += K * K
        for k, tag in enumerate(self.tagset):
            index[f"START|{tag}"] = base + k
        base += K
        for k, tag in enumerate(self.tagset):
            index[f"STOP|{tag}"] = base + k
        return index

    def flat_weights(self) -> np.ndarray:
        return np.concatenate([
            self.w_obs.ravel(), self.w_trans.ravel(), self.w_start, self.w_stop,
        ])

    def set_flat_weights(self, w: np.ndarray) -> None:
        K = self.n_tags
        n_obs = len(self.obs_index)
        obs, rest = w[: n_obs * K], w[n_obs * K:]
        self.w_obs = obs.reshape(n_obs, K).copy()
        self.w_trans = rest[: K * K].reshape(K, K).copy()
        self.w_start = rest[K * K: K * K + K].copy()
        self.w_stop = rest[K * K + K:].copy()

    # -- scoring --------------------------------------------------------------

    def observation_ids(self, sent: Sentence) -> list[list[int]]:
        """Known-feature ids per position; unseen features are skipped."""
        out = []
        for i in range(len(sent)):
            feats = extract_features(sent, i, self.template)
            out.append(sorted(self.obs_index[f] for f in feats if f in self.obs_index))
        return out

    def unary_scores(self, sent: Sentence, obs_ids: list[list[int]] | None = None) -> np.ndarray:
        if obs_ids is None:
            obs_ids = self.observation_ids(sent)
        U = np.zeros((len(sent), self.n_tags))
        for i, ids in enumerate(obs_ids):
            if ids:
                U[i] = self.w_obs[ids].sum(axis=0)
        return U

    def score_sequence(self, sent: Sentence, tags: Sequence[Tag],
                       obs_ids: list[list[int]] | None = None) -> float:
        if len(tags) != len(sent):
            raise CrfError("tag sequence length mismatch")
        if not len(sent):
            return 0.0
        idx = self.tag_index()
        ys = [idx[t] for t in tags]
        U = self.unary_scores(sent, obs_ids)
        total = self.w_start[ys[0]] + self.w_stop[ys[-1]]
        total += sum(U[i, y] for i, y in enumerate(ys))
        total += sum(self.w_trans[ys[i - 1], ys[i]] for i in range(1, len(ys)))
        return float(total)

    # -- serialization ----------------------------------------------------------

    FORMAT_VERSION = "glossa-crf-1"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#version: {self.FORMAT_VERSION}\n")
            fh.write(f"#profile: {self.template.profile}\n")
            fh.write(f"#max_affix_len: {self.template.max_affix_len}\n")
            fh.write(f"#use_ngrams: {int(self.template.use_ngrams)}\n")
            fh.write(f"#l2: {self.l2!r}\n")
            fh.write("#tagset: " + " ".join(str(t) for t in self.tagset) + "\n")
            flat = self.flat_weights()
            for feat, fid in self.feature_index().items():
                w = float(flat[fid])
                if w != 0.0:
                    fh.write(f"{feat}\t{w!r}\n")

    @classmethod
    def load(cls, path) -> "CrfModel":
        header: dict[str, str] = {}
        rows: list[tuple[str, float]] = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, value = line[1:].partition(":")
                    header[key.strip()] = value.strip()
                    continue
                feat, _, w = line.partition("\t")
                rows.append((feat, float(w)))
        if header.get("version") != cls.FORMAT_VERSION:
            raise CrfError(f"unsupported model version {header.get('version')!r}")
        template = FeatureTemplateConfig(
            profile=header["profile"],
            max_affix_len=int(header["max_affix_len"]),
            use_ngrams=bool(int(header["use_ngrams"])),
        )
        tagset = [parse_tag(s) for s in header["tagset"].split()]
        # Observation strings may contain '|' (ngram features); the tag is
        # always the final '|'-separated component.
        obs_strings = sorted({feat[2:feat.rfind("|")] for feat, _ in rows if feat.startswith("U|")})
        model = cls.zeros(tagset, obs_strings, template, l2=float(header["l2"]))
        flat = model.flat_weights()
        index = model.feature_index()
        for feat, w in rows:
            flat[index[feat]] = w
        model.set_flat_weights(flat)
        return model


# ---------------------------------------------------------------------------
# Inference


def log_partition(model: CrfModel, sent: Sentence,
                  obs_ids: list[list[int]] | None = None) -> float:
    """log Z by the forward recursion in log-space; 0 for empty input."""
    T = len(sent)
    if T == 0:
        return 0.0
    U = model.unary_scores(sent, obs_ids)
    alpha = model.w_start + U[0]
    for i in range(1, T):
        alpha = _logsumexp(alpha[:, None] + model.w_trans, axis=0) + U[i]
    return float(_logsumexp(alpha + model.w_stop))


def forward_backward(model: CrfModel, sent: Sentence,
                     obs_ids: list[list[int]] | None = None):
    """Posterior node marginals [T,K], edge marginals [T-1,K,K], and log Z."""
    T, K = len(sent), model.n_tags
    if T == 0:
        return np.zeros((0, K)), np.zeros((0, K, K)), 0.0
    U = model.unary_scores(sent, obs_ids)
    alpha = np.zeros((T, K))
    alpha[0] = model.w_start + U[0]
    for i in range(1, T):
        alpha[i] = _logsumexp(alpha[i - 1][:, None] + model.w_trans, axis=0) + U[i]
    beta = np.zeros((T, K))
    beta[T - 1] = model.w_stop
    for i in range(T - 2, -1, -1):
        beta[i] = _logsumexp(model.w_trans + (U[i + 1] + beta[i + 1])[None, :], axis=1)
    log_z = float(_logsumexp(alpha[T - 1] + beta[T - 1]))
    node = np.exp(alpha + beta - log_z)
    edge = np.zeros((max(T - 1, 0), K, K))
    for i in range(T - 1):
        log_edge = (alpha[i][:, None] + model.w_trans
                    + (U[i + 1] + beta[i + 1])[None, :]) - log_z
        edge[i] = np.exp(log_edge)
    return node, edge, log_z


def decode(model: CrfModel, sent: Sentence,
           obs_ids: list[list[int]] | None = None) -> tuple[list[Tag], float]:
    """Exact Viterbi argmax; ties resolve to the lowest tag index."""
    T, K = len(sent), model.n_tags
    if T == 0:
        return [], 0.0
    U = model.unary_scores(sent, obs_ids)
    delta = model.w_start + U[0]
    back = np.zeros((T, K), dtype=np.int64)
    for i in range(1, T):
        cand = delta[:, None] + model.w_trans
        back[i] = np.argmax(cand, axis=0)
        delta = cand[back[i], np.arange(K)] + U[i]
    delta = delta + model.w_stop
    last = int(np.argmax(delta))
    best_score = float(delta[last])
    path = [last]
    for i in range(T - 1, 0, -1):
        path.append(int(back[i, path[-1]]))
    path.reverse()
    return [model.tagset[k] for k in path], best_score


def marginal_confidence(model: CrfModel, sent: Sentence, tags: Sequence[Tag]) -> list[float]:
    """Posterior marginal probability of each predicted tag."""
    if not len(sent):
        return []
    node, _, _ = forward_backward(model, sent)
    idx = model.tag_index()
    return [float(node[i, idx[t]]) for i, t in enumerate(tags)]


# ---------------------------------------------------------------------------
# Training


def supervision_sentences(sup: TagDictionary) -> list[Sentence]:
    """Type-level supervision as synthetic one-token sentences, one per
    (type, tag) dictionary entry, in deterministic order."""
    out = []
    for word_type, entries in sup.items():
        for tag in sorted({e.tag for e in entries}, key=str):
            out.append(Sentence((_token_for(word_type),), (tag,)))
    return out


def _token_for(word_type: str):
    from .corpus import Token
    return Token(word_type)


def _objective_and_gradient(model: CrfModel, data, obs_ids_cache, empirical, flat_w):
    """L2-regularized conditional log-likelihood and its gradient."""
    model.set_flat_weights(flat_w)
    K = model.n_tags
    n_obs = len(model.obs_index)
    g_obs = np.zeros((n_obs, K))
    g_trans = np.zeros((K, K))
    g_start = np.zeros(K)
    g_stop = np.zeros(K)
    ll = 0.0
    for sent, obs_ids in zip(data, obs_ids_cache):
        node, edge, log_z = forward_backward(model, sent, obs_ids)
        ll += model.score_sequence(sent, sent.tags, obs_ids) - log_z
        for i, ids in enumerate(obs_ids):
            if ids:
                g_obs[ids] -= node[i]
        g_trans -= edge.sum(axis=0)
        g_start -= node[0]
        g_stop -= node[-1]
    grad = np.concatenate([g_obs.ravel(), g_trans.ravel(), g_start, g_stop])
    grad += empirical
    grad -= model.l2 * flat_w
    ll -= 0.5 * model.l2 * float(flat_w @ flat_w)
    return ll, grad


def _empirical_counts(model: CrfModel, data, obs_ids_cache) -> np.ndarray:
    K = model.n_tags
    n_obs = len(model.obs_index)
    e_obs = np.zeros((n_obs, K))
    e_trans = np.zeros((K, K))
    e_start = np.zeros(K)
    e_stop = np.zeros(K)
    idx = model.tag_index()
    for sent, obs_ids in zip(data, obs_ids_cache):
        ys = [idx[t] for t in sent.tags]
        for i, ids in enumerate(obs_ids):
            for o in ids:
                e_obs[o, ys[i]] += 1.0
        for i in range(1, len(ys)):
            e_trans[ys[i - 1], ys[i]] += 1.0
        e_start[ys[0]] += 1.0
        e_stop[ys[-1]] += 1.0
    return np.concatenate([e_obs.ravel(), e_trans.ravel(), e_start, e_stop])


@dataclass
class TrainLog:
    objectives: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def train_crf(train: Iterable[Sentence], sup: TagDictionary | None = None,
              cfg: FeatureTemplateConfig | None = None, l2: float = 0.1,
              max_iters: int = 200, tol: float = 1e-6,
              extra_tags: Iterable[Tag] = ()) -> tuple[CrfModel, TrainLog]:
    """Fit a CRF on fully tagged sentences.

    Dictionary supervision `sup` is injected as synthetic one-token
    sentences (type-level supervision). The optimizer is full-batch
    gradient ascent with a backtracking (Armijo) line search, stopping
    on relative objective change < `tol`.
    """
    cfg = cfg or FeatureTemplateConfig.extended()
    data = [s for s in train if not s.excluded and len(s) > 0]
    for sent in data:
        if sent.tags is None:
            raise NoTrainingData("training sentences must be fully tagged")
    if sup is not None:
        data = data + supervision_sentences(sup)
    if not data:
        raise NoTrainingData("no usable training sentences")

    tagset_set = {t for sent in data for t in sent.tags}
    tagset_set.update(extra_tags)
    tagset = sorted(tagset_set, key=str)
    if len(tagset) < 2:
        raise DegenerateTagset(f"need >= 2 distinct tags, got {len(tagset)}")

    obs_strings: set[str] = set()
    for sent in data:
        for i in range(len(sent)):
            obs_strings.update(extract_features(sent, i, cfg))
    model = CrfModel.zeros(tagset, obs_strings, cfg, l2=l2)
    obs_ids_cache = [model.observation_ids(s) for s in data]
    empirical = _empirical_counts(model, data, obs_ids_cache)

    w = model.flat_weights()
    log = TrainLog()
    f, g = _objective_and_gradient(model, data, obs_ids_cache, empirical, w)
    log.objectives.append(f)
    step = 1.0
    for _ in range(max_iters):
        log.iterations += 1
        gg = float(g @ g)
        if gg == 0.0:
            log.converged = True
            break
        # Backtracking line search on the ascent direction g.
        t = step
        while True:
            w_new = w + t * g
            f_new, g_new = _objective_and_gradient(model, data, obs_ids_cache, empirical, w_new)
            if f_new >= f + 1e-4 * t * gg or t < 1e-12:
                break
            t *= 0.5
        if f_new < f:
            # Even the tiniest step failed to improve; stop at current point.
            model.set_flat_weights(w)
            log.converged = True
            break
        step = min(t * 2.0, 1e4)
        rel_change = abs(f_new - f) / max(1.0, abs(f))
        w, f, g = w_new, f_new, g_new
        log.objectives.append(f)
        if rel_change < tol:
            log.converged = True
            break
    model.set_flat_weights(w)
    return model, log


def gradient_max_norm(model: CrfModel, data: Sequence[Sentence],
                      sup: TagDictionary | None = None) -> float:
    """Max-norm of the regularized objective gradient at the current weights."""
    sents = [s for s in data if not s.excluded and len(s) > 0]
    if sup is not None:
        sents = sents + supervision_sentences(sup)
    obs_ids_cache = [model.observation_ids(s) for s in sents]
    empirical = _empirical_counts(model, sents, obs_ids_cache)
    _, grad = _objective_and_gradient(model, sents, obs_ids_cache, empirical,
                                      model.flat_weights())
    return float(np.max(np.abs(grad)))


def conditional_log_likelihood(model: CrfModel, data: Sequence[Sentence]) -> float:
    """Unregularized conditional log-likelihood of tagged sentences."""
    ll = 0.0
    for sent in data:
        if sent.excluded or not len(sent):
            continue
        obs_ids = model.observation_ids(sent)
        ll += model.score_sequence(sent, sent.tags, obs_ids) - log_partition(model, sent, obs_ids)
    return ll
