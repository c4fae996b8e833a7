"""Bi-LSTM sequence tagger on the minimal autograd core.

Architecture: word embeddings -> single bi-LSTM layer -> a small tag
bottleneck (2H -> 32 -> K) -> per-token log-softmax. Trained with Adam,
sentence-level steps, best-epoch selection on a held-out dev sample.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .autograd import Adam, Parameter, Tensor, add_all
from .corpus import Sentence
from .dictionary import TagDictionary
from .tags import Tag, parse_tag

UNK = "<unk>"


class NeuralError(ValueError):
    pass


@dataclass(frozen=True)
class NeuralConfig:
    input_embed_dim: int = 128
    hidden_dim: int = 128
    tag_embed_dim: int = 32
    lr: float = 0.0002
    max_epochs: int = 50
    dev_size: int = 40
    seed: int = 0
    unk_replace_prob: float = 0.5

    def __post_init__(self) -> None:
        if min(self.input_embed_dim, self.hidden_dim, self.tag_embed_dim) <= 0:
            raise ValueError("all dimensions must be positive")


def _xavier(rng: np.random.RandomState, n_in: int, n_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-bound, bound, size=(n_in, n_out))


class NeuralModel:
    def __init__(self, vocab: dict[str, int], tagset: list[Tag], cfg: NeuralConfig,
                 rng: np.random.RandomState | None = None):
        if UNK not in vocab:
            raise NeuralError("vocabulary must contain the UNK entry")
        self.vocab = vocab
        self.tagset = tagset
        self.cfg = cfg
        rng = rng or np.random.RandomState(cfg.seed)
        E, H, B = cfg.input_embed_dim, cfg.hidden_dim, cfg.tag_embed_dim
        K = len(tagset)
        p: dict[str, Parameter] = {}
        p["emb"] = Parameter(rng.uniform(-0.1, 0.1, size=(len(vocab), E)))
        for direction in ("fwd", "bwd"):
            p[f"{direction}.wx"] = Parameter(_xavier(rng, E, 4 * H))
            p[f"{direction}.wh"] = Parameter(_xavier(rng, H, 4 * H))
            p[f"{direction}.b"] = Parameter(np.zeros(4 * H))
        p["mid.w"] = Parameter(_xavier(rng, 2 * H, B))
        p["mid.b"] = Parameter(np.zeros(B))
        p["out.w"] = Parameter(_xavier(rng, B, K))
        p["out.b"] = Parameter(np.zeros(K))
        self.params = p

    @property
    def n_tags(self) -> int:
        return len(self.tagset)

    def word_id(self, norm: str) -> int:
        return self.vocab.get(norm, self.vocab[UNK])

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.params.items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for k, p in self.params.items():
            p.data = snap[k].copy()

    # -- forward ---------------------------------------------------------------

    def _lstm_direction(self, inputs: list[Tensor], direction: str) -> list[Tensor]:
        H = self.cfg.hidden_dim
        wx = self.params[f"{direction}.wx"]
        wh = self.params[f"{direction}.wh"]
        b = self.params[f"{direction}.b"]
        h = Tensor(np.zeros(H))
        c = Tensor(np.zeros(H))
        states: list[Tensor] = []
        for x in inputs:
            gates = (x @ wx) + (h @ wh) + b
            i = gates.slice(0, H).sigmoid()
            f = gates.slice(H, 2 * H).sigmoid()
            o = gates.slice(2 * H, 3 * H).sigmoid()
            g = gates.slice(3 * H, 4 * H).tanh()
            c = (f * c) + (i * g)
            h = o * c.tanh()
            states.append(h)
        return states

    def token_log_probs(self, word_ids: Sequence[int]) -> list[Tensor]:
        """Per-token log-probability tensors (graph retained for backward)."""
        if not word_ids:
            raise NeuralError("cannot run forward on an empty sentence")
        emb = self.params["emb"]
        inputs = [emb.row(w) for w in word_ids]
        h_fwd = self._lstm_direction(inputs, "fwd")
        h_bwd = self._lstm_direction(list(reversed(inputs)), "bwd")
        h_bwd.reverse()
        out: list[Tensor] = []
        for hf, hb in zip(h_fwd, h_bwd):
            bottleneck = ((hf.concat(hb) @ self.params["mid.w"]) + self.params["mid.b"]).tanh()
            scores = (bottleneck @ self.params["out.w"]) + self.params["out.b"]
            out.append(scores.log_softmax())
        return out

    def sentence_loss(self, word_ids: Sequence[int], tag_ids: Sequence[int]) -> Tensor:
        """Token-level cross-entropy, summed over the sentence."""
        log_probs = self.token_log_probs(word_ids)
        terms = [lp.pick(y) * -1.0 for lp, y in zip(log_probs, tag_ids)]
        return add_all(terms)

    # -- checkpointing -----------------------------------------------------------

    FORMAT_VERSION = "glossa-neural-1"

    def save(self, path) -> None:
        header = {
            "version": self.FORMAT_VERSION,
            "vocab": self.vocab,
            "tagset": [str(t) for t in self.tagset],
            "config": {
                "input_embed_dim": self.cfg.input_embed_dim,
                "hidden_dim": self.cfg.hidden_dim,
                "tag_embed_dim": self.cfg.tag_embed_dim,
                "lr": self.cfg.lr,
                "max_epochs": self.cfg.max_epochs,
                "dev_size": self.cfg.dev_size,
                "seed": self.cfg.seed,
                "unk_replace_prob": self.cfg.unk_replace_prob,
            },
        }
        arrays = {k.replace(".", "__"): p.data for k, p in self.params.items()}
        with open(path, "wb") as fh:
            np.savez(fh, __header__=np.frombuffer(
                json.dumps(header).encode("utf-8"), dtype=np.uint8), **arrays)

    @classmethod
    def load(cls, path) -> "NeuralModel":
        with np.load(path) as data:
            header = json.loads(bytes(data["__header__"]).decode("utf-8"))
            if header["version"] != cls.FORMAT_VERSION:
                raise NeuralError(f"unsupported checkpoint version {header['version']!r}")
            cfg = NeuralConfig(**header["config"])
            tagset = [parse_tag(s) for s in header["tagset"]]
            model = cls(header["vocab"], tagset, cfg)
            for k, p in model.params.items():
                p.data = data[k.replace(".", "__")].astype(np.float64)
        return model


def forward(model: NeuralModel, sent: Sentence) -> np.ndarray:
    """[T, K] array of log-probabilities; unknown norms map to UNK."""
    if not len(sent):
        raise NeuralError("cannot run forward on an empty sentence")
    ids = [model.word_id(n) for n in sent.norms]
    return np.stack([lp.data for lp in model.token_log_probs(ids)])


def predict(model: NeuralModel, sent: Sentence) -> list[Tag]:
    if not len(sent):
        return []
    log_probs = forward(model, sent)
    return [model.tagset[int(k)] for k in np.argmax(log_probs, axis=1)]


def predict_with_confidence(model: NeuralModel, sent: Sentence) -> tuple[list[Tag], list[float]]:
    if not len(sent):
        return [], []
    log_probs = forward(model, sent)
    ids = np.argmax(log_probs, axis=1)
    return ([model.tagset[int(k)] for k in ids],
            [float(np.exp(log_probs[i, k])) for i, k in enumerate(ids)])


@dataclass
class NeuralTrainLog:
    dev_accuracies: list[float] = field(default_factory=list)
    train_losses: list[float] = field(default_factory=list)
    best_epoch: int = -1


def _token_accuracy(model: NeuralModel, sentences: list[Sentence]) -> float:
    correct = total = 0
    tag_index = {t: k for k, t in enumerate(model.tagset)}
    for sent in sentences:
        log_probs = forward(model, sent)
        pred = np.argmax(log_probs, axis=1)
        for k, tag in zip(pred, sent.tags):
            total += 1
            if tag in tag_index and tag_index[tag] == int(k):
                correct += 1
    return correct / total if total else 0.0


def train_neural(train: Iterable[Sentence], cfg: NeuralConfig | None = None,
                 sup: TagDictionary | None = None,
                 extra_tags: Iterable[Tag] = ()) -> tuple[NeuralModel, NeuralTrainLog]:
    """Train on tagged sentences; returns the best-dev-accuracy snapshot.

    Dictionary supervision is injected as synthetic one-token sentences,
    the same augmentation stream the CRF consumes.
    """
    from .crf import supervision_sentences

    cfg = cfg or NeuralConfig()
    data = [s for s in train if not s.excluded and len(s) > 0]
    for sent in data:
        if sent.tags is None:
            raise NeuralError("training sentences must be fully tagged")
    if sup is not None:
        data = data + supervision_sentences(sup)
    if len(data) <= cfg.dev_size:
        raise NeuralError(
            f"need more than dev_size={cfg.dev_size} sentences, got {len(data)}")

    rng = np.random.RandomState(cfg.seed)
    order = rng.permutation(len(data))
    dev = [data[i] for i in order[: cfg.dev_size]]
    pool = [data[i] for i in order[cfg.dev_size:]]

    counts: dict[str, int] = {}
    for sent in pool:
        for norm in sent.norms:
            counts[norm] = counts.get(norm, 0) + 1
    vocab = {UNK: 0}
    for norm in sorted(counts):
        vocab[norm] = len(vocab)
    singletons = {w for w, c in counts.items() if c == 1}

    tagset = sorted({t for s in data for t in s.tags} | set(extra_tags), key=str)
    model = NeuralModel(vocab, tagset, cfg, rng)
    tag_index = {t: k for k, t in enumerate(tagset)}
    optimizer = Adam(model.params, lr=cfg.lr)

    log = NeuralTrainLog()
    best_acc = -1.0
    best_snap = model.snapshot()
    unk_id = vocab[UNK]
    for epoch in range(cfg.max_epochs):
        epoch_loss = 0.0
        for idx in rng.permutation(len(pool)):
            sent = pool[idx]
            ids = []
            for norm in sent.norms:
                wid = vocab[norm]
                if norm in singletons and rng.random_sample() < cfg.unk_replace_prob:
                    wid = unk_id
                ids.append(wid)
            tag_ids = [tag_index[t] for t in sent.tags]
            loss = model.sentence_loss(ids, tag_ids)
            epoch_loss += float(loss.data)
            model.zero_grad()
            loss.backward()
            optimizer.step()
        log.train_losses.append(epoch_loss / max(1, sum(len(s) for s in pool)))
        acc = _token_accuracy(model, dev) if dev else -log.train_losses[-1]
        log.dev_accuracies.append(acc)
        if acc > best_acc:
            best_acc = acc
            log.best_epoch = epoch
            best_snap = model.snapshot()
    model.restore(best_snap)
    return model, log


def gradient_check(model: NeuralModel, batch: list[Sentence], *,
                   sample_fraction: float = 0.01, min_samples: int = 50,
                   step: float = 1e-4, seed: int = 0,
                   rel_guard: float = 1e-4) -> float:
    """Max relative error between analytic and central-difference gradients
    on a random sample of parameter coordinates."""
    tag_index = {t: k for k, t in enumerate(model.tagset)}
    examples = []
    for sent in batch:
        ids = [model.word_id(n) for n in sent.norms]
        tag_ids = [tag_index[t] for t in sent.tags]
        examples.append((ids, tag_ids))

    def batch_loss() -> float:
        total = 0.0
        for ids, tag_ids in examples:
            total += float(model.sentence_loss(ids, tag_ids).data)
        return total

    model.zero_grad()
    for ids, tag_ids in examples:
        model.sentence_loss(ids, tag_ids).backward()
    analytic = {k: (p.grad if p.grad is not None else np.zeros_like(p.data))
                for k, p in model.params.items()}

    rng = np.random.RandomState(seed)
    keys = sorted(model.params)
    sizes = np.array([model.params[k].data.size for k in keys])
    total_size = int(sizes.sum())
    n_samples = max(min_samples, int(sample_fraction * total_size))
    n_samples = min(n_samples, total_size)
    flat_choice = rng.choice(total_size, size=n_samples, replace=False)

    max_rel = 0.0
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    for flat_idx in flat_choice:
        which = int(np.searchsorted(offsets, flat_idx, side="right") - 1)
        key = keys[which]
        local = int(flat_idx - offsets[which])
        p = model.params[key]
        flat = p.data.reshape(-1)
        original = flat[local]
        flat[local] = original + step
        f_plus = batch_loss()
        flat[local] = original - step
        f_minus = batch_loss()
        flat[local] = original
        numeric = (f_plus - f_minus) / (2.0 * step)
        ga = float(analytic[key].reshape(-1)[local])
        rel = abs(ga - numeric) / max(abs(ga) + abs(numeric), rel_guard)
        max_rel = max(max_rel, rel)
    return max_rel
