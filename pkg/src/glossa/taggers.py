"""Uniform tagger interface over the CRF, neural, HMM-pipeline and
baseline models, so the experiment harness and the annotation service can
train and apply them interchangeably.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Protocol

from .corpus import Sentence
from .crf import CrfModel, decode, marginal_confidence, train_crf
from .dictionary import TagDictionary
from .features import FeatureTemplateConfig
from .gdb import GdbConfig, GdbModel, train_gdb
from .hmm import posterior_confidence
from .neural import NeuralConfig, predict_with_confidence, train_neural
from .tags import Tag


@dataclass
class TrainData:
    """Everything a tagger may consume: the gold pool, optional type-level
    dictionary supervision, optional raw monolingual text."""
    annotated: list[Sentence]
    dictionary: TagDictionary | None = None
    mono: list[Sentence] | None = None
    seed: int = 0

    def with_pool(self, annotated: list[Sentence]) -> "TrainData":
        return replace(self, annotated=annotated)


class Fitted(Protocol):
    def predict(self, sent: Sentence) -> list[Tag]: ...
    def predict_with_confidence(self, sent: Sentence) -> tuple[list[Tag], list[float]]: ...


class Tagger(Protocol):
    name: str
    def train(self, data: TrainData) -> Fitted: ...


# -- majority baseline ---------------------------------------------------------

@dataclass
class FittedMajority:
    by_type: dict[str, tuple[Tag, float]]
    fallback: Tag

    def predict(self, sent: Sentence) -> list[Tag]:
        return [self.by_type.get(n, (self.fallback, 0.0))[0] for n in sent.norms]

    def predict_with_confidence(self, sent: Sentence):
        tags, confs = [], []
        for n in sent.norms:
            tag, conf = self.by_type.get(n, (self.fallback, 0.0))
            tags.append(tag)
            confs.append(conf)
        return tags, confs


@dataclass
class MajorityTagger:
    name: str = "majority"

    def train(self, data: TrainData) -> FittedMajority:
        votes: dict[str, Counter] = {}
        global_votes: Counter = Counter()
        for sent in data.annotated:
            if sent.excluded or sent.tags is None:
                continue
            for norm, tag in zip(sent.norms, sent.tags):
                votes.setdefault(norm, Counter())[tag] += 1
                global_votes[tag] += 1
        if data.dictionary is not None:
            for word in data.dictionary.types():
                slot = votes.setdefault(word, Counter())
                for entry in data.dictionary.entries(word):
                    slot[entry.tag] += entry.votes
        by_type = {}
        for norm, counter in votes.items():
            ranked = counter.most_common()
            best, count = min(
                ((t, c) for t, c in ranked if c == ranked[0][1]),
                key=lambda tc: str(tc[0]))
            by_type[norm] = (best, count / sum(counter.values()))
        fallback = min(
            (t for t, c in global_votes.items() if c == max(global_votes.values())),
            key=str)
        return FittedMajority(by_type, fallback)


# -- CRF ------------------------------------------------------------------------

@dataclass
class FittedCrf:
    model: CrfModel

    def predict(self, sent: Sentence) -> list[Tag]:
        return decode(self.model, sent)[0]

    def predict_with_confidence(self, sent: Sentence):
        tags = decode(self.model, sent)[0]
        return tags, marginal_confidence(self.model, sent, tags)


@dataclass
class CrfTagger:
    name: str = "crf-mod"
    template: FeatureTemplateConfig = field(default_factory=FeatureTemplateConfig.extended)
    l2: float = 0.1
    max_iters: int = 100
    tol: float = 1e-6

    @classmethod
    def basic(cls, **kw) -> "CrfTagger":
        return cls(name="crf", template=FeatureTemplateConfig.basic(), **kw)

    def train(self, data: TrainData) -> FittedCrf:
        model, _ = train_crf(data.annotated, sup=data.dictionary, cfg=self.template,
                             l2=self.l2, max_iters=self.max_iters, tol=self.tol)
        return FittedCrf(model)


# -- neural ------------------------------------------------------------------------

@dataclass
class FittedNeural:
    model: object

    def predict(self, sent: Sentence) -> list[Tag]:
        return predict_with_confidence(self.model, sent)[0]

    def predict_with_confidence(self, sent: Sentence):
        return predict_with_confidence(self.model, sent)


@dataclass
class NeuralTagger:
    name: str = "neural"
    config: NeuralConfig = field(default_factory=NeuralConfig)

    def train(self, data: TrainData) -> FittedNeural:
        cfg = replace(self.config, seed=self.config.seed + data.seed)
        model, _ = train_neural(data.annotated, cfg, sup=data.dictionary)
        return FittedNeural(model)


# -- gdb (label propagation + constrained EM-HMM) -----------------------------------

@dataclass
class FittedGdb:
    model: GdbModel

    def predict(self, sent: Sentence) -> list[Tag]:
        return self.model.predict(sent)

    def predict_with_confidence(self, sent: Sentence):
        tags = self.model.predict(sent)
        return tags, posterior_confidence(self.model.hmm, sent, tags)


@dataclass
class GdbTagger:
    name: str = "gdb"
    config: GdbConfig = field(default_factory=GdbConfig)

    def train(self, data: TrainData) -> FittedGdb:
        mono = data.mono if data.mono is not None else [s.without_tags() for s in data.annotated]
        model = train_gdb(data.annotated, mono, projected=data.dictionary,
                          cfg=self.config)
        return FittedGdb(model)


DEFAULT_TAGGERS = ("crf", "crf-mod", "neural", "gdb", "majority")


def make_tagger(name: str, *, neural_config: NeuralConfig | None = None,
                gdb_config: GdbConfig | None = None,
                crf_max_iters: int = 100) -> Tagger:
    if name == "crf":
        return CrfTagger.basic(max_iters=crf_max_iters)
    if name == "crf-mod":
        return CrfTagger(max_iters=crf_max_iters)
    if name == "neural":
        return NeuralTagger(config=neural_config or NeuralConfig())
    if name == "gdb":
        return GdbTagger(config=gdb_config or GdbConfig())
    if name == "majority":
        return MajorityTagger()
    raise ValueError(f"unknown tagger {name!r}")
