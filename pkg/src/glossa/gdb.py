"""The semi-supervised `gdb` pipeline: tag-dictionary expansion by label
propagation over a type/context graph, then dictionary-constrained EM-HMM
training on raw monolingual text. Optionally seeded with cross-lingually
projected tags, which is the strongest configuration at small training
sizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .corpus import Sentence
from .dictionary import TagDictionary, gold_dictionary
from .graph import LabelGraph, build_label_graph
from .hmm import HmmModel, decode_hmm, train_semisup_hmm
from .propagation import PropagationConfig, PropagationResult, expand_dictionary, propagate
from .tags import Tag


@dataclass(frozen=True)
class GdbConfig:
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    keep_threshold: float = 0.1
    em_iters: int = 3
    lambda_sup: float = 0.7
    min_type_freq: int = 2
    max_suffix_len: int = 3
    provenance_confidence: dict | None = None
    # The pipeline degrades when test-set text leaks into the monolingual
    # pool, so callers must opt in explicitly.
    include_test_in_mono: bool = False


@dataclass
class GdbModel:
    hmm: HmmModel
    dictionary: TagDictionary
    graph: LabelGraph
    propagation: PropagationResult

    def predict(self, sent: Sentence) -> list[Tag]:
        return decode_hmm(self.hmm, sent)


def train_gdb(annotated: Iterable[Sentence], mono: Iterable[Sentence],
              projected: TagDictionary | None = None,
              cfg: GdbConfig | None = None) -> GdbModel:
    """Train the full pipeline.

    Seeds are the gold (type, tag) pairs from `annotated`, unioned with
    `projected` entries when given.
    """
    cfg = cfg or GdbConfig()
    annotated = list(annotated)
    mono = list(mono)
    seeds = gold_dictionary(annotated)
    if projected is not None:
        seeds = seeds.union(projected)
    graph = build_label_graph(mono, seeds, min_type_freq=cfg.min_type_freq,
                              max_suffix_len=cfg.max_suffix_len,
                              provenance_confidence=cfg.provenance_confidence)
    result = propagate(graph, cfg.propagation)
    dictionary = expand_dictionary(result, cfg.keep_threshold, existing=seeds)
    hmm = train_semisup_hmm(mono, annotated, dictionary, em_iters=cfg.em_iters,
                            lambda_sup=cfg.lambda_sup)
    return GdbModel(hmm, dictionary, graph, result)
