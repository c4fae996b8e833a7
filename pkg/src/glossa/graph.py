"""Type/context label graph for dictionary expansion.

Word-type nodes (frequency >= 2 in the monolingual text) connect to
context-feature nodes (previous word, next word, suffixes up to 3
characters) with positive-PMI weights. Seed nodes carry a uniform
distribution over their dictionary tags.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import sparse

from .corpus import Sentence
from .dictionary import TagDictionary
from .tags import Tag

BOS = "<s>"
EOS = "</s>"

TYPE_PREFIX = "type:"


class EmptyCorpus(ValueError):
    pass


def type_node(word: str) -> str:
    return TYPE_PREFIX + word


def is_type_node(name: str) -> bool:
    return name.startswith(TYPE_PREFIX)


def type_of(name: str) -> str:
    return name[len(TYPE_PREFIX):]


@dataclass
class LabelGraph:
    nodes: list[str]
    index: dict[str, int]
    weights: sparse.csr_matrix          # symmetric, strictly positive entries
    labels: list[Tag]
    seeds: dict[str, np.ndarray]        # node name -> distribution over labels
    seed_confidence: dict[str, float] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def neighbors(self, name: str) -> list[tuple[str, float]]:
        row = self.weights.getrow(self.index[name])
        return [(self.nodes[j], float(v)) for j, v in zip(row.indices, row.data)]

    def has_path(self, a: str, b: str) -> bool:
        from scipy.sparse.csgraph import connected_components
        n, comp = connected_components(self.weights, directed=False)
        return comp[self.index[a]] == comp[self.index[b]]


def _occurrence_features(norms: tuple[str, ...], i: int, max_suffix_len: int) -> list[str]:
    word = norms[i]
    feats = [
        f"prev:{norms[i - 1] if i > 0 else BOS}",
        f"next:{norms[i + 1] if i + 1 < len(norms) else EOS}",
    ]
    for length in range(1, min(max_suffix_len, len(word)) + 1):
        feats.append(f"suf{length}:{word[-length:]}")
    return feats


def build_label_graph(mono: Iterable[Sentence], seeds: TagDictionary,
                      min_type_freq: int = 2, max_suffix_len: int = 3,
                      provenance_confidence: dict[str, float] | None = None) -> LabelGraph:
    """PMI-weighted bipartite graph between word types and context features.

    ``provenance_confidence`` scales the injection probability of seeds by
    their provenance (default 1.0 for all).
    """
    sentences = [s for s in mono if not s.excluded and len(s) > 0]
    if not sentences:
        raise EmptyCorpus("no usable monolingual sentences")

    freq: Counter = Counter()
    for sent in sentences:
        freq.update(sent.norms)
    kept = {w for w, c in freq.items() if c >= min_type_freq}

    joint: Counter = Counter()
    type_events: Counter = Counter()
    feat_events: Counter = Counter()
    total = 0
    for sent in sentences:
        norms = sent.norms
        for i, word in enumerate(norms):
            if word not in kept:
                continue
            for feat in _occurrence_features(norms, i, max_suffix_len):
                joint[(word, feat)] += 1
                type_events[word] += 1
                feat_events[feat] += 1
                total += 1

    edges: dict[tuple[str, str], float] = {}
    feature_nodes: set[str] = set()
    for (word, feat), c in joint.items():
        pmi = np.log(c * total / (type_events[word] * feat_events[feat]))
        if pmi > 0.0:
            edges[(type_node(word), feat)] = float(pmi)
            feature_nodes.add(feat)

    nodes = sorted(type_node(w) for w in kept) + sorted(feature_nodes)
    index = {name: i for i, name in enumerate(nodes)}
    if edges:
        rows, cols, vals = [], [], []
        for (a, b), w in edges.items():
            ia, ib = index[a], index[b]
            rows += [ia, ib]
            cols += [ib, ia]
            vals += [w, w]
        weights = sparse.csr_matrix((vals, (rows, cols)), shape=(len(nodes), len(nodes)))
    else:
        weights = sparse.csr_matrix((len(nodes), len(nodes)))

    provenance_confidence = provenance_confidence or {}
    labels = sorted({e.tag for w in seeds.types() for e in seeds.entries(w)}, key=str)
    label_index = {t: k for k, t in enumerate(labels)}
    seed_dists: dict[str, np.ndarray] = {}
    confidence: dict[str, float] = {}
    for word in seeds.types():
        name = type_node(word)
        if name not in index:
            continue
        tags = sorted(seeds.tags_for(word), key=str)
        dist = np.zeros(len(labels))
        for tag in tags:
            dist[label_index[tag]] = 1.0 / len(tags)
        seed_dists[name] = dist
        confidence[name] = max(
            provenance_confidence.get(e.provenance, 1.0) for e in seeds.entries(word))
    return LabelGraph(nodes, index, weights, labels, seed_dists, confidence)
