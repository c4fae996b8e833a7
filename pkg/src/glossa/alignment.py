"""IBM Model 1 word alignment trained by EM over parallel sentences.

The lexical table is directional: t(target_word | source_word), with a
NULL token on the source side. Link extraction picks, for each target
token, the argmax source position, reporting either the per-sentence
posterior (normalized over the sentence's real source tokens) or the
raw lexical probability.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

NULL = "<null>"

SentencePair = tuple[Sequence[str], Sequence[str]]  # (target tokens, source tokens)


class EmptyCorpus(ValueError):
    pass


@dataclass
class Link:
    target_pos: int
    source_pos: int
    prob: float


@dataclass
class AlignmentModel:
    t: dict[tuple[str, str], float]
    target_vocab: Counter = field(default_factory=Counter)
    source_vocab: Counter = field(default_factory=Counter)
    log_likelihoods: list[float] = field(default_factory=list)

    def prob(self, target_word: str, source_word: str) -> float:
        return self.t.get((target_word, source_word), 0.0)

    def source_distribution_sums(self) -> dict[str, float]:
        sums: dict[str, float] = defaultdict(float)
        for (_f, e), p in self.t.items():
            sums[e] += p
        return dict(sums)


def _corpus_log_likelihood(pairs: list[tuple[list[str], list[str]]],
                           t: dict[tuple[str, str], float]) -> float:
    import math
    ll = 0.0
    for target, source in pairs:
        denom = math.log(len(source))
        for f in target:
            total = sum(t.get((f, e), 0.0) for e in source)
            ll += math.log(max(total, 1e-300)) - denom
    return ll


def train_ibm1(pairs: Iterable[SentencePair], iters: int = 20) -> AlignmentModel:
    """EM with uniform initialization over co-occurring word pairs.

    Records corpus log-likelihood (of the parameters entering each
    iteration); EM guarantees the sequence is non-decreasing.
    """
    data: list[tuple[list[str], list[str]]] = []
    target_vocab: Counter = Counter()
    source_vocab: Counter = Counter()
    for target, source in pairs:
        target, source = list(target), list(source)
        if not target or not source:
            continue
        target_vocab.update(target)
        source_vocab.update(source)
        data.append((target, [NULL] + source))
    if not data:
        raise EmptyCorpus("no non-empty sentence pairs")
    if iters < 1:
        raise ValueError("iters must be >= 1")

    uniform = 1.0 / len(target_vocab)
    t: dict[tuple[str, str], float] = {}
    for target, source in data:
        for f in target:
            for e in source:
                t[(f, e)] = uniform

    log_likelihoods: list[float] = []
    for _ in range(iters):
        log_likelihoods.append(_corpus_log_likelihood(data, t))
        count: dict[tuple[str, str], float] = defaultdict(float)
        total: dict[str, float] = defaultdict(float)
        for target, source in data:
            for f in target:
                denom = sum(t[(f, e)] for e in source)
                if denom <= 0.0:
                    continue
                for e in source:
                    delta = t[(f, e)] / denom
                    count[(f, e)] += delta
                    total[e] += delta
        for (f, e) in t:
            t[(f, e)] = count[(f, e)] / total[e] if total[e] > 0.0 else 0.0
    log_likelihoods.append(_corpus_log_likelihood(data, t))
    return AlignmentModel(t, target_vocab, source_vocab, log_likelihoods)


def extract_links(model: AlignmentModel, pair: SentencePair,
                  prob_source: str = "posterior") -> list[Link]:
    """Best source link per target token.

    The posterior normalizes t over the sentence's real source tokens, so
    each target token's candidate distribution sums to 1; NULL never
    yields a link. Ties go to the leftmost source position.
    """
    if prob_source not in ("posterior", "lexical"):
        raise ValueError(f"unknown prob_source {prob_source!r}")
    target, source = list(pair[0]), list(pair[1])
    links: list[Link] = []
    for i, f in enumerate(target):
        scores = [model.prob(f, e) for e in source]
        total = sum(scores)
        if total <= 0.0:
            continue
        best_j = max(range(len(source)), key=lambda j: (scores[j], -j))
        prob = scores[best_j] / total if prob_source == "posterior" else scores[best_j]
        links.append(Link(i, best_j, prob))
    return links


def link_posteriors(model: AlignmentModel, pair: SentencePair) -> list[list[float]]:
    """Candidate-link distribution per target token (rows sum to 1)."""
    target, source = list(pair[0]), list(pair[1])
    out = []
    for f in target:
        scores = [model.prob(f, e) for e in source]
        total = sum(scores)
        out.append([s / total if total > 0 else 0.0 for s in scores])
    return out


def load_external_links(path) -> list[list[Link]]:
    """Externally computed alignments: one `i-j p` triple per line with
    i = target (Griko) position, j = source (Italian) position; sentence
    blocks separated by blank lines."""
    blocks: list[list[Link]] = [[]]
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                if blocks[-1]:
                    blocks.append([])
                continue
            if line.startswith("#"):
                continue
            ij, p = line.split()
            i, j = ij.split("-")
            blocks[-1].append(Link(int(i), int(j), float(p)))
    if blocks and not blocks[-1]:
        blocks.pop()
    return blocks


def save_links(blocks: list[list[Link]], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for block in blocks:
            for link in block:
                fh.write(f"{link.target_pos}-{link.source_pos} {link.prob!r}\n")
            fh.write("\n")
