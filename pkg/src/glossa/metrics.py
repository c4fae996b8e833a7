"""Evaluation metrics: token accuracy over non-excluded streams, per-tag
precision/recall, OOV rate, and train/test vocabulary coverage."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Narrative, Sentence
from .tags import Tag


def token_accuracy(gold: Sequence[Sentence], predicted: Sequence[Sequence[Tag]]) -> float:
    """Accuracy over non-excluded tokens; `predicted` parallels `gold`."""
    correct = total = 0
    for sent, pred in zip(gold, predicted):
        if sent.excluded:
            continue
        if sent.tags is None or len(pred) != len(sent):
            raise ValueError("gold tags missing or prediction length mismatch")
        for g, p in zip(sent.tags, pred):
            total += 1
            correct += int(g == p)
    return correct / total if total else 0.0


@dataclass
class TagPRF:
    tag: Tag
    precision: float
    recall: float
    f1: float
    support: int


def per_tag_prf(gold: Sequence[Sentence], predicted: Sequence[Sequence[Tag]]) -> list[TagPRF]:
    tp: Counter = Counter()
    fp: Counter = Counter()
    fn: Counter = Counter()
    for sent, pred in zip(gold, predicted):
        if sent.excluded:
            continue
        for g, p in zip(sent.tags, pred):
            if g == p:
                tp[g] += 1
            else:
                fp[p] += 1
                fn[g] += 1
    out = []
    for tag in sorted(set(tp) | set(fp) | set(fn), key=str):
        p_den = tp[tag] + fp[tag]
        r_den = tp[tag] + fn[tag]
        precision = tp[tag] / p_den if p_den else 0.0
        recall = tp[tag] / r_den if r_den else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        out.append(TagPRF(tag, precision, recall, f1, r_den))
    return out


def oov_rate(train_types: set[str], test: Iterable[Sentence]) -> float:
    """Fraction of non-excluded test tokens whose type is unseen in training."""
    oov = total = 0
    for sent in test:
        if sent.excluded:
            continue
        for norm in sent.norms:
            total += 1
            oov += int(norm not in train_types)
    return oov / total if total else 0.0


@dataclass
class CoverageReport:
    token_coverage: float   # % of test tokens whose type is covered
    type_coverage: float    # % of test types covered

    def as_dict(self) -> dict[str, float]:
        return {"token_coverage": self.token_coverage, "type_coverage": self.type_coverage}


def vocabulary_coverage(covered_types: set[str], test: Iterable[Sentence]) -> CoverageReport:
    test_tokens = 0
    covered_tokens = 0
    test_types: set[str] = set()
    for sent in test:
        if sent.excluded:
            continue
        for norm in sent.norms:
            test_tokens += 1
            covered_tokens += int(norm in covered_types)
            test_types.add(norm)
    token_cov = covered_tokens / test_tokens if test_tokens else 0.0
    type_cov = (len(test_types & covered_types) / len(test_types)) if test_types else 0.0
    return CoverageReport(token_cov, type_cov)


def narrative_sentences(narratives: Iterable[Narrative]) -> list[Sentence]:
    return [s for n in narratives for s in n.active_sentences()]
