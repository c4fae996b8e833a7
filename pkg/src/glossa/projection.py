"""Cross-lingual type-level tag projection through word alignments.

High-precision filtering: a link is kept iff its probability is exactly
1.0, or it exceeds 0.9 and both linked tokens occur more than 5 times
in the corpus the links were extracted from. Kept links vote per Griko
type; a majority tag wins, ties discard the type.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

from .alignment import AlignmentModel, Link, extract_links, train_ibm1
from .corpus import ParallelCorpus, ParallelNarrative
from .dictionary import TagDictionary
from .tags import Tag

MODES = ("train_only", "transductive")


class MissingItalianTags(ValueError):
    pass


@dataclass(frozen=True)
class ProjectionFilter:
    p_exact: float = 1.0
    p_high: float = 0.9
    min_freq: int = 5
    prob_source: str = "posterior"

    def __post_init__(self) -> None:
        if not (0.0 < self.p_high < self.p_exact <= 1.0):
            raise ValueError("need 0 < p_high < p_exact <= 1")
        if self.min_freq < 0:
            raise ValueError("min_freq must be >= 0")

    def keeps(self, prob: float, target_freq: int, source_freq: int) -> bool:
        if prob >= self.p_exact:
            return True
        return (prob > self.p_high
                and target_freq > self.min_freq
                and source_freq > self.min_freq)


@dataclass
class TaggedPair:
    """One aligned sentence pair ready for projection."""
    griko: Sequence[str]            # norm forms
    italian: Sequence[str]          # norm forms
    italian_tags: Sequence[Tag] | None


def project_type_dictionary(pairs: Sequence[TaggedPair],
                            links_per_pair: Sequence[Sequence[Link]],
                            filt: ProjectionFilter | None = None) -> TagDictionary:
    """Filter links and majority-vote a tag per Griko type.

    Frequencies for the filter are token counts over `pairs` themselves.
    Pairs lacking Italian tags raise.
    """
    filt = filt or ProjectionFilter()
    griko_freq: Counter = Counter()
    italian_freq: Counter = Counter()
    for pair in pairs:
        griko_freq.update(pair.griko)
        italian_freq.update(pair.italian)

    votes: dict[str, Counter] = defaultdict(Counter)
    for pair, links in zip(pairs, links_per_pair):
        if not links:
            continue
        if pair.italian_tags is None:
            raise MissingItalianTags(
                f"pair with Griko side {list(pair.griko)[:3]}... has links but no Italian tags")
        for link in links:
            g_word = pair.griko[link.target_pos]
            i_word = pair.italian[link.source_pos]
            if not filt.keeps(link.prob, griko_freq[g_word], italian_freq[i_word]):
                continue
            votes[g_word][pair.italian_tags[link.source_pos]] += 1

    out = TagDictionary()
    for g_word, tag_votes in votes.items():
        ranked = tag_votes.most_common()
        if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
            continue  # majority tie: discard the type, precision over recall
        tag, count = ranked[0]
        out.add(g_word, tag, "projected", count)
    return out


def pairs_from_parallel(parallel: ParallelCorpus,
                        require_tags: bool = True) -> list[TaggedPair]:
    """Flatten a parallel corpus into per-sentence pairs, skipping excluded
    sentences on either side."""
    out: list[TaggedPair] = []
    for narrative in parallel:
        tags_by_sentence = narrative.italian_tags
        for s_idx, (g_sent, i_sent) in enumerate(
                zip(narrative.griko.sentences, narrative.italian.sentences)):
            if g_sent.excluded or i_sent.excluded or not len(g_sent) or not len(i_sent):
                continue
            italian_tags = None
            if tags_by_sentence is not None:
                italian_tags = tags_by_sentence[s_idx]
            elif require_tags:
                raise MissingItalianTags(f"{narrative.id}: no Italian tags")
            out.append(TaggedPair(g_sent.norms, i_sent.norms, italian_tags))
    return out


@dataclass
class ProjectionResult:
    dictionary: TagDictionary
    model: AlignmentModel
    pairs: list[TaggedPair]
    links: list[list[Link]]


def build_projected_dictionary(train: ParallelCorpus,
                               test: ParallelCorpus | None = None,
                               mode: str = "train_only",
                               filt: ProjectionFilter | None = None,
                               em_iters: int = 20,
                               external_links: list[list[Link]] | None = None
                               ) -> ProjectionResult:
    """Full projection pipeline: align (or ingest links), filter, vote.

    ``transductive`` additionally aligns and projects over the test-side
    parallel data; its dictionary is built from a superset of pairs.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    pairs = pairs_from_parallel(train)
    if mode == "transductive":
        if test is None:
            raise ValueError("transductive mode requires test-side parallel data")
        pairs = pairs + pairs_from_parallel(test)
    filt = filt or ProjectionFilter()
    if external_links is not None:
        if len(external_links) != len(pairs):
            raise ValueError(
                f"{len(external_links)} link blocks for {len(pairs)} sentence pairs")
        model = AlignmentModel(t={})
        links = external_links
    else:
        model = train_ibm1([(p.griko, p.italian) for p in pairs], iters=em_iters)
        links = [extract_links(model, (p.griko, p.italian), filt.prob_source)
                 for p in pairs]
    dictionary = project_type_dictionary(pairs, links, filt)
    return ProjectionResult(dictionary, model, pairs, links)
