"""Seeded synthetic diglot benchmark data.

Generates a small invented language with tag-characteristic (but
partially overlapping) suffixes, a parallel "Italian-like" translation
side with per-token tags, slight reordering and tag noise, and a
narrative structure suitable for the projection, semi-supervised and
active-learning experiments. The word-to-word lexicon is returned so
tests can score projected dictionaries against the truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, Narrative, ParallelCorpus, ParallelNarrative, Sentence, Token
from .tags import Tag, atomic, parse_tag

# tag -> (vocabulary size, Griko suffix pool, Italian suffix pool).
# Open-class suffix pools overlap across tags on purpose: affixes alone
# should be informative but not decisive.
LEXICON_SPEC: dict[str, tuple[int, tuple[str, ...], tuple[str, ...]]] = {
    "V": (110, ("ò", "èi", "ùme", "ì", "a"), ("are", "ire", "ano")),
    "N": (140, ("o", "a", "i"), ("o", "a")),
    "Adj": (60, ("o", "a", "ì"), ("oso", "ale")),
    "Adv": (40, ("a", "ù", "ì"), ("mente", "i")),
    "Pr": (8, ("u", "e"), ("ui", "ei")),
    "D": (6, ("o", "i"), ("il", "la")),
    "C": (6, ("e", "i"), ("che", "se")),
    "P+D": (6, ("ì", "ù"), ("allo", "alla")),
}

# frequency skew for open-class sampling: 1/rank**ZIPF_EXPONENT
ZIPF_EXPONENT = 0.8

# Slots are a single tag or a tuple of alternatives. Ambiguous slots put
# different tags in the *same* context, so only the word's identity (from
# gold data, raw text or a projected dictionary) can resolve them.
Slot = str | tuple[str, ...]
AMBIG_OPEN: tuple[str, ...] = ("V", "N", "Adj", "Adv")

TEMPLATES: tuple[tuple[Slot, ...], ...] = (
    ("D", "N", "V", "D", "N"),
    ("Pr", "V", "Adv"),
    ("D", "N", "V", "Adj"),
    ("C", "Pr", "V", "D", "N"),
    ("V", "P+D", "N"),
    ("D", "Adj", "N", "V", "Adv"),
    ("Pr", "V", "D", "N", "C", "Pr", "V"),
    ("D", "N", "V", "P+D", "N"),
    # ambiguous contexts
    ("Pr", AMBIG_OPEN, AMBIG_OPEN),
    ("C", AMBIG_OPEN, AMBIG_OPEN, "Pr"),
    (AMBIG_OPEN, AMBIG_OPEN, "P+D", "N"),
    ("Pr", AMBIG_OPEN, AMBIG_OPEN, AMBIG_OPEN),
)

END_PUNCT = (".", ".", ".", "!", "?")

CONSONANTS = "kptvmnlrsdg"
VOWELS = "aeiou"
ITALIAN_ONSETS = ("b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v")


@dataclass(frozen=True)
class SyntheticConfig:
    seed: int = 0
    n_parallel_narratives: int = 24
    sentences_per_parallel: int = 12
    n_annotated_narratives: int = 3
    sentences_per_annotated: int = 10
    n_test_narratives: int = 10
    test_min_sentences: int = 5
    test_max_sentences: int = 16
    italian_tag_noise: float = 0.03
    adj_noun_swap_prob: float = 0.5


@dataclass
class SyntheticDiglot:
    annotated: list[Narrative]          # small gold Griko training set
    mono: Corpus                        # raw Griko side of all train narratives
    parallel_train: ParallelCorpus      # tagged Italian side
    test: list[Narrative]               # gold-tagged test narratives
    parallel_test: ParallelCorpus
    lexicon: dict[str, tuple[str, Tag]]  # griko norm -> (italian norm, true tag)
    tagset: list[Tag] = field(default_factory=list)

    def annotated_sentences(self) -> list[Sentence]:
        return [s for n in self.annotated for s in n.active_sentences()]

    def test_sentences(self) -> list[Sentence]:
        return [s for n in self.test for s in n.active_sentences()]


def _griko_word(rng: np.random.RandomState, suffix: str) -> str:
    n_syll = rng.randint(1, 3)
    stem = "".join(CONSONANTS[rng.randint(len(CONSONANTS))] + VOWELS[rng.randint(len(VOWELS))]
                   for _ in range(n_syll))
    return stem + suffix


def _italian_word(rng: np.random.RandomState, suffix: str) -> str:
    n_syll = rng.randint(1, 3)
    stem = "".join(ITALIAN_ONSETS[rng.randint(len(ITALIAN_ONSETS))]
                   + VOWELS[rng.randint(len(VOWELS))] for _ in range(n_syll))
    return stem + suffix


def _build_lexicon(rng: np.random.RandomState):
    griko_by_tag: dict[str, list[str]] = {}
    lexicon: dict[str, tuple[str, Tag]] = {}
    used_g: set[str] = set()
    used_i: set[str] = set()
    for tag_str, (size, g_sufs, i_sufs) in LEXICON_SPEC.items():
        tag = parse_tag(tag_str)
        words = []
        for k in range(size):
            while True:
                g = _griko_word(rng, g_sufs[rng.randint(len(g_sufs))])
                if g not in used_g:
                    break
            while True:
                i = _italian_word(rng, i_sufs[rng.randint(len(i_sufs))])
                if i not in used_i:
                    break
            used_g.add(g)
            used_i.add(i)
            words.append(g)
            lexicon[g] = (i, tag)
        griko_by_tag[tag_str] = words
    return griko_by_tag, lexicon


def _zipf_weights(n: int) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** ZIPF_EXPONENT
    return w / w.sum()


def _sample_word(rng, words, weights) -> str:
    return words[rng.choice(len(words), p=weights)]


def _make_sentence(rng, griko_by_tag, weights_by_tag):
    template = TEMPLATES[rng.randint(len(TEMPLATES))]
    g_tokens: list[str] = []
    g_tags: list[Tag] = []
    for slot in template:
        tag_str = slot if isinstance(slot, str) else slot[rng.randint(len(slot))]
        word = _sample_word(rng, griko_by_tag[tag_str], weights_by_tag[tag_str])
        g_tokens.append(word)
        g_tags.append(parse_tag(tag_str))
    punct = END_PUNCT[rng.randint(len(END_PUNCT))]
    g_tokens.append(punct)
    g_tags.append(atomic("PUNCT"))
    return g_tokens, g_tags


def _translate(rng, g_tokens, g_tags, lexicon, cfg: SyntheticConfig, all_tags):
    i_tokens: list[str] = []
    i_tags: list[Tag] = []
    for tok, tag in zip(g_tokens, g_tags):
        if tag == atomic("PUNCT"):
            i_tokens.append(tok)
            i_tags.append(tag)
        else:
            ital, true_tag = lexicon[tok]
            i_tokens.append(ital)
            i_tags.append(true_tag)
    # Adjective/noun order flips on the Italian side about half the time.
    k = 0
    while k < len(i_tags) - 1:
        if (str(g_tags[k]) == "Adj" and str(g_tags[k + 1]) == "N"
                and rng.random_sample() < cfg.adj_noun_swap_prob):
            i_tokens[k], i_tokens[k + 1] = i_tokens[k + 1], i_tokens[k]
            i_tags[k], i_tags[k + 1] = i_tags[k + 1], i_tags[k]
            k += 2
        else:
            k += 1
    # Simulated tagger noise on the Italian side.
    for k in range(len(i_tags)):
        if i_tags[k] != atomic("PUNCT") and rng.random_sample() < cfg.italian_tag_noise:
            i_tags[k] = all_tags[rng.randint(len(all_tags))]
    return i_tokens, i_tags


def _narrative(rng, story_id, n_sentences, griko_by_tag, weights_by_tag, lexicon,
               cfg, all_tags):
    g_sents: list[Sentence] = []
    i_sents: list[Sentence] = []
    i_tagseqs: list[tuple[Tag, ...]] = []
    for _ in range(n_sentences):
        g_tokens, g_tags = _make_sentence(rng, griko_by_tag, weights_by_tag)
        i_tokens, i_tags = _translate(rng, g_tokens, g_tags, lexicon, cfg, all_tags)
        g_sents.append(Sentence(tuple(Token(t) for t in g_tokens), tuple(g_tags)))
        i_sents.append(Sentence(tuple(Token(t) for t in i_tokens)))
        i_tagseqs.append(tuple(i_tags))
    meta = {"location": ("calimera", "martano", "corigliano")[rng.randint(3)],
            "narrator": f"narrator-{rng.randint(1, 12)}"}
    griko = Narrative(story_id, g_sents, dict(meta))
    italian = Narrative(story_id, i_sents, dict(meta))
    return ParallelNarrative(griko, italian, i_tagseqs)


def generate(cfg: SyntheticConfig | None = None) -> SyntheticDiglot:
    cfg = cfg or SyntheticConfig()
    rng = np.random.RandomState(cfg.seed)
    griko_by_tag, lexicon = _build_lexicon(rng)
    weights_by_tag = {t: _zipf_weights(len(ws)) for t, ws in griko_by_tag.items()}
    all_tags = [parse_tag(t) for t in LEXICON_SPEC]

    train_pairs: list[ParallelNarrative] = []
    for k in range(cfg.n_parallel_narratives):
        pair = _narrative(rng, f"train-{k + 1}", cfg.sentences_per_parallel,
                          griko_by_tag, weights_by_tag, lexicon, cfg, all_tags)
        # train-side narratives ship untagged: gold exists only for the
        # small annotated base and the test set
        untagged = Narrative(pair.griko.id,
                             [s.without_tags() for s in pair.griko.sentences],
                             dict(pair.griko.metadata))
        train_pairs.append(ParallelNarrative(untagged, pair.italian, pair.italian_tags))

    annotated: list[Narrative] = []
    for k in range(cfg.n_annotated_narratives):
        pair = _narrative(rng, f"base-{k + 1}", cfg.sentences_per_annotated,
                          griko_by_tag, weights_by_tag, lexicon, cfg, all_tags)
        annotated.append(pair.griko)

    test_pairs: list[ParallelNarrative] = []
    lengths = rng.permutation(
        np.linspace(cfg.test_min_sentences, cfg.test_max_sentences,
                    cfg.n_test_narratives).astype(int))
    for k in range(cfg.n_test_narratives):
        test_pairs.append(_narrative(
            rng, f"story-{k + 1}", int(lengths[k]),
            griko_by_tag, weights_by_tag, lexicon, cfg, all_tags))

    mono = Corpus([Narrative(p.griko.id, list(p.griko.sentences), dict(p.griko.metadata))
                   for p in train_pairs])
    tagset = sorted({t for p in LEXICON_SPEC for t in [parse_tag(p)]} | {atomic("PUNCT")},
                    key=str)
    return SyntheticDiglot(
        annotated=annotated,
        mono=mono,
        parallel_train=ParallelCorpus(train_pairs),
        test=[p.griko for p in test_pairs],
        parallel_test=ParallelCorpus(test_pairs),
        lexicon=lexicon,
        tagset=tagset,
    )
