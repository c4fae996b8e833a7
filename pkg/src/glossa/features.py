"""Feature templates for the linear-chain CRF tagger.

Two profiles: ``basic`` uses word identity and shape cues only;
``extended`` adds character prefixes/suffixes up to 4 characters and
word bigram/trigram context features.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Sentence

BOS = "<s>"
EOS = "</s>"

PROFILES = ("basic", "extended")


@dataclass(frozen=True)
class FeatureTemplateConfig:
    profile: str = "extended"
    max_affix_len: int = 4
    use_ngrams: bool = True

    def __post_init__(self) -> None:
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}")
        if self.max_affix_len < 1:
            raise ValueError("max_affix_len must be >= 1")

    @classmethod
    def basic(cls) -> "FeatureTemplateConfig":
        return cls(profile="basic", use_ngrams=False)

    @classmethod
    def extended(cls) -> "FeatureTemplateConfig":
        return cls(profile="extended", use_ngrams=True)


def extract_features(sent: Sentence, i: int, cfg: FeatureTemplateConfig) -> set[str]:
    """Observation features at position `i` (tag-independent strings)."""
    if not 0 <= i < len(sent):
        raise IndexError(f"position {i} out of range for sentence of length {len(sent)}")
    norms = sent.norms
    word = norms[i]
    prev_word = norms[i - 1] if i > 0 else BOS
    next_word = norms[i + 1] if i + 1 < len(norms) else EOS

    feats = {
        f"w={word}",
        f"w-1={prev_word}",
        f"w+1={next_word}",
    }
    if sent.tokens[i].is_punct:
        feats.add("ispunct")
    if any(ch.isdigit() for ch in word):
        feats.add("hasdigit")
    if "'" in word:
        feats.add("hasapos")

    if cfg.profile == "extended":
        for length in range(1, min(cfg.max_affix_len, len(word)) + 1):
            feats.add(f"pre{length}={word[:length]}")
            feats.add(f"suf{length}={word[-length:]}")
        if cfg.use_ngrams:
            feats.add(f"bg-1={prev_word}|{word}")
            feats.add(f"bg+1={word}|{next_word}")
            feats.add(f"tg={prev_word}|{word}|{next_word}")
    return feats
