"""Type-level tag dictionary: norm type -> admissible tags with provenance.

Dictionaries come from three places (gold annotations, cross-lingual
projection, label propagation) and are merged by union; the provenance
label travels with each tag so downstream consumers can weight them.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .corpus import Sentence
from .tags import Tag, parse_tag

PROVENANCES = ("gold", "projected", "propagated")


@dataclass(frozen=True, order=True)
class DictEntry:
    tag: Tag
    provenance: str
    votes: int = 1

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")


class TagDictionary:
    def __init__(self) -> None:
        self._entries: dict[str, dict[tuple[Tag, str], int]] = {}

    def add(self, word_type: str, tag: Tag, provenance: str, votes: int = 1) -> None:
        if provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {provenance!r}")
        slot = self._entries.setdefault(word_type, {})
        key = (tag, provenance)
        slot[key] = slot.get(key, 0) + votes

    def entries(self, word_type: str) -> set[DictEntry]:
        slot = self._entries.get(word_type, {})
        return {DictEntry(tag, prov, votes) for (tag, prov), votes in slot.items()}

    def tags_for(self, word_type: str) -> set[Tag]:
        return {tag for (tag, _prov) in self._entries.get(word_type, {})}

    def types(self) -> set[str]:
        return set(self._entries)

    def items(self) -> Iterator[tuple[str, set[DictEntry]]]:
        for word_type in sorted(self._entries):
            yield word_type, self.entries(word_type)

    def __contains__(self, word_type: str) -> bool:
        return word_type in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def total_entries(self) -> int:
        return sum(len(slot) for slot in self._entries.values())

    def union(self, other: "TagDictionary") -> "TagDictionary":
        out = TagDictionary()
        for source in (self, other):
            for word_type, slot in source._entries.items():
                for (tag, prov), votes in slot.items():
                    out.add(word_type, tag, prov, votes)
        return out

    def copy(self) -> "TagDictionary":
        out = TagDictionary()
        return out.union(self)

    def save_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for word_type in sorted(self._entries):
                for (tag, prov) in sorted(self._entries[word_type],
                                          key=lambda k: (str(k[0]), k[1])):
                    votes = self._entries[word_type][(tag, prov)]
                    fh.write(f"{word_type}\t{tag}\t{prov}\t{votes}\n")

    @classmethod
    def load_tsv(cls, path) -> "TagDictionary":
        out = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                cols = line.split("\t")
                if len(cols) != 4:
                    raise ValueError(f"{Path(path)}:{lineno}: expected 4 tab-separated columns")
                out.add(cols[0], parse_tag(cols[1]), cols[2], int(cols[3]))
        return out


def gold_dictionary(tagged_sentences: Iterable[Sentence]) -> TagDictionary:
    """Collect (type, tag) pairs from gold-tagged sentences."""
    out = TagDictionary()
    counts: dict[tuple[str, Tag], int] = {}
    for sent in tagged_sentences:
        if sent.excluded or sent.tags is None:
            continue
        for token, tag in zip(sent.tokens, sent.tags):
            counts[(token.norm, tag)] = counts.get((token.norm, tag), 0) + 1
    for (word_type, tag), votes in counts.items():
        out.add(word_type, tag, "gold", votes)
    return out
