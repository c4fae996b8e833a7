"""Tagset model: 12 atomic universal-style labels plus composite tags.

Fused word forms (preposition+article contractions, noun+clitic pronoun,
stacked adverbs, ...) receive a composite tag whose parts are joined by
'+' in the canonical string form, e.g. "P+D". Part order is meaningful:
"P+D" and "D+P" are different tags.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

ATOMIC_LABELS: tuple[str, ...] = (
    "V", "N", "Adj", "Adv", "Pr", "D", "P", "C", "Prt", "Num", "PUNCT", "X",
)
_ATOMIC_SET = frozenset(ATOMIC_LABELS)

OPEN_CLASS_LABELS: tuple[str, ...] = ("V", "N", "Adj", "Adv", "X")


class TagError(ValueError):
    """Base class for tag parsing/mapping failures."""


class EmptyTag(TagError):
    """Raised when parsing an empty tag string."""


class UnknownAtomicTag(TagError):
    """Raised when a tag part is not one of the 12 atomic labels."""

    def __init__(self, part: str, source: str | None = None):
        self.part = part
        self.source = source
        at = f" in {source!r}" if source else ""
        super().__init__(f"unknown atomic tag {part!r}{at}")


class UnmappedTag(TagError):
    """Raised when a source tag is absent from a tagset mapping."""

    def __init__(self, source_tag: str):
        self.source_tag = source_tag
        super().__init__(f"source tag {source_tag!r} has no mapping entry")


@dataclass(frozen=True, order=True)
class Tag:
    """Ordered non-empty sequence of atomic labels."""

    parts: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.parts:
            raise EmptyTag("tag must have at least one part")
        for part in self.parts:
            if part not in _ATOMIC_SET:
                raise UnknownAtomicTag(part, "+".join(self.parts))

    def __str__(self) -> str:
        return "+".join(self.parts)

    def __repr__(self) -> str:
        return f"Tag({'+'.join(self.parts)})"

    def __iter__(self) -> Iterator[str]:
        return iter(self.parts)

    @property
    def is_composite(self) -> bool:
        return len(self.parts) > 1

    @property
    def is_open_class(self) -> bool:
        return len(self.parts) == 1 and self.parts[0] in OPEN_CLASS_LABELS


def atomic(label: str) -> Tag:
    return Tag((label,))


def parse_tag(s: str) -> Tag:
    """Parse a canonical tag string such as "V" or "P+D"."""
    if not s:
        raise EmptyTag("cannot parse empty tag string")
    parts = tuple(s.split("+"))
    return Tag(parts)


ATOMIC_TAGS: tuple[Tag, ...] = tuple(atomic(label) for label in ATOMIC_LABELS)
PUNCT = atomic("PUNCT")


class TagsetMapping:
    """Total map from source-corpus tag strings to universal-style tags.

    Lookups of unmapped strings raise; the mapping never falls back to an
    identity guess, so coverage gaps in a mapping file surface immediately.
    """

    def __init__(self, entries: dict[str, Tag] | None = None):
        self.entries: dict[str, Tag] = dict(entries or {})

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, source_tag: str) -> bool:
        return source_tag in self.entries

    def lookup(self, source_tag: str) -> Tag:
        try:
            return self.entries[source_tag]
        except KeyError:
            raise UnmappedTag(source_tag) from None

    @classmethod
    def identity(cls, tags: Iterable[Tag]) -> "TagsetMapping":
        """Mapping whose sources are canonical strings of `tags` themselves."""
        return cls({str(t): t for t in tags})

    @classmethod
    def load(cls, path) -> "TagsetMapping":
        """Read a two-column whitespace-separated mapping file.

        Lines starting with '#' and blank lines are ignored.
        """
        entries: dict[str, Tag] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                cols = line.split()
                if len(cols) != 2:
                    raise TagError(
                        f"{path}:{lineno}: expected 'source_tag target_tag', got {line!r}"
                    )
                entries[cols[0]] = parse_tag(cols[1])
        return cls(entries)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for source in sorted(self.entries):
                fh.write(f"{source}\t{self.entries[source]}\n")


def map_tagset(source_tag: str, mapping: TagsetMapping) -> Tag:
    """Map a source-corpus tag string through `mapping`."""
    return mapping.lookup(source_tag)
