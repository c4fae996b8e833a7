"""Text data model and corpus I/O.

Normalization and tokenization mirror how the narrative resource was
prepared: curly quotes and apostrophes become ASCII ones, the rare
circumflex contraction vowels are rewritten to the common accented
vowel + apostrophe spelling, text is lowercased, and apostrophes are
split into their own tokens except for a whitelist of known elisions
(the conjunction "c'" by default).

Corpus files are line-oriented, one file per narrative:

    #id: story-1
    #title_griko: O alitsi
    ...
    first sentence , tokenized !
    #exclude: salentino
    a sentence excluded from training and evaluation
    next sentence

Tagged corpora use ``token_TAG`` pairs on each sentence line. Parallel
corpora pair files by narrative id with ``.grk`` / ``.ita`` suffixes;
Italian-side tags live in a sidecar ``<id>.itag`` file of tagged lines.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .tags import Tag, parse_tag

# Curly quote/apostrophe forms found in the scraped narratives.
_QUOTE_TRANSLATION = str.maketrans({
    "‘": "'",  # left single quote
    "’": "'",  # right single quote
    "“": '"',  # left double quote
    "”": '"',  # right double quote
})

# Circumflex contraction vowels, rewritten after lowercasing. Both the
# precomposed and the combining-mark spellings are covered.
_CIRCUMFLEX_REWRITES = (
    ("â", "à'"),   # â -> à'
    ("ô", "ò'"),   # ô -> ò'
    ("û", "ù'"),   # û -> ù'
    ("â", "à'"),
    ("ô", "ò'"),
    ("û", "ù'"),
)

PUNCTUATION_CHARS = frozenset('.,;:!?«»"()')

DEFAULT_ELISIONS = frozenset({"c'"})

METADATA_KEYS = ("source_url", "title_griko", "title_italian", "location", "date", "narrator")


def normalize(raw: str, *, fold_diacritics: bool = False) -> str:
    """Normalize a raw text line. Total and idempotent.

    With ``fold_diacritics`` (experimental, default off) combining marks
    are stripped after the standard rewrites, collapsing the inconsistent
    stress marking; by default accented forms stay distinct.
    """
    text = raw.translate(_QUOTE_TRANSLATION).lower()
    for src, dst in _CIRCUMFLEX_REWRITES:
        if src in text:
            text = text.replace(src, dst)
    if fold_diacritics:
        decomposed = unicodedata.normalize("NFD", text)
        text = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    return text


def _split_punct(chunk: str) -> list[str]:
    """Split punctuation marks off as separate single-char tokens."""
    out: list[str] = []
    buf: list[str] = []
    for ch in chunk:
        if ch in PUNCTUATION_CHARS:
            if buf:
                out.append("".join(buf))
                buf = []
            out.append(ch)
        else:
            buf.append(ch)
    if buf:
        out.append("".join(buf))
    return out


def _split_apostrophes(piece: str, elisions: frozenset[str]) -> list[str]:
    """Apostrophes become their own tokens unless a whitelisted elision
    (segment ending in the apostrophe, e.g. "c'") keeps them attached."""
    out: list[str] = []
    start = 0
    i = 0
    while i < len(piece):
        if piece[i] == "'":
            segment = piece[start:i + 1]
            if segment in elisions:
                out.append(segment)
            else:
                if i > start:
                    out.append(piece[start:i])
                out.append("'")
            start = i + 1
        i += 1
    if start < len(piece):
        out.append(piece[start:])
    return out


def tokenize(normalized_line: str, elisions: Iterable[str] = DEFAULT_ELISIONS) -> list["Token"]:
    """Tokenize an already-normalized line."""
    elision_set = frozenset(elisions)
    tokens: list[Token] = []
    for chunk in normalized_line.split():
        for piece in _split_punct(chunk):
            if piece in PUNCTUATION_CHARS:
                tokens.append(Token(piece))
            else:
                for surface in _split_apostrophes(piece, elision_set):
                    tokens.append(Token(surface))
    return tokens


def load_elisions(path) -> frozenset[str]:
    """Elision whitelist file: one entry per line, '#' comments."""
    entries = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                entries.add(line)
    return frozenset(entries)


@dataclass(frozen=True)
class Token:
    """A surface token plus its normalized type key."""

    surface: str
    norm: str = ""

    def __post_init__(self) -> None:
        if not self.norm:
            object.__setattr__(self, "norm", normalize(self.surface))
        if not self.norm:
            raise ValueError(f"token {self.surface!r} normalizes to empty string")

    @property
    def is_punct(self) -> bool:
        return all(ch in PUNCTUATION_CHARS for ch in self.norm)


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    tags: tuple[Tag, ...] | None = None
    excluded: bool = False

    def __post_init__(self) -> None:
        if self.tags is not None and len(self.tags) != len(self.tokens):
            raise ValueError(
                f"{len(self.tags)} tags for {len(self.tokens)} tokens"
            )

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def norms(self) -> tuple[str, ...]:
        return tuple(t.norm for t in self.tokens)

    def without_tags(self) -> "Sentence":
        return replace(self, tags=None)


def sentence(words: Sequence[str], tags: Sequence[Tag | str] | None = None,
             excluded: bool = False) -> Sentence:
    """Convenience constructor from plain strings."""
    toks = tuple(Token(w) for w in words)
    parsed = None
    if tags is not None:
        parsed = tuple(t if isinstance(t, Tag) else parse_tag(t) for t in tags)
    return Sentence(toks, parsed, excluded)


@dataclass
class Narrative:
    id: str
    sentences: list[Sentence]
    metadata: dict[str, str] = field(default_factory=dict)

    def token_length(self) -> int:
        return sum(len(s) for s in self.sentences if not s.excluded)

    def active_sentences(self) -> list[Sentence]:
        return [s for s in self.sentences if not s.excluded]

    @property
    def is_tagged(self) -> bool:
        return all(s.tags is not None for s in self.active_sentences())


@dataclass
class Corpus:
    """One language side: a sequence of narratives with unique ids."""

    narratives: list[Narrative]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for n in self.narratives:
            if n.id in seen:
                raise ValueError(f"duplicate narrative id {n.id!r}")
            seen.add(n.id)

    def __iter__(self) -> Iterator[Narrative]:
        return iter(self.narratives)

    def __len__(self) -> int:
        return len(self.narratives)

    def get(self, narrative_id: str) -> Narrative:
        for n in self.narratives:
            if n.id == narrative_id:
                return n
        raise KeyError(narrative_id)

    def active_sentences(self) -> list[Sentence]:
        return [s for n in self.narratives for s in n.active_sentences()]


@dataclass
class ParallelNarrative:
    griko: Narrative
    italian: Narrative
    italian_tags: list[tuple[Tag, ...]] | None = None

    def __post_init__(self) -> None:
        if len(self.griko.sentences) != len(self.italian.sentences):
            raise ValueError(
                f"{self.griko.id}: {len(self.griko.sentences)} Griko vs "
                f"{len(self.italian.sentences)} Italian sentences"
            )
        if self.italian_tags is not None:
            if len(self.italian_tags) != len(self.italian.sentences):
                raise ValueError(f"{self.griko.id}: italian_tags/sentence count mismatch")
            for tags, sent in zip(self.italian_tags, self.italian.sentences):
                if len(tags) != len(sent):
                    raise ValueError(f"{self.griko.id}: italian tag sequence length mismatch")

    @property
    def id(self) -> str:
        return self.griko.id


@dataclass
class ParallelCorpus:
    pairs: list[ParallelNarrative]

    def __iter__(self) -> Iterator[ParallelNarrative]:
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


# ---------------------------------------------------------------------------
# File I/O


def _parse_sentence_line(line: str, tagged: bool, where: str) -> tuple[tuple[Token, ...], tuple[Tag, ...] | None]:
    chunks = line.split()
    if not tagged:
        return tuple(Token(c) for c in chunks), None
    tokens: list[Token] = []
    tags: list[Tag] = []
    for chunk in chunks:
        word, sep, tag_str = chunk.rpartition("_")
        if not sep or not word:
            raise ValueError(f"{where}: expected token_TAG pair, got {chunk!r}")
        tokens.append(Token(word))
        tags.append(parse_tag(tag_str))
    return tuple(tokens), tuple(tags)


def _looks_tagged(lines: list[str]) -> bool:
    chunks = [c for line in lines for c in line.split()]
    if not chunks:
        return False
    for chunk in chunks:
        word, sep, tag_str = chunk.rpartition("_")
        if not sep or not word:
            return False
        try:
            parse_tag(tag_str)
        except Exception:
            return False
    return True


def load_narrative(path, tagged: bool | None = None) -> Narrative:
    """Read one narrative file.

    ``tagged=None`` auto-detects token_TAG lines per sentence, so files
    mixing tagged sentences with untagged excluded ones load cleanly.
    """
    path = Path(path)
    metadata: dict[str, str] = {}
    narrative_id = path.name.split(".")[0]
    pending_exclude = False
    raw_sentences: list[tuple[str, bool]] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                key = key.strip()
                value = value.strip()
                if key == "exclude":
                    pending_exclude = True
                elif key == "id":
                    narrative_id = value
                else:
                    metadata[key] = value
                continue
            raw_sentences.append((line, pending_exclude))
            pending_exclude = False
    sentences = []
    for idx, (line, excluded) in enumerate(raw_sentences):
        line_tagged = _looks_tagged([line]) if tagged is None else tagged
        tokens, tags = _parse_sentence_line(line, line_tagged, f"{path}:{idx}")
        sentences.append(Sentence(tokens, tags, excluded))
    return Narrative(narrative_id, sentences, metadata)


def save_narrative(narrative: Narrative, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#id: {narrative.id}\n")
        for key, value in narrative.metadata.items():
            fh.write(f"#{key}: {value}\n")
        for sent in narrative.sentences:
            if sent.excluded:
                fh.write("#exclude: salentino\n")
            if sent.tags is not None:
                fh.write(" ".join(f"{t.surface}_{tag}" for t, tag in zip(sent.tokens, sent.tags)))
            else:
                fh.write(" ".join(t.surface for t in sent.tokens))
            fh.write("\n")


def load_corpus(directory, suffix: str = ".grk", tagged: bool | None = None) -> Corpus:
    directory = Path(directory)
    paths = sorted(directory.glob(f"*{suffix}"))
    return Corpus([load_narrative(p, tagged=tagged) for p in paths])


def save_corpus(corpus: Corpus, directory, suffix: str = ".grk") -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for narrative in corpus:
        save_narrative(narrative, directory / f"{narrative.id}{suffix}")


def load_italian_tags(path) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """Italian tags file: one sentence per line of token_TAG pairs.

    Returns (tokens, raw tag strings) per sentence; tag strings are mapped
    to the universal tagset by the projection pipeline.
    """
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens: list[str] = []
            tag_strs: list[str] = []
            for chunk in line.split():
                word, sep, tag_str = chunk.rpartition("_")
                if not sep or not word:
                    raise ValueError(f"{path}:{lineno}: expected token_TAG pair, got {chunk!r}")
                tokens.append(word)
                tag_strs.append(tag_str)
            out.append((tuple(tokens), tuple(tag_strs)))
    return out


def load_parallel_corpus(directory, *, mapping=None) -> ParallelCorpus:
    """Pair `<id>.grk` / `<id>.ita` files; `<id>.itag` supplies Italian tags.

    When `mapping` is given, itag tag strings go through it; otherwise they
    must already be canonical universal tags.
    """
    directory = Path(directory)
    pairs: list[ParallelNarrative] = []
    for grk_path in sorted(directory.glob("*.grk")):
        stem = grk_path.name[:-len(".grk")]
        ita_path = directory / f"{stem}.ita"
        if not ita_path.exists():
            continue
        griko = load_narrative(grk_path)
        italian = load_narrative(ita_path)
        italian_tags = None
        itag_path = directory / f"{stem}.itag"
        if itag_path.exists():
            tagged_lines = load_italian_tags(itag_path)
            if len(tagged_lines) != len(italian.sentences):
                raise ValueError(f"{itag_path}: {len(tagged_lines)} tagged lines for "
                                 f"{len(italian.sentences)} sentences")
            italian_tags = []
            for (tokens, tag_strs), sent in zip(tagged_lines, italian.sentences):
                if len(tokens) != len(sent):
                    raise ValueError(f"{itag_path}: token count mismatch with {ita_path.name}")
                if mapping is not None:
                    italian_tags.append(tuple(mapping.lookup(ts) for ts in tag_strs))
                else:
                    italian_tags.append(tuple(parse_tag(ts) for ts in tag_strs))
        pairs.append(ParallelNarrative(griko, italian, italian_tags))
    return ParallelCorpus(pairs)


# ---------------------------------------------------------------------------
# Statistics and validation


@dataclass
class StatsReport:
    stories: int
    sentences: int
    excluded_sentences: int
    types: int
    tokens: int

    def as_dict(self) -> dict[str, int]:
        return {
            "stories": self.stories,
            "sentences": self.sentences,
            "excluded_sentences": self.excluded_sentences,
            "types": self.types,
            "tokens": self.tokens,
        }


def corpus_stats(corpus: Corpus) -> StatsReport:
    """Counts over non-excluded sentences; types over normalized forms."""
    types: set[str] = set()
    tokens = 0
    sentences = 0
    excluded = 0
    for narrative in corpus:
        for sent in narrative.sentences:
            if sent.excluded:
                excluded += 1
                continue
            sentences += 1
            tokens += len(sent)
            types.update(sent.norms)
    return StatsReport(len(corpus), sentences, excluded, len(types), tokens)


def validate_corpus(corpus: Corpus) -> list[str]:
    """Check model invariants; returns a list of violations (empty = valid)."""
    problems: list[str] = []
    seen_ids: set[str] = set()
    for narrative in corpus:
        if narrative.id in seen_ids:
            problems.append(f"duplicate narrative id {narrative.id!r}")
        seen_ids.add(narrative.id)
        for s_idx, sent in enumerate(narrative.sentences):
            where = f"{narrative.id}[{s_idx}]"
            if sent.tags is not None and len(sent.tags) != len(sent.tokens):
                problems.append(f"{where}: tag/token length mismatch")
            for token in sent.tokens:
                if not token.norm:
                    problems.append(f"{where}: empty norm for {token.surface!r}")
                elif normalize(token.norm) != token.norm:
                    problems.append(f"{where}: norm {token.norm!r} is not normalization-stable")
    return problems


def validate_parallel(parallel: ParallelCorpus) -> list[str]:
    problems = validate_corpus(Corpus([p.griko for p in parallel]))
    for pair in parallel:
        if len(pair.griko.sentences) != len(pair.italian.sentences):
            problems.append(f"{pair.id}: sentence count mismatch across sides")
    return problems
