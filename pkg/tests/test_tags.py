import pytest
from hypothesis import given, strategies as st

from glossa.tags import (
    ATOMIC_LABELS, ATOMIC_TAGS, EmptyTag, Tag, TagsetMapping, UnknownAtomicTag,
    UnmappedTag, atomic, map_tagset, parse_tag,
)


def test_exactly_twelve_atomic_labels():
    assert len(ATOMIC_LABELS) == 12
    assert len(set(ATOMIC_LABELS)) == 12
    assert len(ATOMIC_TAGS) == 12


def test_parse_single_atomic():
    assert parse_tag("V") == Tag(("V",))
    assert not parse_tag("V").is_composite


def test_parse_composite_preserves_order():
    assert parse_tag("P+D").parts == ("P", "D")
    assert parse_tag("P+D") != parse_tag("D+P")
    assert parse_tag("Adv+Adv+Prt").parts == ("Adv", "Adv", "Prt")


def test_parse_errors():
    with pytest.raises(EmptyTag):
        parse_tag("")
    with pytest.raises(UnknownAtomicTag):
        parse_tag("Foo")
    with pytest.raises(UnknownAtomicTag):
        parse_tag("Prt+Pt")  # 'Pt' is not an atomic label
    with pytest.raises(EmptyTag):
        Tag(())


@given(st.lists(st.sampled_from(ATOMIC_LABELS), min_size=1, max_size=4))
def test_tag_string_round_trip(parts):
    tag = Tag(tuple(parts))
    assert parse_tag(str(tag)) == tag
    assert str(parse_tag(str(tag))) == str(tag)


def test_mapping_lookup_and_totality(tmp_path):
    path = tmp_path / "map.tsv"
    path.write_text("# UoI tagset mapping\nVERB V\nPrepArt P+D\nCliticConj C+Pr\n")
    mapping = TagsetMapping.load(path)
    assert map_tagset("VERB", mapping) == atomic("V")
    assert map_tagset("CliticConj", mapping) == parse_tag("C+Pr")
    with pytest.raises(UnmappedTag):
        map_tagset("UNLISTED", mapping)


def test_fourteen_entry_mapping_covers_source_corpus(tmp_path):
    # A source tagset of 14 tags (12 universal-style plus two composites)
    # maps without error over a stream using every source tag.
    sources = list(ATOMIC_LABELS) + ["PrepArt", "ConjPron"]
    lines = [f"{s} {s}" for s in ATOMIC_LABELS]
    lines += ["PrepArt P+D", "ConjPron C+Pr"]
    path = tmp_path / "map14.tsv"
    path.write_text("\n".join(lines) + "\n")
    mapping = TagsetMapping.load(path)
    assert len(mapping) == 14
    for s in sources:
        map_tagset(s, mapping)  # must not raise


def test_mapping_never_invents_identity():
    mapping = TagsetMapping({"VERB": atomic("V")})
    with pytest.raises(UnmappedTag):
        mapping.lookup("V")  # 'V' itself is not an entry
