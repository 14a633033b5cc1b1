import pytest
from hypothesis import given, strategies as st

from citerec.citeparse import (
    UNK_KEY,
    UNKNOWN,
    AuthorityIndex,
    AuthorityRecord,
    CitationClass,
    CitationKind,
    CitationVocabulary,
    NormalizedCitation,
    RawCitation,
    build_vocabulary,
    canonical_atom,
    canonical_reporter,
    extract_citations,
    normalize,
    normalize_text,
)

DEGMETICH = "Degmetich v. Brown, 8 Vet. App. 208 (1995)"


@pytest.fixture
def index():
    return AuthorityIndex([
        AuthorityRecord(8, "Vet. App.", 208, 215, "CLA#6456776", "Degmetich v. Brown"),
        AuthorityRecord(8, "Vet. App.", 216, 230, "CLA#1000001", "Other v. Brown"),
        AuthorityRecord(104, "F.3d", 1328, 1335, "CLA#2000002", "Degmetich v. Brown"),
    ])


def stat(key):
    return NormalizedCitation(CitationClass.STATUTE, key)


def reg(key):
    return NormalizedCitation(CitationClass.REGULATION, key)


# -- extraction ---------------------------------------------------------------

def test_extract_case():
    found = extract_citations(DEGMETICH)
    assert len(found) == 1
    assert found[0].kind_hint is CitationKind.CASE_LIKE
    assert found[0].text == DEGMETICH
    assert found[0].span == (0, len(DEGMETICH))


def test_extract_empty():
    assert extract_citations("") == []


def test_extract_usc_and_cfr_spans():
    text = "see 18 U.S.C. §§ 46(a), 46(b) and 38 C.F.R. § 3.156(a)"
    found = extract_citations(text)
    assert [c.kind_hint for c in found] == [CitationKind.USC_LIKE, CitationKind.CFR_LIKE]
    assert found[0].text == "18 U.S.C. §§ 46(a), 46(b)"
    assert found[1].text == "38 C.F.R. § 3.156(a)"
    for c in found:
        assert text[c.start:c.end] == c.text


def test_signal_word_not_part_of_case_name():
    text = "See Degmetich v. Brown, 8 Vet. App. 208, 209 (1995)."
    (c,) = extract_citations(text)
    assert c.text == "Degmetich v. Brown, 8 Vet. App. 208, 209 (1995)"


def test_reporter_spacing_variants():
    for reporter in ("Vet.App.", "Vet.  App.", "Vet. App."):
        (c,) = extract_citations(f"Degmetich v. Brown, 8 {reporter} 208")
        assert c.kind_hint is CitationKind.CASE_LIKE


def test_unlisted_reporter_is_not_matched():
    assert extract_citations("Smith v. Jones, 5 U.S. 137 (1803)") == []


def test_short_forms_ignored():
    assert extract_citations("Id. at 210; see Degmetich, supra.") == []


def test_pincite_range_kept():
    (c,) = extract_citations("Smith v. Brown, 3 Vet. App. 10, 12-13 (1992).")
    assert c.text.endswith("12-13 (1992)")


def test_adjacent_code_citations_split():
    found = extract_citations("38 U.S.C. § 5107, 38 C.F.R. § 3.102")
    assert [c.text for c in found] == ["38 U.S.C. § 5107", "38 C.F.R. § 3.102"]


@given(st.text(alphabet="ab §.,()0123456789vVUSCFR ", max_size=80))
def test_extraction_spans_are_ordered_and_disjoint(text):
    found = extract_citations(text)
    for c in found:
        assert text[c.start:c.end] == c.text
    for a, b in zip(found, found[1:]):
        assert a.end <= b.start


# -- authorities ----------------------------------------------------------------

def test_canonical_reporter():
    assert canonical_reporter("Vet.App.") == "Vet. App."
    assert canonical_reporter("Vet.   App.") == "Vet. App."
    assert canonical_reporter("So.  2d") == "So. 2d"


def test_lookup_page_inside_interval(index):
    assert index.lookup(8, "Vet. App.", 210).authority_id == "CLA#6456776"
    assert index.lookup(8, "Vet.App.", 216).authority_id == "CLA#1000001"
    assert index.lookup(8, "Vet. App.", 231) is None
    assert index.lookup(9, "Vet. App.", 208) is None


def test_lookup_prefers_exact_first_page():
    idx = AuthorityIndex([
        AuthorityRecord(1, "F.3d", 100, 120, "A"),
        AuthorityRecord(1, "F.3d", 110, 115, "B"),
        AuthorityRecord(1, "F.3d", 105, 118, "C"),
    ])
    assert idx.lookup(1, "F.3d", 110).authority_id == "B"
    assert idx.lookup(1, "F.3d", 112).authority_id == "B"
    assert idx.lookup(1, "F.3d", 107).authority_id == "C"


def test_duplicate_authority_rejected():
    with pytest.raises(ValueError):
        AuthorityIndex([AuthorityRecord(1, "F.3d", 1, 2, "A"), AuthorityRecord(1, "F.3d", 1, 3, "B")])


def test_authority_csv(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text(
        "volume,reporter,first_page,last_page,authority_id,case_name\n"
        '8,Vet. App.,208,215,CLA#6456776,"Degmetich v. Brown"\n',
        encoding="utf-8",
    )
    idx = AuthorityIndex.from_csv(path)
    assert len(idx) == 1
    assert idx.lookup(8, "Vet. App.", 208).case_name == "Degmetich v. Brown"

    bad = tmp_path / "b.csv"
    bad.write_text("vol,rep\n1,F.3d\n", encoding="utf-8")
    with pytest.raises(ValueError, match="header"):
        AuthorityIndex.from_csv(bad)


# -- normalization ----------------------------------------------------------------

def test_normalize_case(index):
    raw = RawCitation(DEGMETICH, 0, len(DEGMETICH), CitationKind.CASE_LIKE)
    assert normalize(raw, index) == [NormalizedCitation(CitationClass.CASE, "CLA#6456776")]


def test_normalize_case_pincite_uses_first_page(index):
    (raw,) = extract_citations("Degmetich v. Brown, 8 Vet. App. 208, 220 (1995)")
    assert normalize(raw, index)[0].key == "CLA#6456776"


def test_normalize_usc_atoms(index):
    text = "18 U.S.C. §§ 46(a), 46(b)"
    raw = RawCitation(text, 0, len(text), CitationKind.USC_LIKE)
    assert normalize(raw, index) == [stat("18 U.S.C. § 46(a)"), stat("18 U.S.C. § 46(b)")]


def test_normalize_unknown_volume(index):
    text = "Smith v. Brown, 99 Vet. App. 1 (2001)"
    raw = RawCitation(text, 0, len(text), CitationKind.CASE_LIKE)
    assert normalize(raw, index) == [UNKNOWN]


def test_normalize_text_mixed(index):
    text = (
        "As held in Degmetich v. Brown, 8 Vet.App. 208 (1995), and under 38 C.F.R. §§ 3.102, 3.156(a) (2016), "
        "and 38 U.S.C. § 5107(b); cf. Nobody v. West, 3 F.3d 4."
    )
    out = [n for _, ns in normalize_text(text, index) for n in ns]
    assert out == [
        NormalizedCitation(CitationClass.CASE, "CLA#6456776"),
        reg("38 C.F.R. § 3.102"),
        reg("38 C.F.R. § 3.156(a)"),
        stat("38 U.S.C. § 5107(b)"),
        UNKNOWN,
    ]


def test_normalization_is_whitespace_insensitive(index):
    a = [n for _, ns in normalize_text("38  U.S.C.  §  5107", index) for n in ns]
    b = [n for _, ns in normalize_text("38 U.S.C. §5107", index) for n in ns]
    assert a == b == [stat("38 U.S.C. § 5107")]


def test_canonical_atom():
    assert canonical_atom("§ 3.156(a)") == "3.156(a)"
    assert canonical_atom(" 46(b) (1994)") == "46(b)"
    assert canonical_atom("(a)") is None


def test_unknown_class_and_key_go_together():
    with pytest.raises(ValueError):
        NormalizedCitation(CitationClass.CASE, UNK_KEY)
    with pytest.raises(ValueError):
        NormalizedCitation(CitationClass.UNKNOWN, "x")


# -- vocabulary ---------------------------------------------------------------

def case(key):
    return NormalizedCitation(CitationClass.CASE, key)


def test_vocabulary_pruning():
    stream = [case("A")] * 25 + [case("B")] * 19 + [case("C")] * 3
    v = build_vocabulary(stream, min_count=20)
    assert [e.key for e in v.entries] == ["A", UNK_KEY]
    assert v.counts == [25, 22]
    assert v.unk_index == 1
    assert v.lookup("B") == v.unk_index


def test_vocabulary_empty_stream():
    v = build_vocabulary([], min_count=20)
    assert v.entries == [UNKNOWN] and v.counts == [0]


def test_vocabulary_tie_breaks_by_key():
    v = build_vocabulary([case("B")] * 5 + [case("A")] * 5, min_count=5)
    assert [e.key for e in v.entries] == ["A", "B", UNK_KEY]


def test_unknown_occurrences_count_towards_unk():
    v = build_vocabulary([UNKNOWN] * 30 + [case("A")] * 21, min_count=20)
    assert [(e.key, n) for e, n in zip(v.entries, v.counts)] == [(UNK_KEY, 30), ("A", 21)]


def test_vocabulary_min_count_validated():
    with pytest.raises(ValueError):
        build_vocabulary([], min_count=0)


def test_vocabulary_tsv_roundtrip(tmp_path):
    v = build_vocabulary([case("CLA#1")] * 3 + [stat("38 U.S.C. § 5107")] * 4 + [UNKNOWN], min_count=2)
    v.to_tsv(tmp_path / "v.tsv")
    w = CitationVocabulary.from_tsv(tmp_path / "v.tsv")
    assert w.entries == v.entries and w.counts == v.counts and w.unk_index == v.unk_index
    assert w.class_of(0) is CitationClass.STATUTE


@given(st.lists(st.sampled_from("ABCDEFG"), max_size=60), st.integers(1, 10))
def test_vocabulary_counts_are_conserved(keys, min_count):
    stream = [case(k) for k in keys]
    v = build_vocabulary(stream, min_count)
    assert sum(v.counts) == len(keys)
    kept = [n for e, n in zip(v.entries, v.counts) if e.key != UNK_KEY]
    assert all(n >= min_count for n in kept)
    pairs = [(-n, e.key) for e, n in zip(v.entries, v.counts)]
    assert pairs == sorted(pairs)
