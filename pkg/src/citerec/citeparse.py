"""Citation extraction, normalization and vocabulary construction.

Three citation families are recognized in opinion text:

* case citations, ``Degmetich v. Brown, 8 Vet. App. 208 (1995)``, resolved
  against an authority list by volume, reporter and page interval;
* U.S. Code citations, ``18 U.S.C. §§ 46(a), 46(b)``;
* C.F.R. citations, ``38 C.F.R. § 3.156(a)``.

Code and regulation citations are split into one normalized citation per
section atom. Anything that cannot be resolved collapses into the unknown
sentinel. Short forms (``id.``, ``supra``) are deliberately not matched.
"""

from __future__ import annotations

import csv
import enum
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

UNK_KEY = "UNK_CITATION"

DEFAULT_REPORTERS: tuple[str, ...] = ("Vet. App.", "F.3d")


class CitationKind(str, enum.Enum):
    CASE_LIKE = "CaseLike"
    USC_LIKE = "UscLike"
    CFR_LIKE = "CfrLike"


class CitationClass(str, enum.Enum):
    CASE = "case"
    STATUTE = "statute"
    REGULATION = "regulation"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class RawCitation:
    """A matched citation span; ``start``/``end`` are str offsets into the source."""

    text: str
    start: int
    end: int
    kind_hint: CitationKind

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True)
class NormalizedCitation:
    citation_class: CitationClass
    key: str

    def __post_init__(self):
        if (self.citation_class is CitationClass.UNKNOWN) != (self.key == UNK_KEY):
            raise ValueError("unknown class and the UNK key must go together")


UNKNOWN = NormalizedCitation(CitationClass.UNKNOWN, UNK_KEY)


# ---------------------------------------------------------------------------
# reporters

def _squash(reporter: str) -> str:
    return re.sub(r"\s+", "", reporter)


def _reporter_pattern(canonical: str) -> str:
    # Periods may be followed by any amount of whitespace in the source.
    out = []
    for ch in _squash(canonical):
        out.append(re.escape(ch))
        if ch == ".":
            out.append(r"\s*")
    pattern = "".join(out)
    if pattern.endswith(r"\s*"):
        pattern = pattern[: -len(r"\s*")]
    return pattern


def canonical_reporter(raw: str, known: Sequence[str] = DEFAULT_REPORTERS) -> str:
    """Map a reporter as written (``Vet.App.``, ``Vet.  App.``) onto its canonical form.

    Reporters outside ``known`` only get their whitespace collapsed.
    """
    table = {_squash(r): r for r in known}
    return table.get(_squash(raw), " ".join(raw.split()))


# ---------------------------------------------------------------------------
# patterns

_SIGNALS = (
    r"See|Cf|But|Accord|Also|In|Compare|Contra|And|Or|The|Under|As|Citing|"
    r"Quoting|Thus|Further|Moreover|However|Similarly|Here|Therefore"
)
_NAME_WORD = r"[A-Z][\w.'’&-]*"
_CONNECTOR = r"(?:of|the|and|for|ex|rel\.|&|de|la|von|van)"
_FIRST_PARTY = rf"(?!(?:{_SIGNALS})\b){_NAME_WORD}(?:\s+(?:{_CONNECTOR}\s+)*{_NAME_WORD}){{0,5}}"
_SECOND_PARTY = r"[A-Z][\w.'’&-]*(?:\s+[\w.'’&-]+){0,8}?"

_USC = r"U\.\s*S\.\s*C\."
_CFR = r"C\.\s*F\.\s*R\."
_ELEMENT_CORE = r"\d+[A-Za-z]*(?:[.\-–]\d+[A-Za-z]*)*(?:\([A-Za-z0-9]+\))*"
# An element must end cleanly and must not be the chapter of a following citation.
_ELEMENT = rf"{_ELEMENT_CORE}(?![\w(])(?!\s*(?:{_USC}|{_CFR}))"
_SEPARATOR = r"(?:\s*,\s*(?:and\s+)?|\s+and\s+|\s*&\s*)(?:§§?\s*)?"
_TAIL = rf"{_ELEMENT}(?:{_SEPARATOR}{_ELEMENT})*"
_YEAR_PAREN = r"(?:\s*\((?:1[6-9]|20)\d\d\))"

_CODE_RE = re.compile(
    rf"(?P<chapter>\d+)\s+(?P<anchor>{_USC}|{_CFR})\s*§§?\s*(?P<tail>{_TAIL}){_YEAR_PAREN}?"
)
_SEPARATOR_RE = re.compile(_SEPARATOR)
_ELEMENT_CORE_RE = re.compile(_ELEMENT_CORE)
_TRAILING_YEAR_RE = re.compile(r"\((?:1[6-9]|20)\d\d\)$")


def _case_regex(reporters: Sequence[str]) -> re.Pattern:
    alternatives = sorted((_reporter_pattern(r) for r in reporters), key=len, reverse=True)
    return re.compile(
        rf"(?P<name>{_FIRST_PARTY}\s+v\.\s+{_SECOND_PARTY}),\s+"
        rf"(?P<volume>\d+)\s+(?P<reporter>{'|'.join(alternatives)})\s+(?P<page>\d+)(?!\d)"
        rf"(?:,\s*(?P<pincite>\d+(?:[-–]\d+)?)(?!\d)(?!\s*(?:{_USC}|{_CFR})))?"
        rf"(?:\s*\((?P<year>\d{{4}})\))?"
    )


_CASE_RE_CACHE: dict[tuple[str, ...], re.Pattern] = {}


def _case_re(reporters: Sequence[str]) -> re.Pattern:
    key = tuple(reporters)
    if key not in _CASE_RE_CACHE:
        _CASE_RE_CACHE[key] = _case_regex(key)
    return _CASE_RE_CACHE[key]


def extract_citations(text: str, reporters: Sequence[str] = DEFAULT_REPORTERS) -> list[RawCitation]:
    """Find case, U.S.C. and C.F.R. citations in ``text``.

    Matches are returned left to right and never overlap; when two matches
    overlap, the longer one wins (then the earlier one).

    >>> [c.kind_hint.value for c in extract_citations("see 38 C.F.R. § 3.156(a)")]
    ['CfrLike']
    """
    found: list[RawCitation] = []
    for m in _case_re(reporters).finditer(text):
        found.append(RawCitation(m.group(0), m.start(), m.end(), CitationKind.CASE_LIKE))
    for m in _CODE_RE.finditer(text):
        kind = CitationKind.USC_LIKE if "U" in m.group("anchor") else CitationKind.CFR_LIKE
        found.append(RawCitation(m.group(0), m.start(), m.end(), kind))

    found.sort(key=lambda c: (-(c.end - c.start), c.start))
    chosen: list[RawCitation] = []
    for cand in found:
        if all(cand.end <= c.start or cand.start >= c.end for c in chosen):
            chosen.append(cand)
    chosen.sort(key=lambda c: c.start)
    return chosen


# ---------------------------------------------------------------------------
# authorities

@dataclass(frozen=True)
class AuthorityRecord:
    volume: int
    reporter: str
    first_page: int
    last_page: int
    authority_id: str
    case_name: str = ""

    def __post_init__(self):
        if self.volume <= 0 or self.first_page <= 0:
            raise ValueError(f"volume and first page must be positive: {self}")
        if self.last_page < self.first_page:
            raise ValueError(f"last page precedes first page: {self}")


class AuthorityIndex:
    """Lookup of case authorities by (volume, reporter) and page interval."""

    def __init__(self, records: Iterable[AuthorityRecord] = (), reporters: Sequence[str] = DEFAULT_REPORTERS):
        self.reporters = tuple(reporters)
        self._by_volume: dict[tuple[int, str], list[AuthorityRecord]] = {}
        seen: set[tuple[int, str, int]] = set()
        for rec in records:
            reporter = canonical_reporter(rec.reporter, self.reporters)
            ident = (rec.volume, reporter, rec.first_page)
            if ident in seen:
                raise ValueError(f"duplicate authority {ident}")
            seen.add(ident)
            self._by_volume.setdefault((rec.volume, reporter), []).append(rec)
        for recs in self._by_volume.values():
            recs.sort(key=lambda r: (r.first_page, r.authority_id))

    def __len__(self) -> int:
        return sum(len(v) for v in self._by_volume.values())

    @classmethod
    def from_csv(cls, path: str | Path, reporters: Sequence[str] = DEFAULT_REPORTERS) -> "AuthorityIndex":
        records = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            expected = ["volume", "reporter", "first_page", "last_page", "authority_id", "case_name"]
            if reader.fieldnames != expected:
                raise ValueError(f"{path}: expected header {','.join(expected)}, got {reader.fieldnames}")
            for row in reader:
                records.append(
                    AuthorityRecord(
                        volume=int(row["volume"]),
                        reporter=row["reporter"],
                        first_page=int(row["first_page"]),
                        last_page=int(row["last_page"]),
                        authority_id=row["authority_id"],
                        case_name=row["case_name"],
                    )
                )
        return cls(records, reporters)

    def lookup(self, volume: int, reporter: str, page: int) -> AuthorityRecord | None:
        """Return the record whose page interval contains ``page``.

        An exact first-page hit wins; among several interval hits the record
        starting closest before ``page`` is taken.
        """
        recs = self._by_volume.get((volume, canonical_reporter(reporter, self.reporters)), [])
        hits = [r for r in recs if r.first_page <= page <= r.last_page]
        if not hits:
            return None
        for r in hits:
            if r.first_page == page:
                return r
        return max(hits, key=lambda r: r.first_page)


# ---------------------------------------------------------------------------
# normalization

def canonical_atom(element: str) -> str | None:
    """Canonical form of one section element, or None if it does not parse."""
    atom = re.sub(r"\s+", "", element).lstrip("§")
    atom = _TRAILING_YEAR_RE.sub("", atom)
    if not atom or not _ELEMENT_CORE_RE.fullmatch(atom):
        return None
    return atom


def normalize(raw: RawCitation, index: AuthorityIndex) -> list[NormalizedCitation]:
    if raw.kind_hint is CitationKind.CASE_LIKE:
        m = _case_re(index.reporters).fullmatch(raw.text.strip())
        if m is None:
            return [UNKNOWN]
        rec = index.lookup(int(m.group("volume")), m.group("reporter"), int(m.group("page")))
        if rec is None:
            return [UNKNOWN]
        return [NormalizedCitation(CitationClass.CASE, rec.authority_id)]

    m = _CODE_RE.fullmatch(raw.text.strip())
    if m is None:
        return [UNKNOWN]
    if raw.kind_hint is CitationKind.USC_LIKE:
        anchor, cls = "U.S.C.", CitationClass.STATUTE
    else:
        anchor, cls = "C.F.R.", CitationClass.REGULATION
    tail = _TRAILING_YEAR_RE.sub("", m.group("tail").strip())
    out = []
    for element in _SEPARATOR_RE.split(tail):
        atom = canonical_atom(element)
        if atom is None:
            out.append(UNKNOWN)
        else:
            out.append(NormalizedCitation(cls, f"{int(m.group('chapter'))} {anchor} § {atom}"))
    return out


def normalize_text(text: str, index: AuthorityIndex) -> list[tuple[RawCitation, list[NormalizedCitation]]]:
    return [(raw, normalize(raw, index)) for raw in extract_citations(text, index.reporters)]


# ---------------------------------------------------------------------------
# vocabulary

@dataclass
class CitationVocabulary:
    """Pruned citation vocabulary; order is by descending count, then key."""

    entries: list[NormalizedCitation]
    counts: list[int]
    index_of: dict[str, int] = field(init=False)
    unk_index: int = field(init=False)

    def __post_init__(self):
        if len(self.entries) != len(self.counts):
            raise ValueError("entries and counts differ in length")
        self.index_of = {e.key: i for i, e in enumerate(self.entries)}
        if len(self.index_of) != len(self.entries):
            raise ValueError("duplicate vocabulary keys")
        if UNK_KEY not in self.index_of:
            raise ValueError("vocabulary lacks the UNK entry")
        self.unk_index = self.index_of[UNK_KEY]

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, key: str) -> int:
        return self.index_of.get(key, self.unk_index)

    def key_of(self, index: int) -> str:
        return self.entries[index].key

    def class_of(self, index: int) -> CitationClass:
        return self.entries[index].citation_class

    def to_tsv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("index\tclass\tkey\tcount\n")
            for i, (e, n) in enumerate(zip(self.entries, self.counts)):
                fh.write(f"{i}\t{e.citation_class.value}\t{e.key}\t{n}\n")

    @classmethod
    def from_tsv(cls, path: str | Path) -> "CitationVocabulary":
        entries, counts = [], []
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            if header != "index\tclass\tkey\tcount":
                raise ValueError(f"{path}: not a citation vocabulary file")
            for line in fh:
                idx, klass, key, count = line.rstrip("\n").split("\t")
                if int(idx) != len(entries):
                    raise ValueError(f"{path}: rows out of order at index {idx}")
                entries.append(NormalizedCitation(CitationClass(klass), key))
                counts.append(int(count))
        return cls(entries, counts)


def build_vocabulary(citations: Iterable[NormalizedCitation], min_count: int = 20) -> CitationVocabulary:
    """Count training citations and fold everything below ``min_count`` into UNK."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[NormalizedCitation] = Counter(citations)
    unk = 0
    kept: list[tuple[NormalizedCitation, int]] = []
    for cit, n in counts.items():
        if cit.citation_class is CitationClass.UNKNOWN or n < min_count:
            unk += n
        else:
            kept.append((cit, n))
    kept.append((UNKNOWN, unk))
    kept.sort(key=lambda item: (-item[1], item[0].key))
    return CitationVocabulary([c for c, _ in kept], [n for _, n in kept])
