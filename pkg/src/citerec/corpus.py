"""Corpus ingestion: word tokenization with citation re-insertion, splits and folds."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence, Union

from .citeparse import (
    AuthorityIndex,
    CitationClass,
    CitationVocabulary,
    NormalizedCitation,
    normalize_text,
)

_WORD_RE = re.compile(r"[^\W_]+(?:['’\-][^\W_]+)*")


class Word(NamedTuple):
    term: str


class Cite(NamedTuple):
    index: int


Token = Union[Word, Cite]


@dataclass(frozen=True)
class Metadata:
    year: int
    issue_area: int
    vlj: int

    def get(self, feature: str) -> int:
        return getattr(self, feature)


@dataclass
class Document:
    id: str
    tokens: list[Token]
    metadata: Metadata

    def citations(self) -> list[int]:
        return [t.index for t in self.tokens if isinstance(t, Cite)]


@dataclass
class CorpusSplit:
    train: list[str]
    validation: list[str]
    test: list[str]
    test_folds: list[list[str]]

    def fold_of(self) -> dict[str, int]:
        return {doc_id: i for i, fold in enumerate(self.test_folds) for doc_id in fold}

    def to_json(self) -> dict:
        return {
            "train": self.train,
            "validation": self.validation,
            "test": self.test,
            "test_folds": self.test_folds,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CorpusSplit":
        return cls(obj["train"], obj["validation"], obj["test"], obj["test_folds"])


def word_tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs; internal apostrophes and hyphens are kept."""
    return [m.group(0).lower() for m in _WORD_RE.finditer(text)]


def parse_text(text: str, index: AuthorityIndex) -> list[Word | NormalizedCitation]:
    """Tokenize ``text``, leaving normalized citations where the citation spans were.

    This is the vocabulary-independent half of :func:`tokenize`.
    """
    out: list[Word | NormalizedCitation] = []
    pos = 0
    for raw, normalized in normalize_text(text, index):
        out.extend(Word(w) for w in word_tokenize(text[pos : raw.start]))
        out.extend(normalized)
        pos = raw.end
    out.extend(Word(w) for w in word_tokenize(text[pos:]))
    return out


def index_tokens(parsed: Iterable[Word | NormalizedCitation], vocab: CitationVocabulary) -> list[Token]:
    return [t if isinstance(t, Word) else Cite(vocab.lookup(t.key)) for t in parsed]


def tokenize(text: str, vocab: CitationVocabulary, index: AuthorityIndex) -> list[Token]:
    """Words and vocabulary-indexed citation tokens, in source order.

    Citations missing from ``vocab`` map to its UNK index.
    """
    return index_tokens(parse_text(text, index), vocab)


# ---------------------------------------------------------------------------
# token encodings

def encode_token(tok: Token) -> list:
    return ["w", tok.term] if isinstance(tok, Word) else ["c", tok.index]


def decode_token(obj: Sequence) -> Token:
    tag, value = obj[0], obj[1]
    if tag == "w":
        return Word(value)
    if tag == "c":
        return Cite(int(value))
    raise ValueError(f"unknown token tag {tag!r}")


def encode_parsed(tok: Word | NormalizedCitation) -> list:
    if isinstance(tok, Word):
        return ["w", tok.term]
    return ["k", tok.citation_class.value, tok.key]


def decode_parsed(obj: Sequence) -> Word | NormalizedCitation:
    if obj[0] == "w":
        return Word(obj[1])
    if obj[0] == "k":
        return NormalizedCitation(CitationClass(obj[1]), obj[2])
    raise ValueError(f"unknown token tag {obj[0]!r}")


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def read_corpus(path: str | Path) -> Iterator[tuple[str, str, Metadata]]:
    """Yield ``(id, text, metadata)`` from the corpus JSONL input."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            obj = json.loads(line)
            try:
                meta = Metadata(int(obj["year"]), int(obj["issue_area"]), int(obj["vlj"]))
                yield str(obj["id"]), obj["text"], meta
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: incomplete corpus record ({exc})") from exc


def write_tokenized(docs: Iterable[Document], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(_dumps({"id": doc.id, "tokens": [encode_token(t) for t in doc.tokens]}) + "\n")
            n += 1
    return n


def read_tokenized(path: str | Path, metadata: dict[str, Metadata]) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            docs.append(Document(obj["id"], [decode_token(t) for t in obj["tokens"]], metadata[obj["id"]]))
    return docs


# ---------------------------------------------------------------------------
# splits

def _largest_remainder(n: int, ratios: Sequence[float]) -> list[int]:
    exact = [n * r for r in ratios]
    sizes = [int(x) for x in exact]
    leftover = n - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[:leftover]:
        sizes[i] += 1
    return sizes


def _shuffle_key(seed: int, doc_id: str) -> tuple[bytes, str]:
    return hashlib.sha256(f"{seed}\x00{doc_id}".encode()).digest(), doc_id


def split_corpus(
    ids: Sequence[str],
    ratios: Sequence[float] = (0.72, 0.18, 0.10),
    seed: int = 0,
    n_folds: int = 6,
) -> CorpusSplit:
    """Seeded train/validation/test split with round-robin test folds.

    The shuffle is keyed on a hash of (seed, id), so the result does not
    depend on the order of ``ids``.
    """
    if len(set(ids)) != len(ids):
        raise ValueError("document ids must be distinct")
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    shuffled = sorted(ids, key=lambda d: _shuffle_key(seed, d))
    n_train, n_val, n_test = _largest_remainder(len(shuffled), ratios)
    train = shuffled[:n_train]
    validation = shuffled[n_train : n_train + n_val]
    test = shuffled[n_train + n_val :]
    if n_test < n_folds:
        raise ValueError(f"test set has {n_test} documents; need at least {n_folds} to form folds")
    folds = [test[i::n_folds] for i in range(n_folds)]
    return CorpusSplit(train, validation, test, folds)
