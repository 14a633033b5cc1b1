"""Context-aware recommendation from banks of tf-idf citation contexts.

Every training occurrence of a citation contributes the unit-norm tf-idf
vector of the tokens preceding it. A query context is scored against a
citation by the mean squared dot product with that citation's stored
contexts, so a citation whose contexts all look like the query scores 1.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .cf import SparseVector
from .corpus import Cite, Document, Token, Word
from .ranking import RankedList

BANK_FORMAT = "citerec-context-bank"
BANK_VERSION = 1

_DIGIT_RE = re.compile(r"\d")


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    text = resources.files("citerec").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip() and not w.startswith("#"))


def citation_term(index: int) -> str:
    return f"<cite:{index}>"


@dataclass
class TextVocabulary:
    """Word terms followed by one pseudo-term per citation index."""

    terms: list[str]
    df: list[int]
    idf: list[float]
    term_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if not (len(self.terms) == len(self.df) == len(self.idf)):
            raise ValueError("terms, df and idf differ in length")
        self.term_index = {t: i for i, t in enumerate(self.terms)}

    def __len__(self) -> int:
        return len(self.terms)

    def index_of(self, tok: Token) -> int | None:
        key = tok.term if isinstance(tok, Word) else citation_term(tok.index)
        return self.term_index.get(key)

    def to_tsv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("term\tdf\tidf\n")
            for t, d, w in zip(self.terms, self.df, self.idf):
                fh.write(f"{t}\t{d}\t{w!r}\n")

    @classmethod
    def from_tsv(cls, path: str | Path) -> "TextVocabulary":
        terms, df, idf = [], [], []
        with open(path, encoding="utf-8") as fh:
            if fh.readline().rstrip("\n") != "term\tdf\tidf":
                raise ValueError(f"{path}: not a text vocabulary file")
            for line in fh:
                t, d, w = line.rstrip("\n").split("\t")
                terms.append(t)
                df.append(int(d))
                idf.append(float(w))
        return cls(terms, df, idf)


def build_text_vocab(
    train_docs: Sequence[Document],
    n_citations: int,
    max_terms: int = 25_000,
    min_df: int = 10,
    stopwords: Iterable[str] | None = None,
) -> TextVocabulary:
    """Select word terms and append citation pseudo-terms.

    Stopwords, words containing a digit and words in fewer than ``min_df``
    documents are dropped; the ``max_terms`` most frequent remaining words
    are kept, ties going to the lexicographically smaller word.
    ``idf = ln(N / df)`` over the N training documents; citations never seen
    in training get ``df`` floored at 1 for the idf.
    """
    stop = default_stopwords() if stopwords is None else frozenset(stopwords)
    n = len(train_docs)
    if n == 0:
        return TextVocabulary([], [], [])
    freq: Counter[str] = Counter()
    word_df: Counter[str] = Counter()
    cite_df: Counter[int] = Counter()
    for doc in train_docs:
        words = [t.term for t in doc.tokens if isinstance(t, Word)]
        freq.update(words)
        word_df.update(set(words))
        cite_df.update({t.index for t in doc.tokens if isinstance(t, Cite)})

    eligible = [
        w for w in freq
        if w not in stop and not _DIGIT_RE.search(w) and word_df[w] >= min_df
    ]
    eligible.sort(key=lambda w: (-freq[w], w))
    words = eligible[:max_terms]

    terms = list(words) + [citation_term(c) for c in range(n_citations)]
    df = [word_df[w] for w in words] + [cite_df[c] for c in range(n_citations)]
    idf = [math.log(n / max(d, 1)) for d in df]
    return TextVocabulary(terms, df, idf)


def context_vector(window: Iterable[Token], tv: TextVocabulary) -> SparseVector:
    """L2-normalized tf-idf vector of the in-vocabulary tokens of ``window``."""
    tf: Counter[int] = Counter()
    for tok in window:
        i = tv.index_of(tok)
        if i is not None:
            tf[i] += 1
    weights = {i: n * tv.idf[i] for i, n in tf.items() if tv.idf[i] != 0}
    norm = math.sqrt(sum(w * w for w in weights.values()))
    if norm == 0:
        return SparseVector(len(tv))
    return SparseVector.from_dict(len(tv), {i: w / norm for i, w in weights.items()})


def preceding_window(tokens: Sequence[Token], position: int, length: int) -> Sequence[Token]:
    return tokens[max(0, position - length) : position]


class ContextBank:
    """Per-citation stored context vectors, at most ``cap`` each."""

    def __init__(self, dims: int, contexts: Mapping[int, Sequence[SparseVector]], cap: int = 100, seed: int = 0, context_len: int = 50):
        self.dims = dims
        self.cap = cap
        self.seed = seed
        self.context_len = context_len
        self.contexts: dict[int, list[SparseVector]] = {c: list(v) for c, v in sorted(contexts.items()) if v}
        for c, vecs in self.contexts.items():
            if len(vecs) > cap:
                raise ValueError(f"citation {c} has {len(vecs)} contexts, cap is {cap}")
            if any(v.dims != dims for v in vecs):
                raise ValueError("context vectors must share the text vocabulary dimension")

        self.citations = np.array(sorted(self.contexts), dtype=int)
        owner, rows, cols, vals = [], [], [], []
        r = 0
        for slot, c in enumerate(self.citations):
            for v in self.contexts[int(c)]:
                owner.append(slot)
                rows.extend([r] * len(v.indices))
                cols.extend(v.indices)
                vals.extend(v.weights)
                r += 1
        self._owner = np.array(owner, dtype=int)
        self._k = np.array([len(self.contexts[int(c)]) for c in self.citations], dtype=float)
        self._matrix = sp.csr_matrix((vals, (rows, cols)), shape=(r, dims), dtype=float)

    def k(self, citation: int) -> int:
        return len(self.contexts.get(citation, ()))

    def vectors(self) -> Iterable[SparseVector]:
        for vecs in self.contexts.values():
            yield from vecs

    def score(self, query: SparseVector, citation: int) -> float:
        return context_score(query, citation, self)

    def scores(self, query: SparseVector) -> dict[int, float]:
        """Score of every banked citation against ``query``."""
        if not len(self.citations) or not query.indices:
            return {}
        q = np.zeros(self.dims)
        q[list(query.indices)] = query.weights
        dots = self._matrix @ q
        sums = np.bincount(self._owner, weights=dots * dots, minlength=len(self.citations))
        return {int(c): float(s) for c, s in zip(self.citations, sums / self._k)}

    def to_json(self) -> dict:
        return {
            "format": BANK_FORMAT,
            "version": BANK_VERSION,
            "dims": self.dims,
            "cap": self.cap,
            "seed": self.seed,
            "context_len": self.context_len,
            "contexts": [
                {"citation": c, "vectors": [[list(v.indices), list(v.weights)] for v in vecs]}
                for c, vecs in self.contexts.items()
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ContextBank":
        if obj.get("format") != BANK_FORMAT or obj.get("version") != BANK_VERSION:
            raise ValueError(f"not a {BANK_FORMAT} v{BANK_VERSION} artifact")
        dims = obj["dims"]
        contexts = {
            e["citation"]: [SparseVector(dims, tuple(i), tuple(w)) for i, w in e["vectors"]]
            for e in obj["contexts"]
        }
        return cls(dims, contexts, obj["cap"], obj["seed"], obj["context_len"])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), separators=(",", ":")) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ContextBank":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def build_context_bank(
    train_docs: Sequence[Document],
    tv: TextVocabulary,
    context_len: int = 50,
    cap: int = 100,
    seed: int = 0,
    unk_index: int | None = None,
) -> ContextBank:
    """Collect the preceding-token context of every training citation occurrence.

    Occurrences are ordered by (doc id, position). A citation with more than
    ``cap`` occurrences keeps a uniform subset drawn from an RNG seeded by
    ``(seed, citation)``, so the result is independent of build order.
    """
    occurrences: dict[int, list[tuple[str, int]]] = defaultdict(list)
    by_id = {}
    for doc in train_docs:
        by_id[doc.id] = doc
        for pos, tok in enumerate(doc.tokens):
            if isinstance(tok, Cite) and tok.index != unk_index:
                occurrences[tok.index].append((doc.id, pos))

    contexts: dict[int, list[SparseVector]] = {}
    for c, occ in occurrences.items():
        occ.sort()
        if len(occ) > cap:
            rng = np.random.default_rng([seed, c])
            keep = np.sort(rng.choice(len(occ), size=cap, replace=False))
            occ = [occ[i] for i in keep]
        contexts[c] = [
            context_vector(preceding_window(by_id[d].tokens, pos, context_len), tv) for d, pos in occ
        ]
    return ContextBank(len(tv), contexts, cap, seed, context_len)


def context_score(query: SparseVector, citation: int, bank: ContextBank) -> float:
    vecs = bank.contexts.get(citation)
    if not vecs:
        return 0.0
    return sum(query.dot(b) ** 2 for b in vecs) / len(vecs)


@dataclass
class ContextRecommender:
    tv: TextVocabulary
    bank: ContextBank
    unk_index: int | None = None

    def recommend(self, window: Sequence[Token], top_n: int = 20) -> RankedList:
        """Rank banked citations for a query context; zero scores are omitted."""
        query = context_vector(window, self.tv)
        scores = {c: s for c, s in self.bank.scores(query).items() if s > 0}
        exclude = () if self.unk_index is None else (self.unk_index,)
        return RankedList.from_scores(scores, top_n, exclude)


def recommend(query_window: Sequence[Token], bank: ContextBank, tv: TextVocabulary, top_n: int = 20, unk_index: int | None = None) -> RankedList:
    return ContextRecommender(tv, bank, unk_index).recommend(query_window, top_n)


def majority_recommend(counts: Sequence[int], top_n: int = 20, unk_index: int | None = None) -> RankedList:
    """The ``top_n`` most frequent training citations, whatever the query."""
    scores = {i: float(n) for i, n in enumerate(counts) if i != unk_index}
    return RankedList.from_scores(scores, top_n)
