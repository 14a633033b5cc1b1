"""User-based top-K collaborative filtering over document citation vectors.

Each training document is a "user" and each citation an "item". A query
(the citations already present in a draft) is vectorized the same way, its
K most cosine-similar training documents are found, and every citation is
scored by the similarity-weighted average of those neighbours' weights.
"""

from __future__ import annotations

import enum
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .ranking import SCORE_DECIMALS, RankedList

FORMAT = "citerec-cf-model"
VERSION = 1


class Scheme(str, enum.Enum):
    BINARY = "binary"
    TF = "tf"
    TFIDF = "tfidf"


@dataclass(frozen=True)
class SparseVector:
    dims: int
    indices: tuple[int, ...] = ()
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.indices) != len(self.weights):
            raise ValueError("indices and weights differ in length")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("indices must be strictly increasing")
        if self.indices and (self.indices[0] < 0 or self.indices[-1] >= self.dims):
            raise ValueError(f"index out of range for dims={self.dims}")
        if any(w == 0 for w in self.weights):
            raise ValueError("zero weights are not stored")

    @classmethod
    def from_dict(cls, dims: int, weights: Mapping[int, float]) -> "SparseVector":
        items = sorted((i, w) for i, w in weights.items() if w != 0)
        return cls(dims, tuple(i for i, _ in items), tuple(float(w) for _, w in items))

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.indices, self.weights))

    def norm(self) -> float:
        return math.sqrt(sum(w * w for w in self.weights))

    def dot(self, other: "SparseVector") -> float:
        if self.dims != other.dims:
            raise ValueError(f"dimension mismatch: {self.dims} vs {other.dims}")
        small, large = (self, other) if len(self.indices) <= len(other.indices) else (other, self)
        lookup = large.as_dict()
        return sum(w * lookup.get(i, 0.0) for i, w in zip(small.indices, small.weights))


def doc_vector(
    citations: Iterable[int],
    scheme: Scheme = Scheme.BINARY,
    dims: int | None = None,
    idf: Sequence[float] | Mapping[int, float] | None = None,
) -> SparseVector:
    counts = Counter(citations)
    if dims is None:
        dims = max(counts, default=-1) + 1
    scheme = Scheme(scheme)
    if scheme is Scheme.TFIDF and idf is None:
        raise ValueError("tf-idf weighting needs idf values")
    if scheme is Scheme.BINARY:
        weights = {c: 1.0 for c in counts}
    elif scheme is Scheme.TF:
        weights = {c: float(n) for c, n in counts.items()}
    else:
        weights = {c: n * float(idf[c]) for c, n in counts.items()}
    return SparseVector.from_dict(dims, weights)


def cosine(u: SparseVector, v: SparseVector) -> float:
    if u.dims != v.dims:
        raise ValueError(f"dimension mismatch: {u.dims} vs {v.dims}")
    nu, nv = u.norm(), v.norm()
    if nu == 0 or nv == 0:
        return 0.0
    return u.dot(v) / (nu * nv)


@dataclass
class CfModel:
    """Training-document citation vectors plus the neighbourhood size K.

    ``doc_ids`` are kept sorted; row ``i`` of the internal matrix belongs to
    ``doc_ids[i]``.
    """

    scheme: Scheme
    k: int
    dims: int
    doc_ids: list[str]
    vectors: list[SparseVector]
    unk_index: int | None = None
    idf: list[float] | None = None
    _matrix: sp.csr_matrix = field(init=False, repr=False)
    _norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.scheme = Scheme(self.scheme)
        if self.k < 1:
            raise ValueError("K must be positive")
        if any(v.dims != self.dims for v in self.vectors):
            raise ValueError("all document vectors must share the vocabulary dimension")
        if list(self.doc_ids) != sorted(self.doc_ids):
            raise ValueError("doc_ids must be sorted")
        rows, cols, vals = [], [], []
        for r, v in enumerate(self.vectors):
            rows.extend([r] * len(v.indices))
            cols.extend(v.indices)
            vals.extend(v.weights)
        self._matrix = sp.csr_matrix((vals, (rows, cols)), shape=(len(self.vectors), self.dims), dtype=float)
        self._norms = np.array([v.norm() for v in self.vectors], dtype=float)

    @classmethod
    def fit(
        cls,
        docs: Iterable[tuple[str, Sequence[int]]],
        dims: int,
        scheme: Scheme | str = Scheme.BINARY,
        k: int = 50,
        unk_index: int | None = None,
    ) -> "CfModel":
        """Build from ``(doc_id, citation indices)`` pairs; UNK citations are dropped."""
        scheme = Scheme(scheme)
        cleaned = sorted((doc_id, [c for c in cites if c != unk_index]) for doc_id, cites in docs)
        idf = None
        if scheme is Scheme.TFIDF:
            df = Counter(c for _, cites in cleaned for c in set(cites))
            n = len(cleaned)
            idf = [math.log(n / df[c]) if df[c] else 0.0 for c in range(dims)]
        vectors = [doc_vector(cites, scheme, dims, idf) for _, cites in cleaned]
        return cls(scheme, k, dims, [d for d, _ in cleaned], vectors, unk_index, idf)

    def query_vector(self, partial: Iterable[int]) -> SparseVector:
        return doc_vector((c for c in partial if c != self.unk_index), self.scheme, self.dims, self.idf)

    def neighbors(self, query: SparseVector) -> tuple[np.ndarray, np.ndarray]:
        """Row positions and cosine similarities of the K nearest training docs."""
        qn = query.norm()
        if qn == 0 or not self.vectors:
            return np.empty(0, dtype=int), np.empty(0)
        q = np.zeros(self.dims)
        q[list(query.indices)] = query.weights
        dots = self._matrix @ q
        denom = self._norms * qn
        sims = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
        positions = np.arange(len(sims))
        order = np.lexsort((positions, -np.round(sims, SCORE_DECIMALS)))[: self.k]
        return order, sims[order]

    def recommend(self, partial: Sequence[int], top_n: int = 20) -> RankedList:
        """Rank citations not already in ``partial`` for a draft citing ``partial``.

        Citations no neighbour cites, and every score when all neighbour
        similarities are zero, are left out of the result.
        """
        rows, sims = self.neighbors(self.query_vector(partial))
        total = float(sims.sum())
        if total <= 0:
            return RankedList()
        weighted = sp.csr_matrix(sims[np.newaxis, :]) @ self._matrix[rows]
        weighted = weighted.tocoo()
        scores = {int(c): float(v) / total for c, v in zip(weighted.col, weighted.data) if v > 0}
        exclude = set(partial)
        if self.unk_index is not None:
            exclude.add(self.unk_index)
        return RankedList.from_scores(scores, top_n, exclude)

    # -- persistence -------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "scheme": self.scheme.value,
            "K": self.k,
            "dims": self.dims,
            "unk_index": self.unk_index,
            "idf": self.idf,
            "docs": [
                {"id": d, "indices": list(v.indices), "weights": list(v.weights)}
                for d, v in zip(self.doc_ids, self.vectors)
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CfModel":
        if obj.get("format") != FORMAT or obj.get("version") != VERSION:
            raise ValueError(f"not a {FORMAT} v{VERSION} artifact")
        dims = obj["dims"]
        vectors = [SparseVector(dims, tuple(d["indices"]), tuple(d["weights"])) for d in obj["docs"]]
        return cls(obj["scheme"], obj["K"], dims, [d["id"] for d in obj["docs"]], vectors, obj["unk_index"], obj["idf"])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), separators=(",", ":")) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CfModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
