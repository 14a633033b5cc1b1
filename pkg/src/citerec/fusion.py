"""Metadata feature scores and pairwise (svmRank-style) fusion reranking.

A base recommender proposes candidates. Each candidate gets a feature row
``[base score, P(c | year), P(c | issue area), P(c | judge)]``; a linear
model learned from pairwise preferences combines the row into the final
score used for reranking.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Cite, Document, Metadata
from .ranking import RankedList

FEATURES = ("year", "issue_area", "vlj")


class FeatureScoreTable:
    """Laplace-smoothed P(citation | feature value) from training citation occurrences."""

    def __init__(self, n_citations: int, alpha: float = 1.0, features: Sequence[str] = FEATURES):
        if alpha < 0:
            raise ValueError("alpha must be non-negative")
        unknown = set(features) - set(FEATURES)
        if unknown:
            raise ValueError(f"unknown metadata features: {sorted(unknown)}")
        self.n_citations = n_citations
        self.alpha = alpha
        self.features = tuple(features)
        self.counts: dict[str, dict[int, Counter[int]]] = {f: defaultdict(Counter) for f in self.features}

    @classmethod
    def fit(cls, docs: Iterable[Document], n_citations: int, alpha: float = 1.0, features: Sequence[str] = FEATURES) -> "FeatureScoreTable":
        table = cls(n_citations, alpha, features)
        for doc in docs:
            cites = [t.index for t in doc.tokens if isinstance(t, Cite)]
            for f in table.features:
                table.counts[f][doc.metadata.get(f)].update(cites)
        return table

    def add(self, feature: str, value: int, citation: int, n: int = 1) -> None:
        self.counts[feature][value][citation] += n

    def score(self, feature: str, value: int, citation: int) -> float:
        row = self.counts[feature].get(value)
        total = sum(row.values()) if row else 0
        denom = total + self.alpha * self.n_citations
        if row is None or denom == 0:
            return 1.0 / self.n_citations
        return (row[citation] + self.alpha) / denom

    def to_json(self) -> dict:
        return {
            "n_citations": self.n_citations,
            "alpha": self.alpha,
            "features": list(self.features),
            "counts": {
                f: {str(v): sorted(cnt.items()) for v, cnt in sorted(self.counts[f].items())}
                for f in self.features
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureScoreTable":
        table = cls(obj["n_citations"], obj["alpha"], obj["features"])
        for f, by_value in obj["counts"].items():
            for v, pairs in by_value.items():
                table.counts[f][int(v)] = Counter({int(c): n for c, n in pairs})
        return table


def metadata_score(table: FeatureScoreTable, feature: str, value: int, citation: int) -> float:
    return table.score(feature, value, citation)


# ---------------------------------------------------------------------------
# pairwise training

@dataclass
class PairwiseDataset:
    x: np.ndarray
    y: np.ndarray
    mins: np.ndarray
    maxs: np.ndarray

    def __len__(self) -> int:
        return len(self.y)


def minmax_scale(rows: np.ndarray, mins: np.ndarray, maxs: np.ndarray) -> np.ndarray:
    """Per-column min-max scaling; constant columns map to 0."""
    span = maxs - mins
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (rows - mins) / safe, 0.0)


def pairwise_transform(instances: Iterable[tuple[Sequence[float], Sequence[Sequence[float]]]]) -> PairwiseDataset:
    """Turn (positive row, negative rows) instances into mirrored difference rows.

    Columns are min-max scaled with statistics taken over every feature row
    that takes part in a pair, so the same scaling can be applied to
    candidate rows at reranking time.
    """
    instances = [(np.asarray(p, float), np.asarray(n, float).reshape(len(n), -1)) for p, n in instances]
    instances = [(p, n) for p, n in instances if len(n)]
    if not instances:
        raise ValueError("pairwise transform needs at least one negative")
    all_rows = np.vstack([np.vstack([p[np.newaxis, :], n]) for p, n in instances])
    mins, maxs = all_rows.min(axis=0), all_rows.max(axis=0)

    xs, ys = [], []
    for pos, negs in instances:
        p = minmax_scale(pos, mins, maxs)
        for neg in minmax_scale(negs, mins, maxs):
            xs.append(p - neg)
            ys.append(1.0)
            xs.append(neg - p)
            ys.append(-1.0)
    return PairwiseDataset(np.array(xs), np.array(ys), mins, maxs)


def train_linear_svm(data: PairwiseDataset, c: float = 1.0, epochs: int = 100, seed: int = 0) -> np.ndarray:
    """Linear SVM without bias by averaged stochastic subgradient descent.

    Minimizes ``lam/2 |w|^2 + mean(hinge)`` with ``lam = 1 / (c * n)``
    (Pegasos step sizes). Returns the average of all iterates.
    """
    x, y = np.asarray(data.x, float), np.asarray(data.y, float)
    if len(y) == 0:
        raise ValueError("no training pairs")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite feature values")
    if c <= 0:
        raise ValueError("C must be positive")
    n, d = x.shape
    lam = 1.0 / (c * n)
    w = np.zeros(d)
    avg = np.zeros(d)
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            margin = y[i] * (w @ x[i])
            w *= 1.0 - 1.0 / t
            if margin < 1.0:
                w += eta * y[i] * x[i]
            avg += (w - avg) / t
    return avg


@dataclass
class FusionWeights:
    columns: list[str]
    w: np.ndarray
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, float)
        self.mins = np.asarray(self.mins, float)
        self.maxs = np.asarray(self.maxs, float)
        if not (len(self.columns) == len(self.w) == len(self.mins) == len(self.maxs)):
            raise ValueError("columns, weights and scalers differ in length")
        if not np.all(np.isfinite(self.w)):
            raise ValueError("fusion weights must be finite")

    @classmethod
    def identity(cls, columns: Sequence[str]) -> "FusionWeights":
        d = len(columns)
        w = np.zeros(d)
        w[0] = 1.0
        return cls(list(columns), w, np.zeros(d), np.ones(d))

    def to_json(self) -> dict:
        return {
            "columns": list(self.columns),
            "w": [float(v) for v in self.w],
            "scalers": [{"min": float(lo), "max": float(hi)} for lo, hi in zip(self.mins, self.maxs)],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FusionWeights":
        return cls(obj["columns"], obj["w"], [s["min"] for s in obj["scalers"]], [s["max"] for s in obj["scalers"]])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "FusionWeights":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def fuse(base: RankedList, meta_rows: Mapping[int, Sequence[float]], weights: FusionWeights, top_n: int | None = None) -> RankedList:
    """Rerank the candidates of ``base`` by the learned linear combination."""
    final = {}
    for citation, score in base:
        row = np.concatenate([[score], np.asarray(meta_rows.get(citation, ()), float)])
        if len(row) != len(weights.w):
            raise ValueError(f"feature row has {len(row)} columns, weights have {len(weights.w)}")
        final[citation] = float(weights.w @ minmax_scale(row, weights.mins, weights.maxs))
    return RankedList.from_scores(final, top_n)


def feature_rows(candidates: Iterable[int], table: FeatureScoreTable, metadata: Metadata) -> dict[int, list[float]]:
    return {c: [table.score(f, metadata.get(f), c) for f in table.features] for c in candidates}


def collect_instances(
    samples: Iterable[tuple[RankedList, int, Metadata]],
    table: FeatureScoreTable,
) -> list[tuple[list[float], list[list[float]]]]:
    """Training instances from base rankings: the true citation against the rest.

    Samples whose target is not among the base candidates are skipped.
    """
    out = []
    for ranked, target, meta in samples:
        scores = ranked.scores
        if target not in scores or len(scores) < 2:
            continue
        meta_rows = feature_rows(scores, table, meta)
        pos = [scores[target], *meta_rows[target]]
        negs = [[s, *meta_rows[c]] for c, s in ranked if c != target]
        out.append((pos, negs))
    return out


def train_fusion(
    samples: Iterable[tuple[RankedList, int, Metadata]],
    table: FeatureScoreTable,
    c: float = 1.0,
    epochs: int = 100,
    seed: int = 0,
) -> FusionWeights:
    data = pairwise_transform(collect_instances(samples, table))
    w = train_linear_svm(data, c, epochs, seed)
    return FusionWeights(["base", *table.features], w, data.mins, data.maxs)


@dataclass
class FusedRecommender:
    """Wrap a base ``recommend(query, top_n)`` callable with metadata reranking."""

    base: object
    table: FeatureScoreTable
    weights: FusionWeights
    n_candidates: int = 50

    def recommend(self, query, metadata: Metadata, top_n: int = 20) -> RankedList:
        ranked = self.base.recommend(query, self.n_candidates)
        return fuse(ranked, feature_rows(ranked.indices, self.table, metadata), self.weights, top_n)
