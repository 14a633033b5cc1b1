"""The ranked recommendation list shared by every recommender."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

# Scores equal to this many decimals are ties and fall back to the citation index.
SCORE_DECIMALS = 12


@dataclass(frozen=True)
class RankedList:
    items: tuple[tuple[int, float], ...] = ()

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def indices(self) -> list[int]:
        return [c for c, _ in self.items]

    @property
    def scores(self) -> dict[int, float]:
        return dict(self.items)

    def top(self, n: int) -> "RankedList":
        return RankedList(self.items[:n])

    def rank_of(self, citation: int) -> int | None:
        """1-based rank of ``citation``, or None when absent."""
        for rank, (c, _) in enumerate(self.items, 1):
            if c == citation:
                return rank
        return None

    @classmethod
    def from_scores(
        cls,
        scores: Mapping[int, float] | Iterable[tuple[int, float]],
        top_n: int | None = None,
        exclude: Iterable[int] = (),
    ) -> "RankedList":
        """Rank by descending score, ties by ascending index."""
        pairs = scores.items() if isinstance(scores, Mapping) else scores
        banned = set(exclude)
        ranked = sorted(
            ((int(c), round(float(s), SCORE_DECIMALS)) for c, s in pairs if c not in banned),
            key=lambda item: (-item[1], item[0]),
        )
        if top_n is not None:
            ranked = ranked[: max(top_n, 0)]
        return cls(tuple(ranked))

    def to_json(self) -> list[dict]:
        return [{"index": c, "score": s} for c, s in self.items]
