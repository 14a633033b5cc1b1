"""Recall@k evaluation for the citation-list and context protocols."""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .corpus import Document
from .ranking import RankedList
from .windows import WindowSpec, all_instances, sample_epoch

DEFAULT_KS = (1, 5, 20)
BIN_WIDTH = 16


@dataclass
class EvalInstance:
    ranked: RankedList
    target: int
    fold: int
    doc_id: str = ""
    citation_class: str = ""
    year: int | None = None
    distance: int | None = None
    target_count: int = 0

    def hit(self, k: int) -> int:
        return recall_at_k(self.ranked, self.target, k)


def recall_at_k(ranked: RankedList, target: int, k: int) -> int:
    return int(target in ranked.indices[:k])


def fold_stats(per_fold: Sequence[float]) -> tuple[float, float]:
    """Mean and standard error (sample std with n-1, over sqrt(n)).

    A single fold has no spread to estimate and reports a standard error of 0.
    """
    n = len(per_fold)
    if n == 0:
        raise ValueError("no folds")
    values = sorted(per_fold)
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var) / math.sqrt(n)


def distance_bins(forecast_len: int, width: int = BIN_WIDTH) -> list[tuple[int, int]]:
    return [(lo, min(lo + width - 1, forecast_len)) for lo in range(1, forecast_len + 1, width)]


@dataclass
class RecallReport:
    ks: tuple[int, ...]
    n_folds: int
    fold_sizes: list[int]
    per_fold: dict[int, list[float | None]]
    mean: dict[int, float]
    stderr: dict[int, float]
    instance_mean: dict[int, float]
    tables: dict[str, list[dict]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "ks": list(self.ks),
            "n_folds": self.n_folds,
            "fold_sizes": self.fold_sizes,
            "n_instances": sum(self.fold_sizes),
            "recall": {
                f"recall@{k}": {
                    "per_fold": self.per_fold[k],
                    "fold_mean": self.mean[k],
                    "stderr": self.stderr[k],
                    "instance_mean": self.instance_mean[k],
                }
                for k in self.ks
            },
        }

    def write(self, directory: str | Path, stem: str = "report") -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"{stem}.json"
        path.write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")
        with open(directory / f"{stem}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["k", "fold_mean", "stderr", "instance_mean", *[f"fold{i}" for i in range(self.n_folds)]])
            for k in self.ks:
                writer.writerow([k, self.mean[k], self.stderr[k], self.instance_mean[k], *["" if v is None else v for v in self.per_fold[k]]])
        for name, rows in self.tables.items():
            write_table(rows, directory / f"{stem}_{name}.csv")
        return path


def write_table(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def summarize(instances: Sequence[EvalInstance], ks: Sequence[int] = DEFAULT_KS, n_folds: int = 6, forecast_len: int | None = None) -> RecallReport:
    """Aggregate hits per fold; folds without instances are left out of the fold statistics."""
    ks = tuple(sorted(ks))
    by_fold: dict[int, list[EvalInstance]] = defaultdict(list)
    for inst in instances:
        if not 0 <= inst.fold < n_folds:
            raise ValueError(f"fold {inst.fold} outside 0..{n_folds - 1}")
        by_fold[inst.fold].append(inst)
    sizes = [len(by_fold[f]) for f in range(n_folds)]
    per_fold: dict[int, list[float | None]] = {}
    mean, stderr, inst_mean = {}, {}, {}
    for k in ks:
        values = [
            sum(i.hit(k) for i in by_fold[f]) / len(by_fold[f]) if by_fold[f] else None
            for f in range(n_folds)
        ]
        per_fold[k] = values
        present = [v for v in values if v is not None]
        if present:
            mean[k], stderr[k] = fold_stats(present)
        else:
            mean[k], stderr[k] = 0.0, 0.0
        inst_mean[k] = sum(i.hit(k) for i in instances) / len(instances) if instances else 0.0
    report = RecallReport(ks, n_folds, sizes, per_fold, mean, stderr, inst_mean)
    report.tables = breakdowns(instances, ks, forecast_len)
    return report


def _group_rows(groups: Mapping, ks: Sequence[int], name: str) -> list[dict]:
    rows = []
    for key in sorted(groups):
        members = groups[key]
        row = {name: key, "n": len(members)}
        for k in ks:
            row[f"recall@{k}"] = sum(i.hit(k) for i in members) / len(members)
        rows.append(row)
    return rows


def breakdowns(instances: Sequence[EvalInstance], ks: Sequence[int] = DEFAULT_KS, forecast_len: int | None = None) -> dict[str, list[dict]]:
    """Recall grouped by citation class, year, distance bin and target citation.

    Groups without instances never appear. The per-citation table pairs each
    target's recall with its training count for frequency scatter plots.
    """
    by_class, by_year, by_dist, by_cite = (defaultdict(list) for _ in range(4))
    for inst in instances:
        if inst.citation_class:
            by_class[inst.citation_class].append(inst)
        if inst.year is not None:
            by_year[inst.year].append(inst)
        if inst.distance is not None:
            by_dist[(inst.distance - 1) // BIN_WIDTH].append(inst)
        by_cite[inst.target].append(inst)

    tables = {}
    if by_class:
        tables["by_class"] = _group_rows(by_class, ks, "class")
    if by_year:
        tables["by_year"] = _group_rows(by_year, ks, "year")
    if by_dist:
        rows = _group_rows(by_dist, ks, "bin")
        for row in rows:
            b = row["bin"]
            lo, hi = b * BIN_WIDTH + 1, (b + 1) * BIN_WIDTH
            if forecast_len is not None:
                hi = min(hi, forecast_len)
            row["bin"] = f"{lo}-{hi}"
        tables["by_distance"] = rows
    if by_cite:
        rows = _group_rows(by_cite, ks, "citation")
        counts = {i.target: i.target_count for i in instances}
        tables["by_citation"] = [
            {"citation": r["citation"], "train_count": counts[r["citation"]], **{k: v for k, v in r.items() if k != "citation"}}
            for r in rows
        ]
    return tables


# ---------------------------------------------------------------------------
# protocols

def citation_list_instances(
    rank: Callable[[list[int], Document], RankedList],
    docs: Iterable[Document],
    fold_of: Mapping[str, int],
    top_n: int = 20,
    unk_index: int | None = None,
    classes: Sequence[str] | None = None,
    train_counts: Sequence[int] | None = None,
    max_prefixes: int | None = None,
) -> list[EvalInstance]:
    """One instance per prefix length m (1 <= m < M) of each document's citations.

    The (m+1)-th citation is the target. Targets that are UNK or already in
    the prefix are skipped, as is the UNK index within prefixes.
    """
    out = []
    for doc in sorted(docs, key=lambda d: d.id):
        cites = doc.citations()
        limit = len(cites) - 1 if max_prefixes is None else min(len(cites) - 1, max_prefixes)
        for m in range(1, limit + 1):
            target = cites[m]
            prefix = cites[:m]
            if target == unk_index or target in prefix:
                continue
            partial = [c for c in prefix if c != unk_index]
            ranked = rank(partial, doc).top(top_n)
            out.append(EvalInstance(
                ranked, target, fold_of[doc.id], doc.id,
                classes[target] if classes else "",
                doc.metadata.year, None,
                train_counts[target] if train_counts else 0,
            ))
    return out


def context_instances(
    rank: Callable[[Sequence, Document], RankedList],
    docs: Iterable[Document],
    fold_of: Mapping[str, int],
    spec: WindowSpec,
    seed: int = 0,
    top_n: int = 20,
    unk_index: int | None = None,
    classes: Sequence[str] | None = None,
    train_counts: Sequence[int] | None = None,
    exhaustive: bool = False,
    epoch: int = 0,
) -> list[EvalInstance]:
    docs = list(docs)
    by_id = {d.id: d for d in docs}
    windows = all_instances(docs, spec, unk_index) if exhaustive else sample_epoch(docs, spec, seed, epoch, unk_index)
    out = []
    for w in windows:
        ranked = rank(w.context, by_id[w.doc_id]).top(top_n)
        out.append(EvalInstance(
            ranked, w.target, fold_of[w.doc_id], w.doc_id,
            classes[w.target] if classes else "",
            w.metadata.year, w.distance,
            train_counts[w.target] if train_counts else 0,
        ))
    return out


def evaluate_citation_list(rank, docs, fold_of, ks: Sequence[int] = DEFAULT_KS, n_folds: int = 6, **kwargs) -> RecallReport:
    instances = citation_list_instances(rank, docs, fold_of, top_n=max(ks), **kwargs)
    return summarize(instances, ks, n_folds)


def evaluate_context(rank, docs, fold_of, spec: WindowSpec, ks: Sequence[int] = DEFAULT_KS, seed: int = 0, n_folds: int = 6, **kwargs) -> RecallReport:
    instances = context_instances(rank, docs, fold_of, spec, seed, top_n=max(ks), **kwargs)
    return summarize(instances, ks, n_folds, spec.forecast_len)
