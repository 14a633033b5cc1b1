"""Context/forecast window sampling over tokenized documents.

An offset ``o`` splits a document into a context (the up to ``l`` tokens
before ``o``) and a forecast window ``[o, o + w)``. The target is the first
non-UNK citation inside the forecast window. One offset is drawn per
document per epoch, uniformly among the offsets that have a target.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .corpus import Cite, Document, Metadata, Token, encode_token


@dataclass(frozen=True)
class WindowSpec:
    context_len: int = 256
    forecast_len: int = 128

    def __post_init__(self):
        if self.context_len < 1 or self.forecast_len < 1:
            raise ValueError("context and forecast lengths must be >= 1")


@dataclass(frozen=True)
class WindowInstance:
    doc_id: str
    offset: int
    context: tuple[Token, ...]
    target: int
    distance: int
    metadata: Metadata

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "offset": self.offset,
            "context": [encode_token(t) for t in self.context],
            "target": self.target,
            "distance": self.distance,
            "year": self.metadata.year,
            "issue_area": self.metadata.issue_area,
            "vlj": self.metadata.vlj,
        }


def _target_positions(tokens: Sequence[Token], unk_index: int | None) -> list[int]:
    return [i for i, t in enumerate(tokens) if isinstance(t, Cite) and t.index != unk_index]


def valid_offsets(doc: Document, spec: WindowSpec, unk_index: int | None = None) -> list[int]:
    """Offsets in ``[1, len - 1]`` whose forecast window holds a non-UNK citation."""
    n = len(doc.tokens)
    out = []
    positions = _target_positions(doc.tokens, unk_index)
    j = 0
    for o in range(1, n):
        while j < len(positions) and positions[j] < o:
            j += 1
        if j < len(positions) and positions[j] < o + spec.forecast_len:
            out.append(o)
    return out


def instance_at(doc: Document, offset: int, spec: WindowSpec, unk_index: int | None = None) -> WindowInstance | None:
    for pos in range(offset, min(offset + spec.forecast_len, len(doc.tokens))):
        tok = doc.tokens[pos]
        if isinstance(tok, Cite) and tok.index != unk_index:
            context = tuple(doc.tokens[max(0, offset - spec.context_len) : offset])
            return WindowInstance(doc.id, offset, context, tok.index, pos - offset + 1, doc.metadata)
    return None


def doc_rng(seed: int, doc_id: str, epoch: int) -> np.random.Generator:
    digest = int.from_bytes(hashlib.sha256(doc_id.encode("utf-8")).digest()[:8], "big")
    return np.random.default_rng([seed, digest, epoch])


def sample_instance(
    doc: Document,
    spec: WindowSpec,
    rng: np.random.Generator,
    unk_index: int | None = None,
) -> WindowInstance | None:
    offsets = valid_offsets(doc, spec, unk_index)
    if not offsets:
        return None
    offset = offsets[int(rng.integers(len(offsets)))]
    return instance_at(doc, offset, spec, unk_index)


def sample_epoch(
    docs: Iterable[Document],
    spec: WindowSpec,
    seed: int,
    epoch: int = 0,
    unk_index: int | None = None,
) -> list[WindowInstance]:
    """One instance per citing document, each from its own (seed, id, epoch) stream."""
    out = []
    for doc in sorted(docs, key=lambda d: d.id):
        inst = sample_instance(doc, spec, doc_rng(seed, doc.id, epoch), unk_index)
        if inst is not None:
            out.append(inst)
    return out


def all_instances(docs: Iterable[Document], spec: WindowSpec, unk_index: int | None = None) -> list[WindowInstance]:
    """Every valid offset of every document (exhaustive evaluation)."""
    out = []
    for doc in sorted(docs, key=lambda d: d.id):
        for o in valid_offsets(doc, spec, unk_index):
            out.append(instance_at(doc, o, spec, unk_index))
    return out


class ExportError(IOError):
    def __init__(self, message: str, written: int):
        super().__init__(f"{message} (after {written} instances)")
        self.written = written


def export_instances(
    docs: Sequence[Document],
    spec: WindowSpec,
    epochs: int,
    seed: int,
    sink: IO[str],
    unk_index: int | None = None,
) -> int:
    """Write one JSONL instance per citing document per epoch; returns the line count."""
    written = 0
    for epoch in range(epochs):
        for inst in sample_epoch(docs, spec, seed, epoch, unk_index):
            line = json.dumps(inst.to_json(), ensure_ascii=False, separators=(",", ":")) + "\n"
            try:
                sink.write(line)
            except (OSError, ValueError) as exc:
                raise ExportError(f"writing window instances failed: {exc}", written) from exc
            written += 1
    return written
