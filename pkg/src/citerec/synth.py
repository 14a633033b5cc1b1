"""Synthetic opinion corpora with known citation structure.

Documents belong to topics. Each topic owns a clique of citations, and a
document cites a random subset of its topic's clique, so co-citation carries
a topic signal. Each citation also owns a set of signature words, and every
occurrence of the citation is preceded by a sentence built from some of
them, so the preceding context identifies the citation far more sharply
than co-citation does. Citation strings are rendered in the surface forms
the parser understands, backed by a generated authority list.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from pathlib import Path

from .citeparse import AuthorityRecord

_CONSONANTS = "bcdfghjklmnprstvwz"
_VOWELS = "aeiou"
_RESPONDENTS = ("Brown", "Principi", "West", "Nicholson", "Shinseki", "McDonald", "Derwinski", "Peake")


@dataclass(frozen=True)
class SynthCitation:
    text: str
    kind: str
    authority: AuthorityRecord | None = None


@dataclass
class SynthCorpus:
    records: list[dict]
    authorities: list[AuthorityRecord]
    citations: list[SynthCitation]
    topic_of_doc: dict[str, int]

    def write(self, directory: str | Path) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        corpus_path = directory / "corpus.jsonl"
        with open(corpus_path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
        auth_path = directory / "authorities.csv"
        with open(auth_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["volume", "reporter", "first_page", "last_page", "authority_id", "case_name"])
            for a in self.authorities:
                writer.writerow([a.volume, a.reporter, a.first_page, a.last_page, a.authority_id, a.case_name])
        return corpus_path, auth_path


class _Words:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.used: set[str] = set()

    def fresh(self, syllables: int = 3) -> str:
        while True:
            w = "".join(self.rng.choice(_CONSONANTS) + self.rng.choice(_VOWELS) for _ in range(syllables))
            w += self.rng.choice(_CONSONANTS)
            if w not in self.used:
                self.used.add(w)
                return w


def _make_citations(n: int, rng: random.Random, words: _Words) -> tuple[list[SynthCitation], list[AuthorityRecord]]:
    citations, authorities = [], []
    used_pages: set[tuple[int, str, int]] = set()
    usc_sections = rng.sample(range(1100, 7999), n)
    cfr_sections = rng.sample(range(1, 999), n)
    for i in range(n):
        kind = ("case", "statute", "regulation")[i % 3]
        if kind == "case":
            reporter = "Vet. App." if rng.random() < 0.75 else "F.3d"
            while True:
                vol, first = rng.randint(1, 35), rng.randint(1, 900)
                if all((vol, reporter, p) not in used_pages for p in range(first - 30, first + 30)):
                    break
            used_pages.add((vol, reporter, first))
            last = first + rng.randint(3, 20)
            name = f"{words.fresh(2).capitalize()} v. {rng.choice(_RESPONDENTS)}"
            auth = AuthorityRecord(vol, reporter, first, last, f"CLA#{7_000_000 + i}", name)
            authorities.append(auth)
            citations.append(SynthCitation(f"{name}, {vol} {reporter} {first}", kind, auth))
        elif kind == "statute":
            citations.append(SynthCitation(f"38 U.S.C. § {usc_sections[i]}", kind))
        else:
            citations.append(SynthCitation(f"38 C.F.R. § 3.{cfr_sections[i]}(a)", kind))
    return citations, authorities


def _render(cit: SynthCitation, rng: random.Random) -> str:
    if cit.kind != "case":
        if rng.random() < 0.2:
            return f"{cit.text} ({rng.randint(2000, 2017)})"
        return cit.text
    a = cit.authority
    reporter = a.reporter
    if reporter == "Vet. App." and rng.random() < 0.2:
        reporter = "Vet.App."
    text = f"{a.case_name}, {a.volume} {reporter} {a.first_page}"
    if rng.random() < 0.3:
        text += f", {rng.randint(a.first_page, a.last_page)}"
    return text + f" ({rng.randint(1990, 2016)})"


def generate_corpus(
    n_docs: int = 500,
    n_topics: int = 10,
    clique_size: int = 20,
    cites_per_doc: int = 6,
    n_signature: int = 10,
    signature_per_context: int = 6,
    n_topic_words: int = 30,
    n_filler: int = 300,
    sentence_len: int = 24,
    unknown_rate: float = 0.05,
    seed: int = 0,
) -> SynthCorpus:
    rng = random.Random(seed)
    words = _Words(rng)
    stop = ["the", "of", "and", "to", "in", "that", "is", "was", "for", "with", "on", "by", "not", "as"]
    filler = [words.fresh(3) for _ in range(n_filler)]
    topic_words = [[words.fresh(3) for _ in range(n_topic_words)] for _ in range(n_topics)]
    citations, authorities = _make_citations(n_topics * clique_size, rng, words)
    signatures = [[words.fresh(3) for _ in range(n_signature)] for _ in citations]
    cliques = [list(range(t * clique_size, (t + 1) * clique_size)) for t in range(n_topics)]

    def sentence(topic: int, extra: list[str]) -> str:
        n_other = sentence_len - len(extra)
        body = extra + [
            rng.choice(topic_words[topic]) if rng.random() < 0.3
            else rng.choice(stop) if rng.random() < 0.4
            else rng.choice(filler)
            for _ in range(n_other)
        ]
        rng.shuffle(body)
        return " ".join(body)

    records, topic_of_doc = [], {}
    for d in range(n_docs):
        doc_id = f"doc{d:05d}"
        topic = rng.randrange(n_topics)
        topic_of_doc[doc_id] = topic
        parts = [sentence(topic, []) + "."]
        for c in rng.sample(cliques[topic], cites_per_doc):
            sig = rng.sample(signatures[c], signature_per_context)
            parts.append(f"{sentence(topic, sig)}, see {_render(citations[c], rng)}.")
            if rng.random() < unknown_rate:
                parts.append(f"{sentence(topic, [])}, see Unlisted v. Nobody, 99 F.3d {rng.randint(1, 999)}.")
            if rng.random() < 0.5:
                parts.append(sentence(topic, []) + ".")
        records.append({
            "id": doc_id,
            "text": " ".join(parts),
            "year": 2001 + rng.randrange(17),
            "issue_area": topic,
            "vlj": rng.randrange(25),
        })
    return SynthCorpus(records, authorities, citations, topic_of_doc)
