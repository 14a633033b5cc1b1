"""Pipeline stages over content-addressed artifact directories.

Every stage writes into ``<artifacts>/<stage>-<hash>/`` where the hash
covers the configuration values the stage reads plus the hash of each
upstream stage (and, for ``ingest``, the bytes of the input files). A
changed setting therefore lands in a fresh directory instead of silently
mixing with stale artifacts.

Stage order: ingest -> split -> vocab -> {cf, context} -> fusion -> evaluate.
``export`` depends on vocab only.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from .cf import CfModel
from .citeparse import AuthorityIndex, CitationVocabulary, build_vocabulary
from .config import Config
from .context import ContextBank, ContextRecommender, TextVocabulary, build_context_bank, build_text_vocab, majority_recommend, preceding_window
from .corpus import (
    Cite,
    CorpusSplit,
    Document,
    Metadata,
    decode_parsed,
    encode_parsed,
    index_tokens,
    parse_text,
    read_corpus,
    read_tokenized,
    split_corpus,
    write_tokenized,
)
from .evaluate import RecallReport, evaluate_citation_list, evaluate_context
from .fusion import FeatureScoreTable, FusedRecommender, FusionWeights, train_fusion
from .ranking import RankedList
from .windows import WindowSpec, export_instances

log = logging.getLogger(__name__)

STAGE_KEYS: dict[str, tuple[str, ...]] = {
    "ingest": ("reporters",),
    "split": ("seed", "ratios", "n_folds"),
    "vocab": ("min_count",),
    "cf": ("scheme", "k_neighbors"),
    "context": ("context_len", "bank_cap", "max_terms", "min_df", "seed"),
    "majority": (),
    "fusion": ("features", "alpha", "fusion_docs", "fusion_candidates", "svm_c", "svm_epochs", "seed"),
    "evaluate": ("ks", "eval_forecast", "context_len", "seed", "max_prefixes", "exhaustive_eval", "n_folds"),
    "export": ("window_context", "window_forecast", "export_epochs", "export_split", "seed"),
}

MODELS = ("cf", "context", "majority")


COMMANDS = {"cf": "train-cf", "context": "train-context", "fusion": "train-fusion"}


class MissingArtifact(RuntimeError):
    def __init__(self, stage: str, path: Path):
        command = COMMANDS.get(stage, stage)
        super().__init__(f"missing artifact for stage '{stage}' ({path}); run `citerec {command}` first")
        self.stage = stage


def _file_digest(path: str | Path) -> str:
    stat = Path(path).stat()
    return _digest_cached(str(Path(path).resolve()), stat.st_mtime_ns, stat.st_size)


@lru_cache(maxsize=64)
def _digest_cached(path: str, mtime_ns: int, size: int) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class Pipeline:
    cfg: Config

    # -- addressing ---------------------------------------------------------

    def _parents(self, stage: str, model: str | None, fused: bool) -> list[tuple[str, str | None, bool]]:
        if stage == "ingest":
            return []
        if stage == "split":
            return [("ingest", None, False)]
        if stage == "vocab":
            return [("split", None, False)]
        if stage in ("cf", "context", "majority", "export"):
            return [("vocab", None, False)]
        if stage == "fusion":
            return [(model, None, False)]
        if stage == "evaluate":
            return [("fusion", model, False)] if fused else [(model, None, False)]
        raise ValueError(f"unknown stage {stage}")

    def stage_hash(self, stage: str, model: str | None = None, fused: bool = False) -> str:
        payload = {
            "stage": stage,
            "model": model,
            "fused": fused,
            "config": {k: getattr(self.cfg, k) for k in STAGE_KEYS[stage]},
            "parents": [self.stage_hash(*p) for p in self._parents(stage, model, fused)],
        }
        if stage == "ingest":
            if not self.cfg.corpus or not self.cfg.authorities:
                raise ValueError("ingest needs both a corpus and an authorities file")
            payload["inputs"] = [_file_digest(self.cfg.corpus), _file_digest(self.cfg.authorities)]
        return hashlib.sha256(_dump(payload).encode()).hexdigest()[:16]

    def stage_dir(self, stage: str, model: str | None = None, fused: bool = False) -> Path:
        name = stage if model is None else f"{stage}-{model}"
        if fused:
            name += "-fused"
        return Path(self.cfg.artifacts) / f"{name}-{self.stage_hash(stage, model, fused)}"

    def _require(self, stage: str, filename: str, model: str | None = None) -> Path:
        path = self.stage_dir(stage, model) / filename
        if not path.exists():
            raise MissingArtifact(*self._earliest_missing(stage, model, path))
        return path

    def _earliest_missing(self, stage: str, model: str | None, path: Path) -> tuple[str, Path]:
        """The most upstream stage without an artifact directory, for error messages."""
        missing = (stage, path)
        node: tuple[str, str | None] | None = (stage, model)
        while node is not None:
            s, m = node
            d = self.stage_dir(s, m)
            if s != "majority" and not d.exists():
                missing = (s, d)
            parents = self._parents(s, m, False)
            node = parents[0][:2] if parents else None
        return missing

    def _fresh_dir(self, stage: str, model: str | None = None, fused: bool = False) -> Path:
        d = self.stage_dir(stage, model, fused)
        d.mkdir(parents=True, exist_ok=True)
        return d

    # -- loading ------------------------------------------------------------

    def authority_index(self) -> AuthorityIndex:
        return AuthorityIndex.from_csv(self.cfg.authorities, self.cfg.reporters)

    def parsed(self) -> list[dict]:
        path = self._require("ingest", "parsed.jsonl")
        with open(path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh]

    def metadata(self) -> dict[str, Metadata]:
        return {r["id"]: Metadata(r["year"], r["issue_area"], r["vlj"]) for r in self.parsed()}

    def split(self) -> CorpusSplit:
        return CorpusSplit.from_json(json.loads(self._require("split", "split.json").read_text(encoding="utf-8")))

    def vocab(self) -> CitationVocabulary:
        return CitationVocabulary.from_tsv(self._require("vocab", "vocab.tsv"))

    def documents(self) -> dict[str, Document]:
        docs = read_tokenized(self._require("vocab", "tokens.jsonl"), self.metadata())
        return {d.id: d for d in docs}

    def cf_model(self) -> CfModel:
        return CfModel.load(self._require("cf", "cf_model.json"))

    def context_model(self) -> ContextRecommender:
        tv = TextVocabulary.from_tsv(self._require("context", "text_vocab.tsv"))
        bank = ContextBank.load(self._require("context", "context_bank.json"))
        return ContextRecommender(tv, bank, self.vocab().unk_index)

    def fused_model(self, model: str):
        d = self.stage_dir("fusion", model)
        weights = FusionWeights.load(self._require("fusion", "fusion.json", model))
        table = FeatureScoreTable.from_json(json.loads((d / "feature_table.json").read_text(encoding="utf-8")))
        return FusedRecommender(self.base_model(model), table, weights, self.cfg.fusion_candidates)

    def base_model(self, model: str):
        if model == "cf":
            return self.cf_model()
        if model == "context":
            return self.context_model()
        if model == "majority":
            return _Majority(self.vocab())
        raise ValueError(f"unknown model {model}")

    # -- stages -------------------------------------------------------------

    def run_ingest(self) -> Path:
        index = self.authority_index()
        out = self._fresh_dir("ingest") / "parsed.jsonl"
        seen: set[str] = set()
        n = 0
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            for doc_id, text, meta in read_corpus(self.cfg.corpus):
                if doc_id in seen:
                    raise ValueError(f"duplicate document id {doc_id}")
                seen.add(doc_id)
                tokens = [encode_parsed(t) for t in parse_text(text, index)]
                rec = {"id": doc_id, "year": meta.year, "issue_area": meta.issue_area, "vlj": meta.vlj, "tokens": tokens}
                fh.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")) + "\n")
                n += 1
        log.info("ingested %d documents", n)
        return out

    def run_split(self) -> tuple[Path, CorpusSplit]:
        ids = [r["id"] for r in self.parsed()]
        split = split_corpus(ids, self.cfg.ratios, self.cfg.seed, self.cfg.n_folds)
        out = self._fresh_dir("split") / "split.json"
        out.write_text(json.dumps(split.to_json(), indent=1) + "\n", encoding="utf-8")
        return out, split

    def run_vocab(self) -> tuple[Path, CitationVocabulary]:
        parsed = self.parsed()
        train = set(self.split().train)
        stream = (
            t for r in parsed if r["id"] in train
            for t in map(decode_parsed, r["tokens"]) if not hasattr(t, "term")
        )
        vocab = build_vocabulary(stream, self.cfg.min_count)
        d = self._fresh_dir("vocab")
        vocab.to_tsv(d / "vocab.tsv")
        meta = {r["id"]: Metadata(r["year"], r["issue_area"], r["vlj"]) for r in parsed}
        docs = (
            Document(r["id"], index_tokens(map(decode_parsed, r["tokens"]), vocab), meta[r["id"]])
            for r in parsed
        )
        write_tokenized(docs, d / "tokens.jsonl")
        return d / "vocab.tsv", vocab

    def _split_docs(self, part: str) -> list[Document]:
        docs = self.documents()
        return [docs[i] for i in sorted(getattr(self.split(), part))]

    def run_cf(self) -> Path:
        vocab = self.vocab()
        train = self._split_docs("train")
        model = CfModel.fit(((d.id, d.citations()) for d in train), len(vocab), self.cfg.scheme, self.cfg.k_neighbors, vocab.unk_index)
        out = self._fresh_dir("cf") / "cf_model.json"
        model.save(out)
        return out

    def run_context(self) -> Path:
        vocab = self.vocab()
        train = self._split_docs("train")
        tv = build_text_vocab(train, len(vocab), self.cfg.max_terms, self.cfg.min_df)
        bank = build_context_bank(train, tv, self.cfg.context_len, self.cfg.bank_cap, self.cfg.seed, vocab.unk_index)
        d = self._fresh_dir("context")
        tv.to_tsv(d / "text_vocab.tsv")
        bank.save(d / "context_bank.json")
        return d

    def run_fusion(self, model: str) -> Path:
        """Learn fusion weights on sampled validation documents.

        Base scores for training documents would be inflated by the documents'
        own presence in the model, so held-out documents supply the pairs.
        """
        vocab = self.vocab()
        base = self.base_model(model)
        train = self._split_docs("train")
        table = FeatureScoreTable.fit(train, len(vocab), self.cfg.alpha, self.cfg.features)
        pool = self._split_docs("validation")
        rng = np.random.default_rng(self.cfg.seed)
        if len(pool) > self.cfg.fusion_docs:
            pool = [pool[i] for i in sorted(rng.choice(len(pool), self.cfg.fusion_docs, replace=False))]
        samples = list(self._fusion_samples(model, base, pool, vocab.unk_index))
        weights = train_fusion(samples, table, self.cfg.svm_c, self.cfg.svm_epochs, self.cfg.seed)
        d = self._fresh_dir("fusion", model)
        weights.save(d / "fusion.json")
        (d / "feature_table.json").write_text(_dump(table.to_json()) + "\n", encoding="utf-8")
        return d / "fusion.json"

    def _fusion_samples(self, model: str, base, docs: list[Document], unk: int):
        n = self.cfg.fusion_candidates
        for doc in docs:
            if model == "cf":
                cites = doc.citations()
                for m in range(1, len(cites)):
                    prefix = cites[:m]
                    if cites[m] != unk and cites[m] not in prefix:
                        yield base.recommend([c for c in prefix if c != unk], n), cites[m], doc.metadata
            else:
                for pos, tok in enumerate(doc.tokens):
                    if isinstance(tok, Cite) and tok.index != unk:
                        window = preceding_window(doc.tokens, pos, self.cfg.context_len)
                        yield base.recommend(window, n), tok.index, doc.metadata

    def run_evaluate(self, model: str, fused: bool = False) -> Path:
        vocab = self.vocab()
        split = self.split()
        docs = self.documents()
        test_docs = [docs[i] for i in sorted(split.test)]
        fold_of = split.fold_of()
        recommender = self.fused_model(model) if fused else self.base_model(model)
        common = dict(
            unk_index=vocab.unk_index,
            classes=[e.citation_class.value for e in vocab.entries],
            train_counts=vocab.counts,
        )
        rank: Callable
        if fused:
            def rank(query, doc):
                return recommender.recommend(query, doc.metadata, max(self.cfg.ks))
        else:
            def rank(query, doc):
                return recommender.recommend(query, max(self.cfg.ks))

        if model == "cf":
            report: RecallReport = evaluate_citation_list(
                rank, test_docs, fold_of, self.cfg.ks, self.cfg.n_folds, max_prefixes=self.cfg.max_prefixes, **common
            )
        else:
            spec = WindowSpec(self.cfg.context_len, self.cfg.eval_forecast)
            report = evaluate_context(
                rank, test_docs, fold_of, spec, self.cfg.ks, self.cfg.seed, self.cfg.n_folds,
                exhaustive=self.cfg.exhaustive_eval, **common,
            )
        return report.write(self._fresh_dir("evaluate", model, fused))

    def run_export(self) -> tuple[Path, int]:
        vocab = self.vocab()
        docs = self._split_docs(self.cfg.export_split)
        spec = WindowSpec(self.cfg.window_context, self.cfg.window_forecast)
        out = self._fresh_dir("export") / f"windows_{self.cfg.export_split}.jsonl"
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            n = export_instances(docs, spec, self.cfg.export_epochs, self.cfg.seed, fh, vocab.unk_index)
        return out, n


class _Majority:
    def __init__(self, vocab: CitationVocabulary):
        self.vocab = vocab

    def recommend(self, query, top_n: int = 20) -> RankedList:
        return majority_recommend(self.vocab.counts, top_n, self.vocab.unk_index)
