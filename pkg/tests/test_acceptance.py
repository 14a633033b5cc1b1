"""Acceptance criteria 1 to 9.

Each test carries a ``criterion`` marker; the conftest hook prints one
PASS/FAIL line per criterion at the end of the run. Time budgets are
asserted alongside the functional checks.
"""

import filecmp
import json
import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from citerec.cf import CfModel
from citerec.citeparse import (
    UNKNOWN,
    AuthorityIndex,
    AuthorityRecord,
    CitationClass,
    NormalizedCitation,
    extract_citations,
    normalize,
)
from citerec.cli import main
from citerec.config import Config
from citerec.context import ContextBank, ContextRecommender, TextVocabulary, context_vector
from citerec.corpus import Cite, Document, Metadata, Word
from citerec.evaluate import EvalInstance, distance_bins, fold_stats, summarize
from citerec.fusion import FusionWeights, fuse, pairwise_transform, train_linear_svm
from citerec.pipeline import Pipeline
from citerec.ranking import RankedList
from citerec.synth import generate_corpus
from citerec.windows import WindowSpec, doc_rng, sample_instance, valid_offsets

from oracles import cf_scores, context_scores, dense_tfidf, rank_dense


@contextmanager
def budget(seconds):
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    assert elapsed < seconds, f"took {elapsed:.1f}s, budget {seconds}s"


def assert_same_ranking(got, expected, tol=1e-9):
    assert got.indices == [c for c, _ in expected]
    for (_, s), (_, e) in zip(got, expected):
        assert abs(s - e) <= tol


# -- 1 -----------------------------------------------------------------------------

@pytest.mark.criterion(1, "normalization golden suite")
def test_normalization_golden():
    with budget(1):
        index = AuthorityIndex([AuthorityRecord(8, "Vet. App.", 208, 215, "CLA#6456776", "Degmetich v. Brown")])

        (raw,) = extract_citations("Degmetich v. Brown, 8 Vet. App. 208 (1995)")
        assert normalize(raw, index) == [NormalizedCitation(CitationClass.CASE, "CLA#6456776")]

        (raw,) = extract_citations("18 U.S.C. §§ 46(a), 46(b)")
        assert [n.key for n in normalize(raw, index)] == ["18 U.S.C. § 46(a)", "18 U.S.C. § 46(b)"]
        assert all(n.citation_class is CitationClass.STATUTE for n in normalize(raw, index))

        for text in ("Degmetich v. Brown, 9 Vet. App. 208 (1995)", "Roe v. Brown, 8 F.3d 208"):
            (raw,) = extract_citations(text)
            assert normalize(raw, index) == [UNKNOWN]


# -- 2 -----------------------------------------------------------------------------

@pytest.mark.criterion(2, "CF scores match a dense oracle on 20 random corpora")
def test_cf_oracle_equivalence():
    with budget(10):
        checked = 0
        for trial in range(20):
            rng = np.random.default_rng(1000 + trial)
            dims = int(rng.integers(10, 51))
            n_docs = int(rng.integers(20, 101))
            unk = dims - 1 if trial % 2 else None
            popularity = rng.dirichlet(np.full(dims, 0.3))
            cites = [list(rng.choice(dims, size=int(rng.integers(1, 13)), p=popularity)) for _ in range(n_docs)]
            cites = [[int(c) for c in cs] for cs in cites]
            ids = [f"doc{j:03d}" for j in rng.permutation(n_docs)]
            scheme = ("binary", "tf", "tfidf")[trial % 3]
            k = int(rng.integers(1, 60))
            model = CfModel.fit(zip(ids, cites), dims, scheme, k, unk)
            for _ in range(10):
                partial = [int(c) for c in rng.choice(dims, size=int(rng.integers(1, 6)), p=popularity)]
                expected = rank_dense(
                    cf_scores(ids, cites, dims, scheme, k, partial, unk),
                    exclude=set(partial) | ({unk} if unk is not None else set()),
                )
                assert_same_ranking(model.recommend(partial, top_n=dims), expected)
                checked += 1
        assert checked == 200


# -- 3 -----------------------------------------------------------------------------

def random_bank(rng):
    n_cit = int(rng.integers(5, 51))
    dims = int(rng.integers(30, 200))
    idf = list(rng.uniform(0.1, 4.0, dims))
    tv = TextVocabulary([f"t{i}" for i in range(dims)], [1] * dims, idf)
    raw = {}
    for c in range(n_cit):
        if c > 0 and rng.random() < 0.15:
            raw[c] = raw[int(rng.integers(0, c))]  # identical banks force score ties
            continue
        raw[c] = [list(rng.integers(0, dims, size=int(rng.integers(1, 30)))) for _ in range(int(rng.integers(1, 21)))]
    return tv, idf, raw


@pytest.mark.criterion(3, "context scores match brute force on 20 random banks")
def test_context_oracle_equivalence():
    with budget(10):
        for trial in range(20):
            rng = np.random.default_rng(2000 + trial)
            tv, idf, raw = random_bank(rng)
            words = lambda ids: [Word(f"t{i}") for i in ids]
            bank = ContextBank(len(tv), {c: [context_vector(words(x), tv) for x in ctxs] for c, ctxs in raw.items()})
            rec = ContextRecommender(tv, bank)
            dense_bank = {c: [dense_tfidf(x, idf) for x in ctxs] for c, ctxs in raw.items()}
            for _ in range(5):
                query = list(rng.integers(0, len(tv), size=int(rng.integers(1, 50))))
                expected = rank_dense(context_scores(dense_bank, dense_tfidf(query, idf), len(raw)))
                assert_same_ranking(rec.recommend(words(query), top_n=len(raw)), expected)


# -- 4 -----------------------------------------------------------------------------

@pytest.mark.criterion(4, "stored context vectors are unit norm or zero")
def test_unit_norm(fixture_corpus):
    with budget(5):
        pipe = Pipeline(Config.load(fixture_corpus["config"], artifacts=str(fixture_corpus["dir"] / "art4")))
        pipe.run_ingest()
        pipe.run_split()
        pipe.run_vocab()
        pipe.run_context()
        norms = [v.norm() for v in pipe.context_model().bank.vectors()]
        for trial in range(5):
            tv, _, raw = random_bank(np.random.default_rng(4000 + trial))
            norms += [context_vector([Word(f"t{i}") for i in ctx], tv).norm() for ctxs in raw.values() for ctx in ctxs]
        assert len(norms) > 1000
        bad = [n for n in norms if not (n == 0 or abs(n - 1) <= 1e-9)]
        assert not bad


# -- 5 -----------------------------------------------------------------------------

@pytest.fixture(scope="module")
def synthetic_reports(tmp_path_factory):
    root = tmp_path_factory.mktemp("synthetic")
    start = time.perf_counter()
    corpus_path, auth_path = generate_corpus(n_docs=500, seed=0).write(root)
    cfg = Config.load(None, corpus=str(corpus_path), authorities=str(auth_path),
                      artifacts=str(root / "artifacts"), min_count=5, min_df=5)
    pipe = Pipeline(cfg)
    pipe.run_ingest()
    pipe.run_split()
    pipe.run_vocab()
    pipe.run_cf()
    pipe.run_context()
    reports = {m: json.loads(pipe.run_evaluate(m).read_text()) for m in ("context", "cf", "majority")}
    return reports, time.perf_counter() - start


@pytest.mark.criterion(5, "synthetic corpus: text similarity > CF > majority at recall@5, gaps >= 10pp")
def test_synthetic_ordering(synthetic_reports):
    reports, elapsed = synthetic_reports
    assert elapsed < 60
    for measure in ("fold_mean", "instance_mean"):
        ctx, cf, maj = (reports[m]["recall"]["recall@5"][measure] for m in ("context", "cf", "majority"))
        print(f"recall@5 {measure}: context={ctx:.3f} cf={cf:.3f} majority={maj:.3f}")
        assert ctx - cf >= 0.10
        assert cf - maj >= 0.10


# -- 6 -----------------------------------------------------------------------------

@pytest.mark.criterion(6, "pairwise SVM ranks separable pairs; identity fusion keeps base order")
def test_svm_property():
    with budget(5):
        rng = np.random.default_rng(6)
        true_w = np.array([1.5, -0.7, 0.4, 2.0])
        instances = []
        while len(instances) < 200:
            a, b = rng.random(4), rng.random(4)
            gap = (a - b) @ true_w
            if abs(gap) < 0.05:
                continue
            pos, neg = (a, b) if gap > 0 else (b, a)
            instances.append((pos, [neg]))
        data = pairwise_transform(instances)
        w = train_linear_svm(data)
        pos_rows = data.x[data.y > 0]
        assert len(pos_rows) == 200
        assert np.mean(pos_rows @ w > 0) >= 0.95

        cols = ["base", "year", "issue_area", "vlj"]
        for _ in range(50):
            n = int(rng.integers(2, 40))
            base = RankedList.from_scores({int(c): float(s) for c, s in zip(rng.permutation(100)[:n], rng.random(n))})
            meta = {c: list(rng.random(3)) for c in base.indices}
            assert fuse(base, meta, FusionWeights.identity(cols)).indices == base.indices


# -- 7 -----------------------------------------------------------------------------

@pytest.mark.criterion(7, "evaluation arithmetic: monotone recall, fold stats, distance bins")
def test_evaluation_arithmetic(synthetic_reports):
    with budget(1):
        fixtures = [
            ([0.5] * 6, 0.5, 0.0),
            ([0.0, 1.0], 0.5, 0.5),
            ([0.1, 0.2, 0.3, 0.4], 0.25, math.sqrt(sum((v - 0.25) ** 2 for v in (0.1, 0.2, 0.3, 0.4)) / 3) / 2),
            ([0.2, 0.4, 0.9], 0.5, math.sqrt((0.09 + 0.01 + 0.16) / 2) / math.sqrt(3)),
        ]
        for values, mean, se in fixtures:
            got_mean, got_se = fold_stats(values)
            assert abs(got_mean - mean) <= 1e-12 and abs(got_se - se) <= 1e-12

        assert distance_bins(128) == [(lo, lo + 15) for lo in range(1, 128, 16)]

        rng = np.random.default_rng(7)
        reports = [r for r in synthetic_reports[0].values()]
        for _ in range(20):
            insts = [
                EvalInstance(RankedList.from_scores({int(c): float(s) for c, s in zip(rng.permutation(30)[:25], rng.random(25))}),
                             int(rng.integers(0, 30)), int(rng.integers(0, 6)))
                for _ in range(60)
            ]
            reports.append(summarize(insts, ks=(1, 3, 5, 10, 20)).to_json())
        for rep in reports:
            ks = rep["ks"]
            for a, b in zip(ks, ks[1:]):
                ra, rb = rep["recall"][f"recall@{a}"], rep["recall"][f"recall@{b}"]
                assert ra["instance_mean"] <= rb["instance_mean"]
                assert ra["fold_mean"] <= rb["fold_mean"]
                for fa, fb in zip(ra["per_fold"], rb["per_fold"]):
                    assert fa is None or fa <= fb


# -- 8 -----------------------------------------------------------------------------

PIPELINE = [
    ["ingest"], ["split"], ["vocab"], ["train-cf"], ["train-context"],
    ["train-fusion", "--model", "cf"], ["train-fusion", "--model", "context"],
    ["evaluate", "--model", "cf"], ["evaluate", "--model", "context"], ["evaluate", "--model", "majority"],
    ["evaluate", "--model", "cf", "--fusion"], ["evaluate", "--model", "context", "--fusion"],
    ["export-windows", "--epochs", "2"],
]


def tree(root: Path) -> list[Path]:
    return sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())


@pytest.mark.criterion(8, "two full pipeline runs give byte-identical artifacts")
def test_determinism(fixture_corpus, tmp_path):
    with budget(120):
        runner = CliRunner()
        roots = [tmp_path / "run1", tmp_path / "run2"]
        for root in roots:
            for args in PIPELINE:
                result = runner.invoke(main, [*args, "--config", str(fixture_corpus["config"]), "--artifacts", str(root)])
                assert result.exit_code == 0, (args, result.output)
        files = tree(roots[0])
        assert files == tree(roots[1])
        assert len([f for f in files if f.name == "report.json"]) == 5
        _, mismatch, errors = filecmp.cmpfiles(roots[0], roots[1], [str(f) for f in files], shallow=False)
        assert not mismatch and not errors


# -- 9 -----------------------------------------------------------------------------

def first_target(tokens, offset, w, unk):
    """Independent scan of the forecast window."""
    for j in range(offset, min(offset + w, len(tokens))):
        if isinstance(tokens[j], Cite) and tokens[j].index != unk:
            return tokens[j].index, j - offset + 1
    return None


@pytest.mark.criterion(9, "window sampler: first-citation invariant and uniform offsets")
def test_window_sampler():
    with budget(10):
        rng = np.random.default_rng(9)
        unk = 0
        meta = Metadata(2010, 0, 0)
        draws = 0
        while draws < 10_000:
            n = int(rng.integers(2, 120))
            kinds = rng.random(n)
            tokens = [Word("w") if k < 0.85 else Cite(int(rng.integers(0, 6))) for k in kinds]
            doc = Document(f"d{draws}", tokens, meta)
            spec = WindowSpec(int(rng.integers(1, 64)), int(rng.integers(1, 40)))
            inst = sample_instance(doc, spec, doc_rng(int(rng.integers(1 << 30)), doc.id, 0), unk)
            if inst is None:
                assert all(first_target(tokens, o, spec.forecast_len, unk) is None for o in range(1, n))
                continue
            assert (inst.target, inst.distance) == first_target(tokens, inst.offset, spec.forecast_len, unk)
            assert inst.context == tuple(tokens[max(0, inst.offset - spec.context_len):inst.offset])
            draws += 1

        tokens = [Word("w")] * 4 + [Cite(3)] + [Word("w")] * 3 + [Cite(0)] + [Word("w")] * 2 + [Cite(5)]
        doc = Document("uniform", tokens, meta)
        spec = WindowSpec(8, 4)
        offsets = valid_offsets(doc, spec, unk)
        assert offsets == [1, 2, 3, 4, 8, 9, 10, 11]
        sampler = np.random.default_rng(99)
        n = 10_000
        picks = [sample_instance(doc, spec, sampler, unk).offset for _ in range(n)]
        p = 1 / len(offsets)
        sigma = math.sqrt(n * p * (1 - p))
        for o in offsets:
            assert abs(picks.count(o) - n * p) <= 3 * sigma
