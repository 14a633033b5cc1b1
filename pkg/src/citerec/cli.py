"""Command-line entry point: ``citerec <subcommand>``."""

from __future__ import annotations

import json
import logging
import sys

import click

from .config import Config, ConfigError
from .context import preceding_window
from .corpus import Metadata, tokenize
from .pipeline import MODELS, MissingArtifact, Pipeline


def _csv_ints(value: str | None) -> tuple[int, ...] | None:
    if value is None:
        return None
    try:
        return tuple(int(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}") from None


def common_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="JSON config file."),
        click.option("--corpus", type=click.Path(exists=True, dir_okay=False), help="Corpus JSONL."),
        click.option("--authorities", type=click.Path(exists=True, dir_okay=False), help="Authority list CSV."),
        click.option("--artifacts", type=click.Path(file_okay=False), help="Artifact root directory."),
        click.option("--seed", type=int),
        click.option("--min-count", type=int, help="Citation pruning threshold."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _pipeline(config_path, **overrides) -> Pipeline:
    try:
        return Pipeline(Config.load(config_path, **overrides))
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc


def _run(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except MissingArtifact as exc:
        raise click.ClickException(str(exc)) from exc
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Legal citation extraction, recommendation and evaluation."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@common_options
def ingest(config_path, **kw):
    """Extract and normalize citations and word-tokenize the corpus."""
    p = _pipeline(config_path, **kw)
    out = _run(p.run_ingest)
    click.echo(f"ingest: {out}")


@main.command()
@common_options
@click.option("--n-folds", type=int)
def split(config_path, **kw):
    """Assign documents to train/validation/test and test folds."""
    p = _pipeline(config_path, **kw)
    out, s = _run(p.run_split)
    click.echo(f"split: {len(s.train)} train, {len(s.validation)} validation, {len(s.test)} test -> {out}")


@main.command()
@common_options
def vocab(config_path, **kw):
    """Build the pruned citation vocabulary from training documents."""
    p = _pipeline(config_path, **kw)
    out, v = _run(p.run_vocab)
    click.echo(f"vocab: {len(v)} entries (unk index {v.unk_index}) -> {out}")


@main.command("train-cf")
@common_options
@click.option("--scheme", type=click.Choice(["binary", "tf", "tfidf"]))
@click.option("--k-neighbors", type=int)
def train_cf(config_path, **kw):
    """Fit the collaborative-filtering model."""
    p = _pipeline(config_path, **kw)
    click.echo(f"train-cf: {_run(p.run_cf)}")


@main.command("train-context")
@common_options
@click.option("--context-len", type=int)
@click.option("--bank-cap", type=int)
@click.option("--min-df", type=int)
@click.option("--max-terms", type=int)
def train_context(config_path, **kw):
    """Build the text vocabulary and context bank."""
    p = _pipeline(config_path, **kw)
    click.echo(f"train-context: {_run(p.run_context)}")


@main.command("train-fusion")
@common_options
@click.option("--model", type=click.Choice(MODELS), required=True)
@click.option("--features", help="Comma-separated subset of year,issue_area,vlj.")
def train_fusion(config_path, model, features, **kw):
    """Learn metadata fusion weights for a base model."""
    feats = tuple(f for f in features.split(",") if f) if features is not None else None
    p = _pipeline(config_path, features=feats, **kw)
    out = _run(p.run_fusion, model)
    click.echo(f"train-fusion: {out}")


@main.command()
@common_options
@click.option("--model", type=click.Choice(MODELS), required=True)
@click.option("--fusion", "fused", is_flag=True, help="Rerank with learned metadata weights.")
@click.option("--k", "ks", help="Comma-separated cutoffs, e.g. 1,5,20.")
@click.option("--forecast", "eval_forecast", type=int, help="Forecast window for the context protocol.")
@click.option("--exhaustive", "exhaustive_eval", is_flag=True, default=None, help="Use every valid offset.")
def evaluate(config_path, model, fused, ks, **kw):
    """Recall@k on the test folds; prints the JSON report path."""
    p = _pipeline(config_path, ks=_csv_ints(ks), **kw)
    out = _run(p.run_evaluate, model, fused)
    click.echo(str(out))


@main.command()
@common_options
@click.option("--model", type=click.Choice(MODELS), required=True)
@click.option("--citations", multiple=True, help="Citation keys already in the draft; ';' separates several.")
@click.option("--text", "text_file", type=click.File("r", encoding="utf-8"), help="Draft text file, '-' for stdin.")
@click.option("--top-n", type=int)
@click.option("--fusion", "fused", is_flag=True)
@click.option("--year", type=int)
@click.option("--issue-area", type=int)
@click.option("--vlj", type=int)
def recommend(config_path, model, citations, text_file, top_n, fused, year, issue_area, vlj, **kw):
    """One-shot recommendation printed as JSON."""
    p = _pipeline(config_path, top_n=top_n, **kw)
    cfg = p.cfg
    vocabulary = _run(p.vocab)
    if model == "cf":
        keys = [k.strip() for group in citations for k in group.split(";") if k.strip()]
        if not keys:
            raise click.UsageError("--model cf needs --citations")
        unknown = [k for k in keys if k not in vocabulary.index_of]
        if unknown:
            click.echo(f"warning: not in vocabulary: {', '.join(unknown)}", err=True)
        query = [vocabulary.index_of[k] for k in keys if k in vocabulary.index_of]
    else:
        if text_file is None:
            text_file = sys.stdin
        tokens = tokenize(text_file.read(), vocabulary, _run(p.authority_index))
        query = list(preceding_window(tokens, len(tokens), cfg.context_len))

    if fused:
        if None in (year, issue_area, vlj):
            raise click.UsageError("--fusion needs --year, --issue-area and --vlj")
        recommender = _run(p.fused_model, model)
        ranked = recommender.recommend(query, Metadata(year, issue_area, vlj), cfg.top_n)
    else:
        recommender = _run(p.base_model, model)
        ranked = recommender.recommend(query, cfg.top_n)

    result = [
        {"rank": r, "index": c, "key": vocabulary.key_of(c), "class": vocabulary.class_of(c).value, "score": s}
        for r, (c, s) in enumerate(ranked, 1)
    ]
    click.echo(json.dumps(result, ensure_ascii=False, indent=2))


@main.command("export-windows")
@common_options
@click.option("--context", "window_context", type=int)
@click.option("--forecast", "window_forecast", type=int)
@click.option("--epochs", "export_epochs", type=int)
@click.option("--split", "export_split", type=click.Choice(["train", "validation", "test"]))
def export_windows(config_path, **kw):
    """Write sampled context/forecast instances as JSONL for external trainers."""
    p = _pipeline(config_path, **kw)
    out, n = _run(p.run_export)
    click.echo(f"export-windows: {n} instances -> {out}")


if __name__ == "__main__":
    main()
