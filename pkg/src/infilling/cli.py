"""Command-line entry point for the full pipeline."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import pipeline, synth
from .config import RunConfig
from .errors import InfillingError
from .infill import InfillRequest, complete
from .model import Checkpoint, DecodeConfig
from .tokenizer import Vocab


def _load_config(config_path) -> RunConfig:
    return RunConfig.from_file(config_path)


def _fail(exc: Exception) -> None:
    click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
    sys.exit(1)


config_opt = click.option("--config", "config_path", required=True,
                          type=click.Path(exists=True, dir_okay=False))
out_dir_opt = click.option("--out-dir", required=True, type=click.Path(file_okay=False))
seed_opt = click.option("--seed", type=int, default=None,
                        help="override the run config seed")


@click.group()
def main():
    """Text infilling pipeline: ingest, vocab, examples, train, eval, infill, serve."""


def _cfg(config_path, seed):
    cfg = _load_config(config_path)
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": seed})
    return cfg


@main.command()
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--n-docs", default=500, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def synth_corpus(out, n_docs, seed):
    """Write a deterministic synthetic story corpus (jsonl)."""
    synth.write_corpus(out, n_docs, seed)
    click.echo(f"wrote {n_docs} documents to {out}")


@main.command()
@config_opt
@out_dir_opt
@seed_opt
def ingest(config_path, out_dir, seed):
    """Parse and validate the corpus files; write a summary."""
    try:
        cfg = _cfg(config_path, seed)
        summary = {}
        for split in pipeline.SPLITS:
            docs = pipeline.load_split(cfg, split)
            summary[split] = {
                "documents": len(docs),
                "words": sum(len(d.words()) for d in docs),
            }
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        path = Path(out_dir) / "corpus_summary.json"
        path.write_text(json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8")
        click.echo(json.dumps(summary, sort_keys=True))
    except (InfillingError, OSError) as exc:
        _fail(exc)


@main.command("train-vocab")
@config_opt
@out_dir_opt
@seed_opt
def train_vocab_cmd(config_path, out_dir, seed):
    """Learn the subword vocabulary from the training split."""
    try:
        cfg = _cfg(config_path, seed)
        vocab = pipeline.run_train_vocab(cfg, out_dir)
        click.echo(f"vocab size {vocab.size} fingerprint {vocab.fingerprint[:12]}")
    except (InfillingError, OSError) as exc:
        _fail(exc)


@main.command("make-examples")
@config_opt
@out_dir_opt
@seed_opt
@click.option("--strategy", default="all", show_default=True)
def make_examples_cmd(config_path, out_dir, seed, strategy):
    """Materialize the per-strategy datasets (always from identical masks)."""
    try:
        cfg = _cfg(config_path, seed)
        summary = pipeline.run_make_examples(cfg, out_dir)
        click.echo(json.dumps(summary, sort_keys=True))
    except (InfillingError, OSError) as exc:
        _fail(exc)


@main.command("train")
@config_opt
@out_dir_opt
@seed_opt
@click.option("--strategy", default="all", show_default=True)
def train_cmd(config_path, out_dir, seed, strategy):
    """Train one strategy's model (or all four)."""
    try:
        cfg = _cfg(config_path, seed)
        strategies = list(pipeline.examples_mod.STRATEGIES) if strategy == "all" else [strategy]
        for s in strategies:
            ckpt = pipeline.run_train(cfg, out_dir, s)
            click.echo(f"{s}: trained to step {ckpt.step}")
    except (InfillingError, OSError) as exc:
        _fail(exc)


@main.command("eval")
@config_opt
@out_dir_opt
@seed_opt
def eval_cmd(config_path, out_dir, seed):
    """Score all strategies on the test split and print the report table."""
    try:
        cfg = _cfg(config_path, seed)
        report = pipeline.run_eval(cfg, out_dir)
        click.echo(report.to_text())
    except (InfillingError, OSError) as exc:
        _fail(exc)


@main.command("infill")
@config_opt
@out_dir_opt
@seed_opt
@click.option("--text", required=True, help="text with [blank:...] markers")
@click.option("--strategy", default="ILM", show_default=True)
def infill_cmd(config_path, out_dir, seed, text, strategy):
    """Fill the blanks in TEXT using a trained checkpoint."""
    try:
        cfg = _cfg(config_path, seed)
        vocab = Vocab.load(pipeline.vocab_path(out_dir))
        ckpt = Checkpoint.load(pipeline.checkpoint_path(out_dir, strategy))
        decode = DecodeConfig(
            method=cfg.decode.method,
            temperature=cfg.decode.temperature,
            top_k=cfg.decode.top_k,
            top_p=cfg.decode.top_p,
            max_new_tokens=cfg.decode.max_new_tokens,
            seed=cfg.seed,
        )
        result = complete(ckpt, vocab, InfillRequest(text_with_blanks=text, decode=decode))
        click.echo(result.completed_text)
        if result.truncated:
            click.echo(f"(truncated: {result.answers_emitted} answers emitted)", err=True)
    except (InfillingError, OSError) as exc:
        _fail(exc)


@main.command("serve")
@config_opt
@out_dir_opt
@seed_opt
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--strategy", default="ILM", show_default=True)
def serve_cmd(config_path, out_dir, seed, host, port, strategy):
    """Serve the HTTP infilling API over a trained checkpoint."""
    try:
        import uvicorn

        from .service import ServeConfig, create_app

        cfg = _cfg(config_path, seed)
        serve_config = ServeConfig(
            bind_host=host,
            bind_port=port,
            checkpoint_path=str(pipeline.checkpoint_path(out_dir, strategy)),
            vocab_path=str(pipeline.vocab_path(out_dir)),
            default_decode=DecodeConfig(
                method=cfg.decode.method,
                temperature=cfg.decode.temperature,
                top_k=cfg.decode.top_k,
                top_p=cfg.decode.top_p,
                max_new_tokens=cfg.decode.max_new_tokens,
            ),
        )
        app = create_app(serve_config)
        uvicorn.run(app, host=host, port=port)
    except (InfillingError, OSError) as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
