"""Pipeline stages behind the CLI subcommands.

Every stage reads its inputs from the run config and the output directory,
writes artifacts under fixed names, and is idempotent given identical
inputs and seeds.
"""

from __future__ import annotations

import json
from pathlib import Path

from . import corpus as corpus_mod
from . import examples as examples_mod
from .config import RunConfig
from .evaluation import EvalReport, granularity_suite, mixture_suite
from .errors import SequenceTooLong
from .masker import MaskPolicy, rng_for_document, sample_mask
from .model import Checkpoint, ModelConfig, TrainConfig, TransformerLM, train
from .tokenizer import Vocab, train_vocab

SPLITS = ("train", "val", "test")


def _split_path(cfg: RunConfig, split: str) -> str:
    return getattr(cfg.corpus, f"{split}_path")


def load_split(cfg: RunConfig, split: str) -> list:
    return list(corpus_mod.load_corpus(_split_path(cfg, split), cfg.corpus.format))


def load_filtered_split(cfg: RunConfig, split: str, vocab: Vocab) -> list:
    docs = load_split(cfg, split)
    return list(corpus_mod.filter_by_length(docs, vocab, cfg.model.max_seq_len))


def mask_policy(cfg: RunConfig) -> MaskPolicy:
    return MaskPolicy(
        subtree_prob=cfg.mask.subtree_prob,
        word_vs_ngram_prob=cfg.mask.word_vs_ngram_prob,
        max_ngram=cfg.mask.max_ngram,
        rng_seed=cfg.seed,
    )


def vocab_path(out_dir) -> Path:
    return Path(out_dir) / "vocab.json"


def run_train_vocab(cfg: RunConfig, out_dir) -> Vocab:
    docs = load_split(cfg, "train")
    vocab = train_vocab(docs, cfg.vocab.target_size)
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    vocab.save(vocab_path(out_dir))
    return vocab


def dataset_path(out_dir, split: str, strategy: str) -> Path:
    return Path(out_dir) / "datasets" / split / strategy


def run_make_examples(cfg: RunConfig, out_dir) -> dict:
    """Materialize all four strategy datasets from identical (doc, mask) pairs."""
    vocab = Vocab.load(vocab_path(out_dir))
    policy = mask_policy(cfg)
    summary = {}
    for split in SPLITS:
        docs = load_filtered_split(cfg, split, vocab)
        per_strategy = {s: [] for s in examples_mod.STRATEGIES}
        for i, doc in enumerate(docs):
            rng = rng_for_document(f"{cfg.seed}:{split}", i)
            masked = sample_mask(doc, policy, rng)
            try:
                built = {
                    s: examples_mod.BUILDERS[s](
                        masked, vocab,
                        loss_scope=cfg.train.loss_scope,
                        max_seq_len=cfg.model.max_seq_len,
                    )
                    for s in examples_mod.STRATEGIES
                }
            except SequenceTooLong:
                continue
            for s, ex in built.items():
                per_strategy[s].append(ex)
        for s, exs in per_strategy.items():
            examples_mod.write_dataset(
                exs, dataset_path(out_dir, split, s), vocab,
                policy=policy.__dict__ | {"split": split},
            )
        summary[split] = {s: len(exs) for s, exs in per_strategy.items()}
    return summary


def checkpoint_path(out_dir, strategy: str) -> Path:
    return Path(out_dir) / "checkpoints" / f"{strategy}.pt"


def run_train(cfg: RunConfig, out_dir, strategy: str, seed: int | None = None) -> Checkpoint:
    vocab = Vocab.load(vocab_path(out_dir))
    train_set = list(examples_mod.read_dataset(dataset_path(out_dir, "train", strategy), vocab))
    val_set = list(examples_mod.read_dataset(dataset_path(out_dir, "val", strategy), vocab))
    model_cfg = ModelConfig(
        vocab_size=vocab.size,
        n_layers=cfg.model.n_layers,
        n_heads=cfg.model.n_heads,
        d_model=cfg.model.d_model,
        d_ff=cfg.model.d_ff,
        max_seq_len=cfg.model.max_seq_len,
        dropout=cfg.model.dropout,
        init_seed=cfg.seed if seed is None else seed,
    )
    train_cfg = TrainConfig(
        batch_size=cfg.train.batch_size,
        lr=cfg.train.lr,
        warmup_steps=cfg.train.warmup_steps,
        weight_decay=cfg.train.weight_decay,
        max_steps=cfg.train.max_steps,
        eval_every=cfg.train.eval_every,
        early_stop_patience=cfg.train.early_stop_patience,
        loss_scope=cfg.train.loss_scope,
        seed=cfg.seed if seed is None else seed,
    )
    model = TransformerLM(model_cfg)
    ckpt, log = train(
        model, train_set, train_cfg,
        pad_id=vocab.special_id("PAD"),
        vocab_fingerprint=vocab.fingerprint,
        validation=val_set,
    )
    path = checkpoint_path(out_dir, strategy)
    path.parent.mkdir(parents=True, exist_ok=True)
    ckpt.save(path)
    log_path = Path(out_dir) / "logs" / f"{strategy}.jsonl"
    log_path.parent.mkdir(parents=True, exist_ok=True)
    with open(log_path, "w", encoding="utf-8") as fh:
        for entry in log:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    return ckpt


def load_checkpoints(out_dir) -> dict:
    return {
        s: Checkpoint.load(checkpoint_path(out_dir, s))
        for s in examples_mod.STRATEGIES
    }


def run_eval(cfg: RunConfig, out_dir) -> EvalReport:
    vocab = Vocab.load(vocab_path(out_dir))
    checkpoints = load_checkpoints(out_dir)
    docs = load_filtered_split(cfg, "test", vocab)
    report = granularity_suite(
        checkpoints, docs, vocab, seed=cfg.seed,
        granularities=tuple(cfg.eval.granularities),
        max_seq_len=cfg.model.max_seq_len,
    )
    if cfg.eval.mixture:
        mixture = mixture_suite(
            checkpoints, docs, mask_policy(cfg), vocab, seed=cfg.seed,
            max_seq_len=cfg.model.max_seq_len,
        )
        report.cells.update(mixture.cells)
    out = Path(out_dir)
    (out / "eval_report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "eval_report.txt").write_text(report.to_text() + "\n", encoding="utf-8")
    return report
