"""Masked-token perplexity evaluation across strategies and granularities.

PPL = exp(-(sum of target-token log-probs) / total target tokens), aggregated
over the whole corpus before exponentiating. Delimiter and blank tokens are
excluded from both numerator and denominator, so every strategy is scored on
the identical multiset of target token ids.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass

import torch

from .corpus import Document
from .errors import EmptyTargets, SequenceTooLong
from .examples import BUILDERS, STRATEGIES, content_length
from .masker import MaskedDocument, MaskPolicy, MaskSpan, rng_for_document, sample_mask
from .tokenizer import Vocab

EVAL_GRANULARITIES = ("document", "paragraph", "sentence", "ngram", "word")


def ppl_masked(model, examples, pad_id: int, batch_size: int = 32) -> float:
    """Corpus-level PPL over target-span token positions only."""
    total = 0.0
    count = 0
    with torch.no_grad():
        for i in range(0, len(examples), batch_size):
            chunk = examples[i:i + batch_size]
            max_len = max(len(ex.tokens) for ex in chunk)
            tokens = torch.full((len(chunk), max_len), pad_id, dtype=torch.long)
            mask = torch.zeros((len(chunk), max_len), dtype=torch.bool)
            for j, ex in enumerate(chunk):
                tokens[j, :len(ex.tokens)] = torch.tensor(ex.tokens, dtype=torch.long)
                for s, e in ex.target_spans:
                    mask[j, s:e] = True
            logp = model(tokens)
            pred = logp[:, :-1, :]
            tgt = tokens[:, 1:]
            tgt_mask = mask[:, 1:]
            nll = -pred.gather(-1, tgt.unsqueeze(-1)).squeeze(-1)
            total += float((nll * tgt_mask).sum())
            count += int(tgt_mask.sum())
    if count == 0:
        raise EmptyTargets("no target tokens to score")
    return math.exp(total / count)


def target_token_multiset_hash(examples) -> tuple[int, str]:
    """(count, hash) of the multiset of target token ids across examples."""
    ids = []
    for ex in examples:
        for s, e in ex.target_spans:
            ids.extend(ex.tokens[s:e])
    ids.sort()
    digest = hashlib.sha256(json.dumps(ids).encode()).hexdigest()
    return len(ids), digest


# --- span sampling for the per-granularity protocol -------------------------


def sample_one_span(doc: Document, granularity: str, rng: random.Random) -> MaskedDocument:
    """Exactly one masked span of the requested granularity, chosen uniformly."""
    if granularity == "document":
        node = doc.root
        span = MaskSpan("document", node.char_span, doc.text(node))
    elif granularity == "ngram":
        sent = rng.choice(doc.nodes_at("sentence"))
        words = sent.children
        start = rng.randrange(len(words))
        length = rng.randint(1, min(8, len(words) - start))
        lo = words[start].char_span[0]
        hi = words[start + length - 1].char_span[1]
        span = MaskSpan("ngram", (lo, hi), doc.raw[lo:hi])
    else:
        node = rng.choice(doc.nodes_at(granularity))
        span = MaskSpan(granularity, node.char_span, doc.text(node))
    return MaskedDocument(source=doc, spans=(span,))


# --- report -----------------------------------------------------------------


@dataclass(frozen=True)
class EvalCell:
    ppl: float
    target_token_count: int
    mean_relative_length: float
    n_documents: int


@dataclass
class EvalReport:
    cells: dict  # (strategy, granularity) -> EvalCell

    def to_json(self) -> str:
        payload = {
            f"{strategy}/{granularity}": cell.__dict__
            for (strategy, granularity), cell in sorted(self.cells.items())
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_text(self) -> str:
        granularities = sorted({g for _, g in self.cells})
        header = ["strategy"] + list(granularities) + ["Length"]
        rows = [header]
        for strategy in STRATEGIES:
            row = [strategy]
            lengths = []
            for g in granularities:
                cell = self.cells.get((strategy, g))
                row.append(f"{cell.ppl:.1f}" if cell else "-")
                if cell:
                    lengths.append(cell.mean_relative_length)
            row.append(f"{sum(lengths) / len(lengths):.2f}" if lengths else "-")
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        return "\n".join(
            "  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows
        )


def _build_all_strategies(masked_docs, vocab: Vocab, max_seq_len: int):
    """Build every strategy for each mask; drop docs any strategy can't fit."""
    per_strategy = {s: [] for s in STRATEGIES}
    kept = 0
    for masked in masked_docs:
        try:
            built = {s: BUILDERS[s](masked, vocab, max_seq_len=max_seq_len)
                     for s in STRATEGIES}
        except SequenceTooLong:
            continue
        for s, ex in built.items():
            per_strategy[s].append(ex)
        kept += 1
    return per_strategy, kept


def _report_for(checkpoints, per_strategy, kept, granularity, vocab, pad_id, cells):
    for strategy, examples in per_strategy.items():
        ckpt = checkpoints[strategy]
        ppl = ppl_masked(ckpt.model, examples, pad_id)
        count, _ = target_token_multiset_hash(examples)
        rel = [content_length(ex, vocab) / ex.n_source_tokens
               for ex in examples if ex.n_source_tokens]
        cells[(strategy, granularity)] = EvalCell(
            ppl=ppl,
            target_token_count=count,
            mean_relative_length=sum(rel) / len(rel) if rel else float("nan"),
            n_documents=kept,
        )


def granularity_suite(checkpoints: dict, docs, vocab: Vocab, seed: int,
                      granularities=EVAL_GRANULARITIES,
                      max_seq_len: int = 256) -> EvalReport:
    """One span per document per granularity; identical spans for every strategy."""
    docs = list(docs)
    pad_id = vocab.special_id("PAD")
    cells: dict = {}
    for granularity in granularities:
        rng = random.Random((seed, granularity).__repr__())
        masked_docs = [sample_one_span(doc, granularity, rng) for doc in docs]
        per_strategy, kept = _build_all_strategies(masked_docs, vocab, max_seq_len)
        _report_for(checkpoints, per_strategy, kept, granularity, vocab, pad_id, cells)
    return EvalReport(cells=cells)


def mixture_suite(checkpoints: dict, docs, policy: MaskPolicy, vocab: Vocab,
                  seed: int, max_seq_len: int = 256) -> EvalReport:
    """Masks sampled with the training policy; possibly several spans per doc."""
    docs = list(docs)
    pad_id = vocab.special_id("PAD")
    masked_docs = [
        sample_mask(doc, policy, rng_for_document(seed, i))
        for i, doc in enumerate(docs)
    ]
    masked_docs = [m for m in masked_docs if m.k > 0]
    per_strategy, kept = _build_all_strategies(masked_docs, vocab, max_seq_len)
    cells: dict = {}
    _report_for(checkpoints, per_strategy, kept, "mixture", vocab, pad_id, cells)
    return EvalReport(cells=cells)
