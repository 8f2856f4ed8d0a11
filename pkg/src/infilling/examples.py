"""Token-level training example construction for the four infilling strategies.

For a document x with masked spans, the strategies encode:

  ILM    blanked(x) <sep> answer1 <answer> ... answerK <answer>
  LM     <eos> x <eos>
  LMREV  <eos> reverse(x) <eos>
  LMALL  blanked(x) <sep> x <eos>

The text of x is always encoded piecewise around the mask boundaries so the
target token ranges of the masked spans are identical (as a multiset of ids)
across strategies, which is what makes their perplexities comparable.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import FingerprintMismatch, SequenceTooLong
from .masker import MaskedDocument
from .tokenizer import Vocab

STRATEGIES = ("ILM", "LM", "LMREV", "LMALL")
DATASET_VERSION = 1
DEFAULT_MAX_SEQ_LEN = 256


@dataclass(frozen=True)
class InfillExample:
    strategy: str
    tokens: tuple[int, ...]
    loss_mask: tuple[bool, ...]
    target_spans: tuple[tuple[int, int], ...]
    k: int
    doc_id: str
    n_source_tokens: int  # len of the piecewise encoding of x, for length stats


def _encoded_parts(masked: MaskedDocument, vocab: Vocab):
    chunk_ids = [vocab.encode(c) for c in masked.chunks()]
    answer_ids = [vocab.encode(s.answer_text) for s in masked.spans]
    return chunk_ids, answer_ids


def _source_tokens(chunk_ids, answer_ids) -> list[int]:
    out = list(chunk_ids[0])
    for ans, chunk in zip(answer_ids, chunk_ids[1:]):
        out.extend(ans)
        out.extend(chunk)
    return out


def _check_len(tokens, max_seq_len):
    if len(tokens) > max_seq_len:
        raise SequenceTooLong(len(tokens), max_seq_len)


def _finish(strategy, tokens, target_spans, masked, loss_scope, n_source_tokens):
    if loss_scope == "all":
        loss_mask = tuple(True for _ in tokens)
    else:
        loss_mask = [False] * len(tokens)
        for s, e in target_spans:
            for i in range(s, e):
                loss_mask[i] = True
        loss_mask = tuple(loss_mask)
    return InfillExample(
        strategy=strategy,
        tokens=tuple(tokens),
        loss_mask=loss_mask,
        target_spans=tuple(target_spans),
        k=masked.k,
        doc_id=masked.source.id,
        n_source_tokens=n_source_tokens,
    )


def build_ilm(masked: MaskedDocument, vocab: Vocab, *, loss_scope: str = "all",
              max_seq_len: int = DEFAULT_MAX_SEQ_LEN) -> InfillExample:
    chunk_ids, answer_ids = _encoded_parts(masked, vocab)
    tokens: list[int] = list(chunk_ids[0])
    for span, chunk in zip(masked.spans, chunk_ids[1:]):
        tokens.append(vocab.blank_id(span.granularity))
        tokens.extend(chunk)
    tokens.append(vocab.special_id("SEP"))
    target_spans = []
    for ans in answer_ids:
        start = len(tokens)
        tokens.extend(ans)
        target_spans.append((start, len(tokens)))
        tokens.append(vocab.special_id("ANSWER"))
    _check_len(tokens, max_seq_len)
    n_src = len(_source_tokens(chunk_ids, answer_ids))
    return _finish("ILM", tokens, target_spans, masked, loss_scope, n_src)


def build_lm(masked: MaskedDocument, vocab: Vocab, *, loss_scope: str = "all",
             max_seq_len: int = DEFAULT_MAX_SEQ_LEN) -> InfillExample:
    chunk_ids, answer_ids = _encoded_parts(masked, vocab)
    eos = vocab.special_id("EOS")
    tokens: list[int] = [eos]
    target_spans = []
    tokens.extend(chunk_ids[0])
    for ans, chunk in zip(answer_ids, chunk_ids[1:]):
        start = len(tokens)
        tokens.extend(ans)
        target_spans.append((start, len(tokens)))
        tokens.extend(chunk)
    n_src = len(tokens) - 1
    tokens.append(eos)
    _check_len(tokens, max_seq_len)
    return _finish("LM", tokens, target_spans, masked, loss_scope, n_src)


def build_lmrev(masked: MaskedDocument, vocab: Vocab, *, loss_scope: str = "all",
                max_seq_len: int = DEFAULT_MAX_SEQ_LEN) -> InfillExample:
    chunk_ids, answer_ids = _encoded_parts(masked, vocab)
    src = _source_tokens(chunk_ids, answer_ids)
    n = len(src)
    # forward target spans, then remap onto the reversed sequence
    fwd_spans = []
    pos = len(chunk_ids[0])
    for ans, chunk in zip(answer_ids, chunk_ids[1:]):
        fwd_spans.append((pos, pos + len(ans)))
        pos += len(ans) + len(chunk)
    eos = vocab.special_id("EOS")
    tokens = [eos] + src[::-1] + [eos]
    target_spans = [(1 + n - e, 1 + n - s) for s, e in reversed(fwd_spans)]
    _check_len(tokens, max_seq_len)
    return _finish("LMREV", tokens, target_spans, masked, loss_scope, n)


def build_lmall(masked: MaskedDocument, vocab: Vocab, *, loss_scope: str = "all",
                max_seq_len: int = DEFAULT_MAX_SEQ_LEN) -> InfillExample:
    chunk_ids, answer_ids = _encoded_parts(masked, vocab)
    tokens: list[int] = list(chunk_ids[0])
    for span, chunk in zip(masked.spans, chunk_ids[1:]):
        tokens.append(vocab.blank_id(span.granularity))
        tokens.extend(chunk)
    tokens.append(vocab.special_id("SEP"))
    target_spans = []
    tokens.extend(chunk_ids[0])
    for ans, chunk in zip(answer_ids, chunk_ids[1:]):
        start = len(tokens)
        tokens.extend(ans)
        target_spans.append((start, len(tokens)))
        tokens.extend(chunk)
    n_src = len(_source_tokens(chunk_ids, answer_ids))
    tokens.append(vocab.special_id("EOS"))
    _check_len(tokens, max_seq_len)
    return _finish("LMALL", tokens, target_spans, masked, loss_scope, n_src)


BUILDERS = {
    "ILM": build_ilm,
    "LM": build_lm,
    "LMREV": build_lmrev,
    "LMALL": build_lmall,
}


def content_length(example: InfillExample, vocab: Vocab) -> int:
    """Token count excluding EOS/PAD delimiters (the Length statistic)."""
    skip = {vocab.special_id("EOS"), vocab.special_id("PAD")}
    return sum(1 for t in example.tokens if t not in skip)


# --- dataset serialization -------------------------------------------------

_STRATEGY_CODE = {s: i for i, s in enumerate(STRATEGIES)}


def _pack_bits(bits) -> bytes:
    out = bytearray((len(bits) + 7) // 8)
    for i, b in enumerate(bits):
        if b:
            out[i // 8] |= 1 << (i % 8)
    return bytes(out)


def _unpack_bits(data: bytes, n: int):
    return tuple(bool(data[i // 8] >> (i % 8) & 1) for i in range(n))


def write_dataset(examples: Iterable[InfillExample], path, vocab: Vocab,
                  policy=None) -> dict:
    """Write examples to a dataset directory; returns the manifest dict."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    counts = {s: 0 for s in STRATEGIES}
    with open(path / "records.bin", "wb") as fh:
        for ex in examples:
            counts[ex.strategy] += 1
            doc_id = ex.doc_id.encode("utf-8")
            fh.write(struct.pack("<BH", _STRATEGY_CODE[ex.strategy], len(doc_id)))
            fh.write(doc_id)
            fh.write(struct.pack("<IIII", ex.k, len(ex.tokens), len(ex.target_spans),
                                 ex.n_source_tokens))
            fh.write(struct.pack(f"<{len(ex.tokens)}I", *ex.tokens))
            fh.write(_pack_bits(ex.loss_mask))
            flat = [v for span in ex.target_spans for v in span]
            fh.write(struct.pack(f"<{len(flat)}I", *flat))
    manifest = {
        "version": DATASET_VERSION,
        "vocab_fingerprint": vocab.fingerprint,
        "policy": policy,
        "counts": counts,
        "n_records": sum(counts.values()),
    }
    with open(path / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def read_manifest(path) -> dict:
    with open(Path(path) / "manifest.json", encoding="utf-8") as fh:
        return json.load(fh)


def read_dataset(path, vocab: Vocab) -> Iterator[InfillExample]:
    path = Path(path)
    manifest = read_manifest(path)
    if manifest["vocab_fingerprint"] != vocab.fingerprint:
        raise FingerprintMismatch(
            f"dataset was written with vocab {manifest['vocab_fingerprint'][:12]}, "
            f"got {vocab.fingerprint[:12]}"
        )
    code_to_strategy = {i: s for s, i in _STRATEGY_CODE.items()}
    with open(path / "records.bin", "rb") as fh:
        while True:
            head = fh.read(3)
            if not head:
                break
            code, id_len = struct.unpack("<BH", head)
            doc_id = fh.read(id_len).decode("utf-8")
            k, n_tok, n_spans, n_src = struct.unpack("<IIII", fh.read(16))
            tokens = struct.unpack(f"<{n_tok}I", fh.read(4 * n_tok))
            loss_mask = _unpack_bits(fh.read((n_tok + 7) // 8), n_tok)
            flat = struct.unpack(f"<{2 * n_spans}I", fh.read(8 * n_spans))
            spans = tuple((flat[2 * i], flat[2 * i + 1]) for i in range(n_spans))
            yield InfillExample(
                strategy=code_to_strategy[code],
                tokens=tokens,
                loss_mask=loss_mask,
                target_spans=spans,
                k=k,
                doc_id=doc_id,
                n_source_tokens=n_src,
            )
