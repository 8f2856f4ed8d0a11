"""Stochastic hierarchical span masking.

A pre-order traversal of the document tree masks each subtree with a small
probability; descendants of a masked node are skipped. Selected word leaves
become either a single-word mask or an n-gram extending rightward within
the sentence. Everything is deterministic given (document, policy, seed).
"""

from __future__ import annotations

import math
import random
import zlib
from dataclasses import dataclass, field

from .corpus import Document, HierNode
from .errors import EmptyCorpus, MisalignedSpan, OverlappingSpans

MASK_GRANULARITIES = ("document", "paragraph", "sentence", "ngram", "word")


@dataclass(frozen=True)
class MaskSpan:
    granularity: str
    char_span: tuple[int, int]
    answer_text: str


@dataclass(frozen=True)
class MaskedDocument:
    source: Document
    spans: tuple[MaskSpan, ...]

    @property
    def k(self) -> int:
        return len(self.spans)

    def chunks(self) -> list[str]:
        """The k+1 pieces of raw text surrounding the masked spans."""
        raw = self.source.raw
        out = []
        cursor = 0
        for span in self.spans:
            out.append(raw[cursor:span.char_span[0]])
            cursor = span.char_span[1]
        out.append(raw[cursor:])
        return out

    def blanked(self) -> str:
        """Raw text with each masked span replaced by an inline marker."""
        chunks = self.chunks()
        parts = [chunks[0]]
        for span, chunk in zip(self.spans, chunks[1:]):
            parts.append(f"[blank:{span.granularity}]")
            parts.append(chunk)
        return "".join(parts)


@dataclass(frozen=True)
class MaskPolicy:
    subtree_prob: float = 0.03
    word_vs_ngram_prob: float = 0.5
    max_ngram: int = 8
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.subtree_prob <= 1.0:
            raise ValueError("subtree_prob must be in [0, 1]")
        if not 0.0 <= self.word_vs_ngram_prob <= 1.0:
            raise ValueError("word_vs_ngram_prob must be in [0, 1]")
        if self.max_ngram < 1:
            raise ValueError("max_ngram must be >= 1")


def rng_for_document(seed: int, doc_index: int) -> random.Random:
    """Per-document RNG stream: crc32-mix the document index into the seed."""
    mixed = zlib.crc32(f"{seed}:{doc_index}".encode())
    return random.Random(mixed)


def _span(doc: Document, granularity: str, start: int, end: int) -> MaskSpan:
    return MaskSpan(granularity, (start, end), doc.raw[start:end])


def sample_mask(doc: Document, policy: MaskPolicy, rng: random.Random | None = None) -> MaskedDocument:
    if rng is None:
        rng = random.Random(policy.rng_seed)
    p = policy.subtree_prob
    spans: list[MaskSpan] = []

    def visit(node: HierNode) -> None:
        if rng.random() < p:
            spans.append(_span(doc, node.granularity, *node.char_span))
            return
        if node.granularity == "sentence":
            words = node.children
            skip_until = 0
            for i, word in enumerate(words):
                if i < skip_until:
                    continue
                if rng.random() >= p:
                    continue
                if rng.random() < policy.word_vs_ngram_prob:
                    spans.append(_span(doc, "word", *word.char_span))
                    skip_until = i + 1
                else:
                    length = rng.randint(1, min(policy.max_ngram, len(words) - i))
                    end_word = words[i + length - 1]
                    spans.append(
                        _span(doc, "ngram", word.char_span[0], end_word.char_span[1])
                    )
                    skip_until = i + length
        else:
            for child in node.children:
                visit(child)

    visit(doc.root)
    return MaskedDocument(source=doc, spans=tuple(spans))


def mask_from_spec(doc: Document, requested_spans) -> MaskedDocument:
    """Build a MaskedDocument from explicit (char_span, granularity) requests."""
    ordered = sorted(requested_spans, key=lambda r: r[0][0])
    prev_end = -1
    spans = []
    for (start, end), granularity in ordered:
        if start < prev_end:
            raise OverlappingSpans(f"span [{start},{end}) overlaps a previous span")
        prev_end = end
        _check_alignment(doc, start, end, granularity)
        spans.append(_span(doc, granularity, start, end))
    return MaskedDocument(source=doc, spans=tuple(spans))


def _check_alignment(doc: Document, start: int, end: int, granularity: str) -> None:
    if granularity not in MASK_GRANULARITIES:
        raise MisalignedSpan(f"unknown granularity {granularity!r}")
    if granularity == "ngram":
        for sent in doc.nodes_at("sentence"):
            words = [w.char_span for w in sent.children]
            starts = {s for s, _ in words}
            ends = {e for _, e in words}
            if start in starts and end in ends and sent.char_span[0] <= start < end <= sent.char_span[1]:
                return
        raise MisalignedSpan(
            f"[{start},{end}) is not word-aligned within a single sentence"
        )
    for node in doc.nodes_at(granularity):
        if node.char_span == (start, end):
            return
    raise MisalignedSpan(f"[{start},{end}) is not a {granularity} boundary")


@dataclass(frozen=True)
class MaskRate:
    rate: float
    stderr: float
    n_samples: int


def _masked_word_count(masked: MaskedDocument) -> int:
    words = masked.source.words()
    count = 0
    for w in words:
        for span in masked.spans:
            if span.char_span[0] <= w.char_span[0] and w.char_span[1] <= span.char_span[1]:
                count += 1
                break
    return count


def marginal_mask_rate(corpus, policy: MaskPolicy, n_samples: int) -> MaskRate:
    """Monte Carlo estimate of the fraction of words covered by masked spans."""
    docs = list(corpus) if not isinstance(corpus, list) else corpus
    if not docs:
        raise EmptyCorpus("no documents to estimate mask rate on")
    masked_counts = []
    word_counts = []
    for i in range(n_samples):
        doc = docs[i % len(docs)]
        rng = rng_for_document(policy.rng_seed, i)
        masked = sample_mask(doc, policy, rng)
        masked_counts.append(_masked_word_count(masked))
        word_counts.append(len(doc.words()))
    total_words = sum(word_counts)
    rate = sum(masked_counts) / total_words
    # ratio-estimator standard error via the delta method
    n = n_samples
    mean_w = total_words / n
    resid = [m - rate * w for m, w in zip(masked_counts, word_counts)]
    var = sum(r * r for r in resid) / max(n - 1, 1)
    stderr = math.sqrt(var / n) / mean_w
    return MaskRate(rate=rate, stderr=stderr, n_samples=n)
