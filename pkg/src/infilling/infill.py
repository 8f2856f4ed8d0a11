"""End-to-end blank filling: encode the blanked text, generate answers,
split on the answer delimiter, substitute back into the blanks.

Inline marker grammar (the CLI/HTTP surface form):
    [blank]                       defaults to ngram granularity
    [blank:word|ngram|sentence|paragraph|document]
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ContextOverflow, FillCountMismatch, MarkerSyntaxError
from .model import Checkpoint, DecodeConfig, generate
from .tokenizer import N_SPECIALS, Vocab

MARKER = re.compile(r"\[blank(?::(word|ngram|sentence|paragraph|document))?\]")


@dataclass(frozen=True)
class InfillRequest:
    text_with_blanks: str
    decode: DecodeConfig = DecodeConfig()
    seed: int | None = None


@dataclass(frozen=True)
class Fill:
    index: int
    granularity: str
    text: str


@dataclass(frozen=True)
class InfillResult:
    completed_text: str
    fills: tuple[Fill, ...]
    answers_emitted: int
    truncated: bool
    stripped_specials: int = 0


def parse_markers(text: str) -> tuple[list[str], list[str]]:
    """Split text into (k+1 chunks, k granularities); rejects malformed markers."""
    chunks = []
    grans = []
    cursor = 0
    for m in MARKER.finditer(text):
        chunks.append(text[cursor:m.start()])
        grans.append(m.group(1) or "ngram")
        cursor = m.end()
    chunks.append(text[cursor:])
    for chunk in chunks:
        if "[blank" in chunk:
            raise MarkerSyntaxError(f"malformed blank marker in {chunk!r}")
    return chunks, grans


def substitute(masked_text: str, fills) -> str:
    """Replace the i-th marker with the i-th fill; purely textual."""
    chunks, grans = parse_markers(masked_text)
    texts = [f.text if isinstance(f, Fill) else f for f in fills]
    if len(texts) != len(grans):
        raise FillCountMismatch(f"{len(grans)} blanks but {len(texts)} fills")
    parts = [chunks[0]]
    for fill, chunk in zip(texts, chunks[1:]):
        parts.append(fill)
        parts.append(chunk)
    return "".join(parts)


def split_answers(tokens, k: int, answer_id: int) -> tuple[list[list[int]], int]:
    """Split generated tokens on the answer delimiter into up to k segments.

    Returns (segments, shortfall); material after the k-th delimiter is
    discarded, and a missing trailing delimiter truncates the last segment.
    """
    segments: list[list[int]] = []
    current: list[int] = []
    for t in tokens:
        if t == answer_id:
            segments.append(current)
            current = []
            if len(segments) == k:
                break
        else:
            current.append(t)
    shortfall = k - len(segments)
    return segments, shortfall


def complete(checkpoint: Checkpoint, vocab: Vocab, request: InfillRequest) -> InfillResult:
    chunks, grans = parse_markers(request.text_with_blanks)
    k = len(grans)
    if k == 0:
        return InfillResult(
            completed_text=request.text_with_blanks,
            fills=(),
            answers_emitted=0,
            truncated=False,
        )
    prefix: list[int] = list(vocab.encode(chunks[0]))
    for gran, chunk in zip(grans, chunks[1:]):
        prefix.append(vocab.blank_id(gran))
        prefix.extend(vocab.encode(chunk))
    prefix.append(vocab.special_id("SEP"))
    if len(prefix) >= checkpoint.config.max_seq_len:
        raise ContextOverflow(
            f"blanked text encodes to {len(prefix)} tokens; context is "
            f"{checkpoint.config.max_seq_len}"
        )

    answer_id = vocab.special_id("ANSWER")
    eos_id = vocab.special_id("EOS")
    decode = request.decode
    if request.seed is not None:
        decode = DecodeConfig(**{**decode.__dict__, "seed": request.seed})

    def stop_fn(generated: list[int]) -> bool:
        return sum(1 for t in generated if t == answer_id) >= k

    generated = generate(checkpoint, prefix, decode, eos_id=eos_id, stop_fn=stop_fn)
    segments, shortfall = split_answers(generated, k, answer_id)

    stripped = 0
    fills = []
    for i, seg in enumerate(segments):
        clean = [t for t in seg if t >= N_SPECIALS]
        stripped += len(seg) - len(clean)
        fills.append(Fill(index=i, granularity=grans[i], text=vocab.decode(clean)))

    truncated = shortfall > 0
    # on shortfall, substitute what we have and leave the remaining markers
    parts = [chunks[0]]
    for i, chunk in enumerate(chunks[1:]):
        if i < len(fills):
            parts.append(fills[i].text)
        else:
            parts.append(f"[blank:{grans[i]}]")
        parts.append(chunk)
    completed = "".join(parts)
    return InfillResult(
        completed_text=completed,
        fills=tuple(fills),
        answers_emitted=len(segments),
        truncated=truncated,
        stripped_specials=stripped,
    )
