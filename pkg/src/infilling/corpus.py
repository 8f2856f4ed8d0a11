"""Corpus ingestion and hierarchy parsing.

Each document is parsed into a document -> paragraph -> sentence -> word
tree of character spans over the raw string. Segmentation is rule-based:
paragraphs split on blank lines, sentences on terminal punctuation
followed by whitespace, words on whitespace. Words keep attached
punctuation so the tree always reconstructs the raw text exactly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .errors import EmptyDocument, MalformedRecord

GRANULARITIES = ("document", "paragraph", "sentence", "word")

_SENT_END = re.compile(r"[.!?]+(?=\s|$)")
_WORD = re.compile(r"\S+")


@dataclass(frozen=True)
class HierNode:
    granularity: str
    char_span: tuple[int, int]  # [start, end) into Document.raw
    children: tuple["HierNode", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return self.granularity == "word"


@dataclass(frozen=True)
class Document:
    id: str
    raw: str
    root: HierNode
    meta_first_paragraph: bool = False

    def text(self, node_or_span) -> str:
        span = node_or_span.char_span if isinstance(node_or_span, HierNode) else node_or_span
        return self.raw[span[0]:span[1]]

    def words(self) -> list[HierNode]:
        out = []

        def walk(node):
            if node.is_leaf:
                out.append(node)
            for child in node.children:
                walk(child)

        walk(self.root)
        return out

    def nodes_at(self, granularity: str) -> list[HierNode]:
        out = []

        def walk(node):
            if node.granularity == granularity:
                out.append(node)
            for child in node.children:
                walk(child)

        walk(self.root)
        return out


def _paragraph_blocks(raw: str) -> list[tuple[int, int]]:
    """Spans of maximal runs of non-blank lines."""
    blocks = []
    offset = 0
    start = None
    end = None
    for line in raw.splitlines(keepends=True):
        content = line.rstrip("\n")
        if content.strip():
            if start is None:
                start = offset
            end = offset + len(content)
        else:
            if start is not None:
                blocks.append((start, end))
                start = None
        offset += len(line)
    if start is not None:
        blocks.append((start, end))
    return blocks


def _sentence_spans(raw: str, start: int, end: int) -> list[tuple[int, int]]:
    spans = []
    cursor = start
    for m in _SENT_END.finditer(raw, start, end):
        spans.append((cursor, m.end()))
        cursor = m.end()
    if raw[cursor:end].strip():
        spans.append((cursor, end))
    # trim surrounding whitespace off each sentence
    trimmed = []
    for s, e in spans:
        text = raw[s:e]
        left = len(text) - len(text.lstrip())
        right = len(text) - len(text.rstrip())
        trimmed.append((s + left, e - right))
    return trimmed


def parse_document(raw: str, doc_id: str = "", meta_first_paragraph: bool = False) -> Document:
    if not raw or not raw.strip():
        raise EmptyDocument("document contains no word characters")
    paragraphs = []
    for p_start, p_end in _paragraph_blocks(raw):
        sentences = []
        for s_start, s_end in _sentence_spans(raw, p_start, p_end):
            words = tuple(
                HierNode("word", (m.start(), m.end()))
                for m in _WORD.finditer(raw, s_start, s_end)
            )
            sentences.append(HierNode("sentence", (s_start, s_end), words))
        paragraphs.append(HierNode("paragraph", (p_start, p_end), tuple(sentences)))
    root = HierNode("document", (0, len(raw)), tuple(paragraphs))
    return Document(id=doc_id, raw=raw, root=root, meta_first_paragraph=meta_first_paragraph)


def load_corpus(path, format: str = "blankline-delimited-txt") -> Iterator[Document]:
    """Yield Documents from a corpus file, in file order."""
    if format in ("blankline-delimited-txt", "txt"):
        yield from _load_blankline(path)
    elif format == "jsonl":
        yield from _load_jsonl(path)
    else:
        raise ValueError(f"unknown corpus format: {format!r}")


def _load_blankline(path) -> Iterator[Document]:
    with open(path, encoding="utf-8") as fh:
        content = fh.read()
    index = 0
    block: list[str] = []
    for line in content.splitlines():
        if line.strip():
            block.append(line)
        elif block:
            yield parse_document("\n".join(block), doc_id=str(index))
            index += 1
            block = []
    if block:
        yield parse_document("\n".join(block), doc_id=str(index))


def _load_jsonl(path) -> Iterator[Document]:
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(i, f"invalid JSON: {exc}") from exc
            if not isinstance(record, dict) or "text" not in record:
                raise MalformedRecord(i, 'missing required key "text"')
            yield parse_document(
                record["text"],
                doc_id=str(record.get("id", i)),
                meta_first_paragraph=bool(record.get("has_meta", False)),
            )


def filter_by_length(docs, vocab, max_seq_len: int) -> Iterator[Document]:
    """Drop documents whose longest strategy encoding could exceed max_seq_len.

    The longest encoding concatenates the blanked text and the full text, so
    2 * len(encode(raw)) + 2 is a safe upper bound for any mask. Filtering on
    the bound keeps every strategy trained on an identical document set.
    """
    for doc in docs:
        if 2 * len(vocab.encode(doc.raw)) + 2 <= max_seq_len:
            yield doc
