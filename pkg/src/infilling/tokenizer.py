"""Byte-level subword tokenizer with the infilling special tokens.

Pre-tokenization attaches leading whitespace to the following word (a
trailing whitespace run stands alone); merges never cross a pre-token
boundary. decode(encode(s)) == s for any special-free s, and splitting a
string immediately before whitespace encodes concatenatively. Splitting
*after* whitespace does not: the whitespace re-attaches to the next word,
which is a documented non-guarantee. Byte fallback guarantees any input is
encodable.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field

from .errors import CorpusTooSmall, UnknownSpecialInText

# Fixed special-token inventory: ids 0..8, in this order.
SPECIAL_NAMES = (
    "BLANK_WORD",
    "BLANK_NGRAM",
    "BLANK_SENTENCE",
    "BLANK_PARAGRAPH",
    "BLANK_DOCUMENT",
    "ANSWER",
    "SEP",
    "PAD",
    "EOS",
)
SPECIAL_SURFACE = {
    "BLANK_WORD": "<|blank_word|>",
    "BLANK_NGRAM": "<|blank_ngram|>",
    "BLANK_SENTENCE": "<|blank_sentence|>",
    "BLANK_PARAGRAPH": "<|blank_paragraph|>",
    "BLANK_DOCUMENT": "<|blank_document|>",
    "ANSWER": "<|answer|>",
    "SEP": "<|sep|>",
    "PAD": "<|pad|>",
    "EOS": "<|eos|>",
}
N_SPECIALS = len(SPECIAL_NAMES)
VOCAB_FLOOR = 256 + N_SPECIALS
VOCAB_FILE_VERSION = 1

BLANK_FOR_GRANULARITY = {
    "word": "BLANK_WORD",
    "ngram": "BLANK_NGRAM",
    "sentence": "BLANK_SENTENCE",
    "paragraph": "BLANK_PARAGRAPH",
    "document": "BLANK_DOCUMENT",
}

_PRETOKEN = re.compile(r"\s*\S+|\s+")


@dataclass
class Vocab:
    merges: list[tuple[bytes, bytes]]
    truncated: bool = False  # set when the corpus supported fewer merges than asked
    _ranks: dict = field(default_factory=dict, repr=False)
    _token_ids: dict = field(default_factory=dict, repr=False)
    _id_bytes: dict = field(default_factory=dict, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.specials = {name: i for i, name in enumerate(SPECIAL_NAMES)}
        self._ranks = {pair: r for r, pair in enumerate(self.merges)}
        # subword ids: 256 byte tokens then one token per merge
        self._token_ids = {bytes([b]): N_SPECIALS + b for b in range(256)}
        for a, b in self.merges:
            self._token_ids[a + b] = N_SPECIALS + 256 + self._ranks[(a, b)]
        self._id_bytes = {i: tok for tok, i in self._token_ids.items()}
        self._cache = {}

    @property
    def size(self) -> int:
        return N_SPECIALS + 256 + len(self.merges)

    def special_id(self, name: str) -> int:
        return self.specials[name]

    def blank_id(self, granularity: str) -> int:
        return self.specials[BLANK_FOR_GRANULARITY[granularity]]

    @property
    def fingerprint(self) -> str:
        payload = json.dumps(
            {
                "version": VOCAB_FILE_VERSION,
                "specials": SPECIAL_NAMES,
                "merges": [[a.hex(), b.hex()] for a, b in self.merges],
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    def _merge_word(self, word: bytes) -> list[int]:
        parts = [bytes([b]) for b in word]
        while len(parts) > 1:
            best = None
            best_rank = None
            for i in range(len(parts) - 1):
                rank = self._ranks.get((parts[i], parts[i + 1]))
                if rank is not None and (best_rank is None or rank < best_rank):
                    best, best_rank = i, rank
            if best is None:
                break
            parts[best:best + 2] = [parts[best] + parts[best + 1]]
        return [self._token_ids[p] for p in parts]

    def encode(self, text: str) -> list[int]:
        for surface in SPECIAL_SURFACE.values():
            if surface in text:
                raise UnknownSpecialInText(f"reserved token text {surface!r} in input")
        ids: list[int] = []
        for m in _PRETOKEN.finditer(text):
            word = m.group(0).encode("utf-8")
            cached = self._cache.get(word)
            if cached is None:
                cached = self._merge_word(word)
                self._cache[word] = cached
            ids.extend(cached)
        return ids

    def decode(self, ids) -> str:
        out = []
        buf = bytearray()
        for i in ids:
            if i < N_SPECIALS:
                if buf:
                    out.append(bytes(buf).decode("utf-8", errors="replace"))
                    buf = bytearray()
                out.append(SPECIAL_SURFACE[SPECIAL_NAMES[i]])
            else:
                buf.extend(self._id_bytes[i])
        if buf:
            out.append(bytes(buf).decode("utf-8", errors="replace"))
        return "".join(out)

    def save(self, path) -> None:
        data = {
            "version": VOCAB_FILE_VERSION,
            "specials": {name: i for i, name in enumerate(SPECIAL_NAMES)},
            "merges": [[a.hex(), b.hex()] for a, b in self.merges],
            "truncated": self.truncated,
            "fingerprint": self.fingerprint,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh)

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if data.get("version") != VOCAB_FILE_VERSION:
            raise ValueError(f"unsupported vocab file version {data.get('version')}")
        merges = [(bytes.fromhex(a), bytes.fromhex(b)) for a, b in data["merges"]]
        vocab = cls(merges=merges, truncated=data.get("truncated", False))
        if data.get("fingerprint") and data["fingerprint"] != vocab.fingerprint:
            raise ValueError("vocab file fingerprint does not match its content")
        return vocab


def train_vocab(corpus, target_size: int) -> Vocab:
    """Learn byte-pair merges from an iterable of Documents (or raw strings).

    Deterministic given corpus order and target_size: ties between equally
    frequent pairs break on the lexicographically smaller pair.
    """
    if target_size < VOCAB_FLOOR:
        raise CorpusTooSmall(
            f"target_size {target_size} below floor {VOCAB_FLOOR} (256 bytes + specials)"
        )
    word_counts: Counter = Counter()
    for doc in corpus:
        raw = doc if isinstance(doc, str) else doc.raw
        for m in _PRETOKEN.finditer(raw):
            word_counts[m.group(0).encode("utf-8")] += 1

    words = [[bytes([b]) for b in w] for w in word_counts]
    counts = list(word_counts.values())

    n_merges = target_size - VOCAB_FLOOR
    merges: list[tuple[bytes, bytes]] = []
    for _ in range(n_merges):
        pair_counts: Counter = Counter()
        for parts, c in zip(words, counts):
            for i in range(len(parts) - 1):
                pair_counts[(parts[i], parts[i + 1])] += c
        if not pair_counts:
            break
        best = min(pair_counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if best[1] < 2:
            break
        a, b = best[0]
        merges.append((a, b))
        merged = a + b
        for parts in words:
            i = 0
            while i < len(parts) - 1:
                if parts[i] == a and parts[i + 1] == b:
                    parts[i:i + 2] = [merged]
                else:
                    i += 1

    return Vocab(merges=merges, truncated=len(merges) < n_merges)
