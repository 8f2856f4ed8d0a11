import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infilling import tokenizer
from infilling.errors import CorpusTooSmall, UnknownSpecialInText
from infilling.tokenizer import N_SPECIALS, VOCAB_FLOOR, Vocab, train_vocab


def test_floor_rejected():
    with pytest.raises(CorpusTooSmall):
        train_vocab(["anything at all"], VOCAB_FLOOR - 1)


def test_first_merge_matches_hand_oracle():
    # hand-run byte-pair oracle on {"aaab", "aab"}:
    #   pair counts: (a,a) -> 2 + 1 = 3, (a,b) -> 1 + 1 = 2  => merge "aa"
    #   after merging, every remaining pair occurs once       => stop
    vocab = train_vocab(["aaab", "aab"], VOCAB_FLOOR + 5)
    assert vocab.merges[0] == (b"a", b"a")
    assert len(vocab.merges) == 1
    assert vocab.truncated


def test_encode_empty():
    vocab = train_vocab(["ab ab"], VOCAB_FLOOR + 1)
    assert vocab.encode("") == []


def test_roundtrip_basic(toy_vocab):
    s = "She ate leftover pasta for lunch."
    assert toy_vocab.decode(toy_vocab.encode(s)) == s


def test_rare_word_splits_into_subwords(toy_vocab):
    assert len(toy_vocab.encode("antidisestablishment")) > 1


def test_specials_distinct(toy_vocab):
    ids = [toy_vocab.special_id(n) for n in tokenizer.SPECIAL_NAMES]
    assert len(set(ids)) == len(ids)
    assert max(ids) < N_SPECIALS  # disjoint from every subword id


def test_encode_never_emits_specials(toy_vocab):
    for t in toy_vocab.encode("plain text with [blank:word] marker syntax"):
        assert t >= N_SPECIALS


def test_reserved_surface_form_rejected(toy_vocab):
    with pytest.raises(UnknownSpecialInText):
        toy_vocab.encode("some text <|answer|> more")


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=60))
def test_roundtrip_property(toy_vocab, s):
    assert toy_vocab.decode(toy_vocab.encode(s)) == s


@settings(max_examples=100, deadline=None)
@given(st.text(alphabet="ab \n", max_size=30), st.text(alphabet="ab \n", max_size=30))
def test_concat_before_whitespace(toy_vocab, s1, s2):
    # splitting immediately before whitespace is concatenative
    s1 = s1.rstrip()
    if not s2 or not s2[0].isspace():
        s2 = " " + s2
    assert toy_vocab.encode(s1 + s2) == toy_vocab.encode(s1) + toy_vocab.encode(s2)


def test_fingerprint_tracks_content(toy_vocab):
    same = Vocab(merges=list(toy_vocab.merges))
    assert same.fingerprint == toy_vocab.fingerprint
    different = Vocab(merges=list(toy_vocab.merges[:-1]))
    assert different.fingerprint != toy_vocab.fingerprint


def test_save_load_roundtrip(toy_vocab, tmp_path):
    path = tmp_path / "vocab.json"
    toy_vocab.save(path)
    loaded = Vocab.load(path)
    assert loaded.fingerprint == toy_vocab.fingerprint
    s = "Nora took the violin to the harbor."
    assert loaded.encode(s) == toy_vocab.encode(s)


def test_train_deterministic(toy_docs):
    a = train_vocab(toy_docs, 600)
    b = train_vocab(toy_docs, 600)
    assert a.merges == b.merges
