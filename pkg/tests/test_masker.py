import random

import pytest

from infilling import corpus, masker
from infilling.errors import EmptyCorpus, MisalignedSpan, OverlappingSpans
from infilling.infill import substitute
from infilling.masker import MaskPolicy, mask_from_spec, marginal_mask_rate, sample_mask


def test_subtree_prob_zero_masks_nothing(toy_docs):
    policy = MaskPolicy(subtree_prob=0.0)
    for doc in toy_docs[:20]:
        assert sample_mask(doc, policy, random.Random(1)).k == 0


def test_subtree_prob_one_masks_root(toy_docs):
    policy = MaskPolicy(subtree_prob=1.0)
    for doc in toy_docs[:20]:
        masked = sample_mask(doc, policy, random.Random(1))
        assert masked.k == 1
        span = masked.spans[0]
        assert span.granularity == "document"
        assert span.char_span == (0, len(doc.raw))


def test_determinism(toy_docs):
    policy = MaskPolicy(subtree_prob=0.2)
    for doc in toy_docs[:20]:
        a = sample_mask(doc, policy, random.Random(99))
        b = sample_mask(doc, policy, random.Random(99))
        assert a == b


def test_spans_sorted_disjoint_and_roundtrip(toy_docs):
    policy = MaskPolicy(subtree_prob=0.15)
    for seed, doc in enumerate(toy_docs):
        masked = sample_mask(doc, policy, random.Random(seed))
        prev_end = 0
        for span in masked.spans:
            assert span.char_span[0] >= prev_end
            prev_end = span.char_span[1]
            assert span.answer_text == doc.raw[span.char_span[0]:span.char_span[1]]
        restored = substitute(masked.blanked(), [s.answer_text for s in masked.spans])
        assert restored == doc.raw


def test_ngram_bounds(toy_docs):
    policy = MaskPolicy(subtree_prob=0.3)
    sentences_by_doc = {
        doc.id: [s.char_span for s in doc.nodes_at("sentence")] for doc in toy_docs
    }
    seen_ngram = False
    for seed, doc in enumerate(toy_docs):
        masked = sample_mask(doc, policy, random.Random(1000 + seed))
        for span in masked.spans:
            if span.granularity != "ngram":
                continue
            seen_ngram = True
            assert 1 <= len(span.answer_text.split()) <= 8
            assert any(
                s <= span.char_span[0] and span.char_span[1] <= e
                for s, e in sentences_by_doc[doc.id]
            ), "ngram crosses a sentence boundary"
    assert seen_ngram


def test_ancestor_exclusion(toy_docs):
    # no span may lie strictly inside another masked span
    policy = MaskPolicy(subtree_prob=0.25)
    checked = 0
    for rep in range(50):
        for i, doc in enumerate(toy_docs):
            masked = sample_mask(doc, policy, random.Random(rep * 1000 + i))
            for a in masked.spans:
                for b in masked.spans:
                    if a is not b:
                        assert not (
                            b.char_span[0] <= a.char_span[0]
                            and a.char_span[1] <= b.char_span[1]
                        )
            checked += 1
    assert checked == 10_000


def test_mask_from_spec_sentence(toy_docs):
    doc = toy_docs[0]
    story = doc.nodes_at("paragraph")[1]
    third = story.children[2]
    masked = mask_from_spec(doc, [(third.char_span, "sentence")])
    assert masked.k == 1
    assert masked.spans[0].answer_text == doc.text(third)


def test_mask_from_spec_empty(toy_docs):
    doc = toy_docs[0]
    masked = mask_from_spec(doc, [])
    assert masked.k == 0
    assert masked.blanked() == doc.raw


def test_mask_from_spec_overlap(toy_docs):
    doc = toy_docs[0]
    words = doc.words()
    with pytest.raises(OverlappingSpans):
        mask_from_spec(
            doc,
            [((words[0].char_span[0], words[1].char_span[1]), "ngram"),
             (words[1].char_span, "word")],
        )


def test_mask_from_spec_misaligned(toy_docs):
    doc = toy_docs[0]
    with pytest.raises(MisalignedSpan):
        mask_from_spec(doc, [((1, 3), "sentence")])


def test_mask_rate_extremes(toy_docs):
    docs = toy_docs[:10]
    assert marginal_mask_rate(docs, MaskPolicy(subtree_prob=0.0), 50).rate == 0.0
    assert marginal_mask_rate(docs, MaskPolicy(subtree_prob=1.0), 50).rate == 1.0


def test_mask_rate_empty_corpus():
    with pytest.raises(EmptyCorpus):
        marginal_mask_rate([], MaskPolicy(), 10)


def test_mask_rate_monotone_in_subtree_prob(toy_docs):
    estimates = []
    for p in (0.01, 0.03, 0.10):
        r = marginal_mask_rate(toy_docs, MaskPolicy(subtree_prob=p, rng_seed=5), 4000)
        estimates.append(r)
    for lo, hi in zip(estimates, estimates[1:]):
        assert lo.rate + 3 * lo.stderr < hi.rate - 3 * hi.stderr


# --- exact inclusion-probability oracle -------------------------------------


def exact_word_mask_probability(doc, policy):
    """Per-word mask probabilities computed analytically on one fixed tree.

    Ancestor coins (document, paragraph, sentence) are independent; within a
    sentence a left-to-right sweep tracks the probability of arriving at each
    word position not yet covered by an earlier n-gram.
    """
    p = policy.subtree_prob
    probs = []
    for para in doc.root.children:
        for sent in para.children:
            n = len(sent.children)
            anc = 1 - (1 - p) ** 3
            arrive = [0.0] * (n + 1)
            arrive[0] = 1.0
            word_prob = [0.0] * n
            for i in range(n):
                q = arrive[i]
                if q == 0.0:
                    continue
                # coin tails: word untouched
                arrive[i + 1] += q * (1 - p)
                # single-word branch
                word_prob[i] += q * p * policy.word_vs_ngram_prob
                arrive[i + 1] += q * p * policy.word_vs_ngram_prob
                # n-gram branch
                l_max = min(policy.max_ngram, n - i)
                branch = q * p * (1 - policy.word_vs_ngram_prob)
                for length in range(1, l_max + 1):
                    share = branch / l_max
                    for j in range(i, i + length):
                        word_prob[j] += share
                    arrive[i + length] += share
            for i in range(n):
                probs.append(anc + (1 - anc) * word_prob[i])
    return probs


def test_mask_rate_matches_exact_inclusion_probability(toy_docs):
    doc = toy_docs[0]
    policy = MaskPolicy(rng_seed=17)
    exact = sum(exact_word_mask_probability(doc, policy)) / len(doc.words())
    estimate = marginal_mask_rate([doc], policy, 30_000)
    assert abs(estimate.rate - exact) <= 3 * estimate.stderr
