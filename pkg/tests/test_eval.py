import math
import random

import pytest
import torch

from infilling.errors import EmptyTargets
from infilling.evaluation import (
    EVAL_GRANULARITIES,
    granularity_suite,
    mixture_suite,
    ppl_masked,
    sample_one_span,
    target_token_multiset_hash,
)
from infilling.examples import BUILDERS, STRATEGIES, InfillExample, build_ilm
from infilling.masker import MaskPolicy, mask_from_spec
from infilling.model import Checkpoint, ModelConfig


class FixedDistributionModel:
    """Same next-token distribution at every position, ignoring context."""

    def __init__(self, log_probs: torch.Tensor):
        self.log_probs = log_probs

    def __call__(self, tokens):
        b, t = tokens.shape
        return self.log_probs.expand(b, t, -1).clone()


def uniform_model(vocab_size):
    return FixedDistributionModel(
        torch.full((vocab_size,), -math.log(vocab_size), dtype=torch.float64)
    )


def make_example(tokens, spans, strategy="ILM"):
    return InfillExample(
        strategy=strategy,
        tokens=tuple(tokens),
        loss_mask=tuple(True for _ in tokens),
        target_spans=tuple(spans),
        k=len(spans),
        doc_id="t",
        n_source_tokens=len(tokens),
    )


def test_uniform_model_ppl_is_vocab_size():
    v = 37
    ex = make_example([1, 2, 3, 4, 5], [(1, 4)])
    assert ppl_masked(uniform_model(v), [ex], pad_id=0) == pytest.approx(v, rel=1e-9)


def test_hand_probability_arithmetic():
    # tokens 0,1,2 with probs 0.5, 0.25, 0.25 at every position
    logp = torch.log(torch.tensor([0.5, 0.25, 0.25], dtype=torch.float64))
    model = FixedDistributionModel(logp)
    ex = make_example([2, 0, 1, 2], [(1, 4)])  # targets: tokens 0, 1, 2
    expected = math.exp(-(math.log(0.5) + math.log(0.25) + math.log(0.25)) / 3)
    assert ppl_masked(model, [ex], pad_id=0) == pytest.approx(expected, rel=1e-6)
    assert expected == pytest.approx(3.1748, abs=1e-4)


def test_empty_targets_error():
    ex = make_example([1, 2, 3], [])
    with pytest.raises(EmptyTargets):
        ppl_masked(uniform_model(5), [ex], pad_id=0)


def test_extra_specials_change_length_not_ppl():
    logp = torch.log(torch.tensor([0.1, 0.2, 0.3, 0.25, 0.15], dtype=torch.float64))
    model = FixedDistributionModel(logp)
    base = make_example([4, 1, 2, 3], [(1, 3)])
    padded = make_example([4, 0, 0, 1, 2, 3, 0], [(3, 5)])  # same targets, shifted
    assert len(padded.tokens) != len(base.tokens)
    assert ppl_masked(model, [base], pad_id=0) == pytest.approx(
        ppl_masked(model, [padded], pad_id=0), rel=1e-9
    )


def test_corpus_level_aggregation_order_invariant(toy_docs, toy_vocab):
    policy = MaskPolicy(subtree_prob=0.25)
    from infilling.masker import sample_mask

    examples = []
    for i in range(40):
        masked = sample_mask(toy_docs[i], policy, random.Random(i))
        if masked.k:
            examples.append(build_ilm(masked, toy_vocab))
    logp = torch.randn(toy_vocab.size, dtype=torch.float64)
    model = FixedDistributionModel(torch.log_softmax(logp, dim=-1))
    forward = ppl_masked(model, examples, pad_id=toy_vocab.special_id("PAD"))
    shuffled = list(examples)
    random.Random(3).shuffle(shuffled)
    backward = ppl_masked(model, shuffled, pad_id=toy_vocab.special_id("PAD"))
    assert forward == pytest.approx(backward, rel=1e-9)


def stub_checkpoints(vocab):
    cfg = ModelConfig(vocab_size=vocab.size, n_layers=1, n_heads=1, d_model=8,
                      d_ff=16, max_seq_len=256)
    return {
        s: Checkpoint(cfg, uniform_model(vocab.size), vocab_fingerprint=vocab.fingerprint)
        for s in STRATEGIES
    }


def test_sample_one_span_granularities(toy_docs):
    rng = random.Random(0)
    for granularity in EVAL_GRANULARITIES:
        masked = sample_one_span(toy_docs[0], granularity, rng)
        assert masked.k == 1
        assert masked.spans[0].granularity == granularity
    doc_span = sample_one_span(toy_docs[0], "document", rng).spans[0]
    assert doc_span.char_span == (0, len(toy_docs[0].raw))


def test_granularity_suite_structure(toy_docs, toy_vocab):
    report = granularity_suite(
        stub_checkpoints(toy_vocab), toy_docs[:30], toy_vocab, seed=5
    )
    for granularity in EVAL_GRANULARITIES:
        counts = {report.cells[(s, granularity)].target_token_count for s in STRATEGIES}
        assert len(counts) == 1, "strategies must score identical target sets"
        docs = {report.cells[(s, granularity)].n_documents for s in STRATEGIES}
        assert docs == {30}
        for s in STRATEGIES:
            cell = report.cells[(s, granularity)]
            assert cell.ppl == pytest.approx(toy_vocab.size, rel=1e-6)
    for s in ("LM", "LMREV"):
        for granularity in EVAL_GRANULARITIES:
            assert report.cells[(s, granularity)].mean_relative_length == pytest.approx(1.0)
    sent_ilm = report.cells[("ILM", "sentence")].mean_relative_length
    assert 1.0 < sent_ilm <= 1.10
    sent_all = report.cells[("LMALL", "sentence")].mean_relative_length
    assert 1.5 < sent_all <= 2.0


def test_identical_spans_across_strategies(toy_docs, toy_vocab):
    rng = random.Random(1)
    masked = sample_one_span(toy_docs[0], "sentence", rng)
    built = [BUILDERS[s](masked, toy_vocab) for s in STRATEGIES]
    hashes = {target_token_multiset_hash([ex])[1] for ex in built}
    assert len(hashes) == 1


def test_mixture_with_prob_one_equals_document_task(toy_docs, toy_vocab):
    checkpoints = stub_checkpoints(toy_vocab)
    mixture = mixture_suite(
        checkpoints, toy_docs[:20], MaskPolicy(subtree_prob=1.0), toy_vocab, seed=9
    )
    doc_task = granularity_suite(
        checkpoints, toy_docs[:20], toy_vocab, seed=9, granularities=("document",)
    )
    for s in STRATEGIES:
        assert (
            mixture.cells[(s, "mixture")].target_token_count
            == doc_task.cells[(s, "document")].target_token_count
        )


def test_report_serialization(toy_docs, toy_vocab):
    report = granularity_suite(
        stub_checkpoints(toy_vocab), toy_docs[:5], toy_vocab, seed=2,
        granularities=("sentence", "word"),
    )
    text = report.to_text()
    assert "ILM" in text and "sentence" in text and "Length" in text
    js = report.to_json()
    assert "ILM/sentence" in js
