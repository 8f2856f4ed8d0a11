import pytest

from infilling import corpus, synth, tokenizer


@pytest.fixture(scope="session")
def toy_docs():
    texts = synth.generate_corpus(200, seed=11)
    return [corpus.parse_document(t, doc_id=str(i), meta_first_paragraph=True)
            for i, t in enumerate(texts)]


@pytest.fixture(scope="session")
def toy_vocab(toy_docs):
    return tokenizer.train_vocab(toy_docs, 1024)
