import pathlib

import pytest

DATA_DIR = pathlib.Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> pathlib.Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def mini_corpus_path(data_dir) -> pathlib.Path:
    return data_dir / "mini_corpus.jsonl"


@pytest.fixture(scope="session")
def figure1_path(data_dir) -> pathlib.Path:
    return data_dir / "figure1.jsonl"


@pytest.fixture(scope="session")
def mini_corpus(mini_corpus_path):
    from kpforge.corpus import load_corpus

    result = load_corpus(mini_corpus_path)
    assert not result.errors
    return result.documents


@pytest.fixture(scope="session")
def figure1_doc(figure1_path):
    from kpforge.corpus import load_corpus

    return load_corpus(figure1_path).documents[0]


@pytest.fixture(scope="session")
def synthetic_corpus():
    """The planted-pattern corpus used by learning tests (train/valid/test)."""
    from kpforge.synthetic import make_corpus

    return make_corpus(n_docs=200, n_topics=16, seed=7)
