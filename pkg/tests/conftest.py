import pytest

from app.schemas.text import AnalyzerConfig, Document
from app.test_data import make_collection, write_collection


@pytest.fixture
def analyzer():
    return AnalyzerConfig()


@pytest.fixture(scope="session")
def collection():
    return make_collection(n_docs=120, languages=("en", "de", "fr"), n_topics=6, seed=7)


@pytest.fixture
def collection_files(collection, tmp_path):
    return write_collection(collection, tmp_path / "data")


@pytest.fixture
def numbered_doc():
    def make(n_tokens: int, doc_id: str = "d1", lang: str = "de") -> Document:
        return Document(id=doc_id, lang=lang, text=" ".join(f"w{i}" for i in range(n_tokens)))
    return make
