import sys
from pathlib import Path

import pytest

from tarsim.corpus import Corpus, Document

MOCK_PLUGIN = Path(__file__).parent / "mock_plugin.py"


def make_corpus(texts_and_cats):
    """Build a corpus from (doc_id, text, categories) triples."""
    return Corpus(
        Document(doc_id, text, frozenset(cats)) for doc_id, text, cats in texts_and_cats
    )


@pytest.fixture
def tiny_corpus():
    return make_corpus(
        [
            ("a", "quagga kiang", {"wild"}),
            ("b", "bison gnu bison", set()),
            ("c", "codon intron", set()),
            ("d", "dingo", set()),
            ("e", "zebra okapi", {"wild"}),
            ("f", "fossa", set()),
        ]
    )


def mock_plugin_argv():
    return (sys.executable, str(MOCK_PLUGIN))
