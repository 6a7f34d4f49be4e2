from __future__ import annotations

import pytest

from paradigmforge import lexicon as lx
from paradigmforge import paradigms as P


@pytest.fixture(scope="session")
def registry():
    return P.load_all_paradigms()


@pytest.fixture(scope="session")
def taxonomy():
    return lx.load_taxonomy()


@pytest.fixture(scope="session")
def lemma_pool():
    return lx.default_lemma_pool(1000)
