import numpy as np
import pytest

from mtaffect.embed import EmbeddingTable
from mtaffect.normalize import EmojiLexicon, FrequencyLexicon

TINY_COUNTS = {
    "i": 50000,
    "the": 40000,
    "is": 30000,
    "a": 25000,
    "you": 20000,
    "am": 15000,
    "and": 12000,
    "down": 8000,
    "good": 7000,
    "cool": 6000,
    "facebook": 5000,
    "check": 4000,
    "well": 3500,
    "as": 3000,
    "forgot": 2000,
    "laughter": 1500,
    "hi": 1200,
    "email": 1000,
    "me": 900,
    "see": 800,
    "laugh": 700,
    "ham": 600,
    "spam": 500,
}


@pytest.fixture(scope="session")
def tiny_freq():
    return FrequencyLexicon(TINY_COUNTS)


@pytest.fixture(scope="session")
def tiny_emoji():
    return EmojiLexicon({"\U0001F602": ["laughing"], "\U0001F620": ["angry", "face"]})


def make_table(name, dim, tokens, seed=0):
    rng = np.random.default_rng(seed)
    return EmbeddingTable(
        name=name,
        dim=dim,
        vectors={t: rng.uniform(-1, 1, dim) for t in tokens},
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
