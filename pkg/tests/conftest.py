import numpy as np
import pytest

from safenews.data import generate_synthetic
from safenews.evaluation import build_resources
from safenews.training import ModelState, TrainConfig, prepare


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_corpus():
    corpus, truth = generate_synthetic(size=24, vocab_size=120, seed=3)
    return corpus


def make_state(corpus, **overrides):
    cfg = TrainConfig(**{"embed_dim": 8, "latent_dim": 6, "seed": 4, **overrides})
    vocab, table = build_resources(corpus, cfg)
    return ModelState.initialize(cfg, vocab, table)


def make_example(state, article):
    return prepare(article, state.vocab, state.embeddings, state.config)
