from dataclasses import replace

import numpy as np
import pytest

from conftest import make_example, make_state
from safenews.fusion import grad_similarity_wrt_t, similarity
from safenews.gradcheck import (
    analytic_arrays, default_weight_pairs, gradient_check, gradient_check_weights, random_model,
    relative_error, run_gradcheck,
)
from safenews.training import TrainConfig


def test_relative_error_floor():
    assert relative_error(0.0, 0.0) == 0.0
    assert relative_error(1e-9, 0.0) == pytest.approx(0.1)
    assert relative_error(2.0, 1.0) == 0.5


@pytest.mark.parametrize("variant", ["SAFE", "T", "V", "S", "W"])
def test_all_variants_all_weights(small_corpus, variant):
    base = make_state(small_corpus, variant=variant)
    state = random_model(base.config, base.vocab, base.embeddings, seed=17)
    for art in small_corpus.articles[:3]:
        ex = make_example(state, art)
        for (a, b), rep in gradient_check_weights(state, ex, default_weight_pairs()).items():
            assert rep.passed, (variant, a, b, rep.max_error)
            assert rep.max_error < 1e-4


def test_negative_control_zeroed_gradients(small_corpus):
    state = random_model(make_state(small_corpus).config, make_state(small_corpus).vocab,
                         make_state(small_corpus).embeddings, seed=3)
    ex = make_example(state, small_corpus.articles[0])
    zeros = {n: np.zeros_like(a) for n, a in analytic_arrays(state, ex).items()}
    rep = gradient_check(state, ex, analytic=zeros)
    honest = gradient_check(state, ex)
    nonzero = sum(int(np.count_nonzero(a)) for a in analytic_arrays(state, ex).values())
    assert not rep.passed
    assert rep.failed == nonzero
    assert rep.failed >= 0.9 * rep.checked
    assert honest.passed


def test_step_halving_does_not_blow_up(small_corpus):
    state = random_model(make_state(small_corpus).config, make_state(small_corpus).vocab,
                         make_state(small_corpus).embeddings, seed=5)
    ex = make_example(state, small_corpus.articles[1])
    e1 = gradient_check(state, ex, step=1e-5).max_error
    e2 = gradient_check(state, ex, step=5e-6).max_error
    assert e2 <= 4 * e1 + 1e-12


def test_kink_entries_are_skipped(small_corpus):
    state = make_state(small_corpus, variant="S")
    ex = make_example(state, small_corpus.articles[0])
    # put the winning window of the first text filter exactly on the ReLU kink
    from safenews.encoder import encode
    _, cache = encode(state.text, ex.text)
    state.text.filter_bias[0][0] -= cache.pre_activations[0][cache.argmax[0][0], 0]
    rep = gradient_check(state, ex)
    assert rep.groups["text.filter_h3"].skipped > 0
    assert rep.passed


def test_literal_formula_for_true_articles():
    rng = np.random.default_rng(0)
    for _ in range(100):
        t, v = rng.normal(size=8), rng.normal(size=8)
        s = similarity(t, v)
        nt = np.linalg.norm(t)
        literal = (1 - 0) / (2 * s * nt) * ((2 * s - 1) * t / nt - v / np.linalg.norm(v))
        ours = grad_similarity_wrt_t(t, v, s, 0)
        assert np.max(np.abs(ours - literal) / np.abs(literal)) < 1e-10


def test_run_gradcheck_small():
    cfg = TrainConfig(embed_dim=6, latent_dim=5, seed=2)
    rep = run_gradcheck(3, cfg, tolerance=1e-4)
    assert rep.passed and rep.checked > 1000
    assert not run_gradcheck(1, cfg, variants=("SAFE",), tolerance=0.0).passed
