"""Acceptance gate.  Each test prints one PASS/FAIL line; run with ``-s`` to see them live."""
import time
from dataclasses import replace
from datetime import datetime, timedelta

import numpy as np
import pytest

from safenews import VARIANTS
from safenews.data import Corpus, NewsArticle, generate_synthetic, kfold_split, temporal_split
from safenews.evaluation import (
    compute_metrics, evaluate, fit, reports_to_csv, reports_to_json, run_ablation, sweep_alpha_beta,
)
from safenews.fusion import grad_similarity_wrt_t, similarity
from safenews.gradcheck import default_weight_pairs, run_gradcheck
from safenews.modelfile import dumps_model
from safenews.training import ModelState, TrainConfig

pytestmark = pytest.mark.slow


@pytest.fixture
def verdict(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"
    return emit


def test_gradient_correctness(verdict):
    pairs = default_weight_pairs()
    assert {a for a, _ in pairs} == {0.0, 0.4, 0.6, 1.0}
    t0 = time.time()
    rep = run_gradcheck(20, TrainConfig(seed=0), variants=VARIANTS, weight_pairs=pairs, tolerance=1e-4)
    elapsed = time.time() - t0
    verdict("gradient check", rep.passed and elapsed < 60 and rep.checked > 0,
            f"20 pairs x {len(VARIANTS)} variants x {len(pairs)} weightings, max rel err "
            f"{rep.max_error:.2e} < 1e-4, {rep.checked} checked, {rep.skipped} skipped, {elapsed:.1f}s < 60s")


def test_true_article_formula(verdict):
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(100):
        t, v = rng.normal(size=32), rng.normal(size=32)
        s = similarity(t, v)
        nt, nv = np.linalg.norm(t), np.linalg.norm(v)
        literal = 1.0 / (2 * s * nt) * ((2 * s - 1) * t / nt - v / nv)
        ours = grad_similarity_wrt_t(t, v, s, 0)
        worst = max(worst, float(np.max(np.abs(ours - literal) / np.abs(literal))))
    verdict("true-article similarity gradient", worst < 1e-10, f"max rel err {worst:.2e} < 1e-10 over 100 pairs")


def test_similarity_law(verdict):
    rng = np.random.default_rng(102)
    worst_scale = worst_cos = 0.0
    in_range = True
    for _ in range(10_000):
        d = int(rng.integers(1, 40))
        t, v = rng.normal(size=d), rng.normal(size=d)
        if not (t.any() and v.any()):
            continue
        s = similarity(t, v)
        in_range &= 0.0 <= s <= 1.0
        lam, mu = np.exp(rng.uniform(-5, 5, size=2))
        worst_scale = max(worst_scale, abs(similarity(lam * t, mu * v) - s))
        cos = t @ v / (np.linalg.norm(t) * np.linalg.norm(v))
        worst_cos = max(worst_cos, abs(s - (cos + 1) / 2))
    ok = in_range and worst_scale <= 1e-12 and worst_cos <= 1e-12
    verdict("similarity law", ok, f"10^4 pairs in [0,1]={in_range}, scale drift {worst_scale:.1e}, "
                                  f"|s-(cos+1)/2| {worst_cos:.1e}")


def test_descent(verdict):
    corpus, _ = generate_synthetic(size=8, seed=11)
    _, slow = fit(corpus, TrainConfig(lr=1e-4, epochs=10, seed=0))
    _, fast = fit(corpus, TrainConfig(lr=1e-2, epochs=200, seed=0))
    monotone = all(b <= a for a, b in zip(slow, slow[1:]))
    drop = 1 - fast[-1] / fast[0]
    verdict("descent", monotone and drop >= 0.5,
            f"lr 1e-4 non-increasing over 10 epochs={monotone}; lr 1e-2 loss drop {drop:.1%} >= 50% by epoch 200")


def test_end_to_end_separation(verdict):
    t0 = time.time()
    corpus, _ = generate_synthetic(size=400, mismatch=1.0, seed=1)
    split = [temporal_split(corpus, 0.8)]
    cfg = TrainConfig(lr=1e-2, epochs=40, seed=0)
    safe, no_s, no_w = run_ablation(split, cfg, variants=("SAFE", "S", "W"))
    elapsed = time.time() - t0
    ok = safe.accuracy >= 0.90 and safe.accuracy >= no_s.accuracy and no_w.accuracy >= 0.85 and elapsed < 300
    verdict("end-to-end synthetic separation", ok,
            f"SAFE {safe.accuracy:.4f} >= 0.90, SAFE\\S {no_s.accuracy:.4f} <= SAFE, "
            f"SAFE\\W {no_w.accuracy:.4f} >= 0.85, {elapsed:.1f}s < 300s")


def _same_arrays(a: ModelState, b: ModelState):
    xa, xb = dict(a.named_arrays()), dict(b.named_arrays())
    return xa.keys() == xb.keys() and all(
        xa[k].dtype == xb[k].dtype and xa[k].tobytes() == xb[k].tobytes() for k in xa)


def test_degenerate_weight_equivalences(verdict):
    corpus, _ = generate_synthetic(size=60, seed=12)
    split = [temporal_split(corpus, 0.8)]
    base = TrainConfig(lr=1e-2, epochs=5, seed=3, embed_dim=16, latent_dim=12)
    cells = {(a, b): r for a, b, r in sweep_alpha_beta(split, base, step=1.0)}
    no_s_cfg = replace(base, variant="S", alpha=1.0, beta=0.0)
    no_s_report = evaluate(fit(split[0][0], no_s_cfg)[0], split[0][1])
    cell_report = cells[(1.0, 0.0)]
    same_report = ({k: v for k, v in cell_report.row().items() if k != "variant"}
                   == {k: v for k, v in no_s_report.row().items() if k != "variant"})
    same_model = _same_arrays(fit(split[0][0], replace(base, alpha=1.0, beta=0.0))[0], fit(split[0][0], no_s_cfg)[0])

    beta_only = replace(base, alpha=0.0, beta=1.0)
    trained, _ = fit(split[0][0], beta_only)
    fresh = ModelState.initialize(beta_only, trained.vocab, trained.embeddings)
    head_untouched = all(x.tobytes() == y.tobytes() for x, y in zip(trained.head.arrays(), fresh.head.arrays()))
    encoders_moved = any(x.tobytes() != y.tobytes()
                         for x, y in zip(trained.text.arrays(), fresh.text.arrays()))
    verdict("degenerate weights", same_report and same_model and head_untouched and encoders_moved,
            f"(1,0) cell == SAFE\\S metrics={same_report}, parameters bitwise equal={same_model}; "
            f"(0,1) head bitwise unchanged={head_untouched}, encoders trained={encoders_moved}")


def test_determinism(verdict):
    corpus, _ = generate_synthetic(size=80, seed=13)
    train_c, test_c = temporal_split(corpus, 0.8)
    cfg = TrainConfig(lr=1e-2, epochs=5, seed=9, embed_dim=16, latent_dim=12)
    outputs = []
    for _ in range(2):
        state, _ = fit(train_c, cfg)
        rep = [evaluate(state, test_c)]
        outputs.append((dumps_model(state), reports_to_csv(rep), reports_to_json(rep)))
    verdict("determinism", outputs[0] == outputs[1],
            "two runs give byte-identical model file, CSV and JSON reports")


def test_metrics_oracle(verdict):
    rng = np.random.default_rng(104)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        preds, labels = rng.integers(0, 2, n).tolist(), rng.integers(0, 2, n).tolist()
        r = compute_metrics(preds, labels)
        tp = fp = tn = fn = 0
        for p, y in zip(preds, labels):
            if p and y:
                tp += 1
            elif p:
                fp += 1
            elif y:
                fn += 1
            else:
                tn += 1
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        if (r.tp, r.fp, r.tn, r.fn) != (tp, fp, tn, fn) or r.accuracy != (tp + tn) / n \
                or r.precision != prec or r.recall != rec or r.f1 != f1:
            mismatches += 1
    verdict("metrics oracle", mismatches == 0, f"{mismatches} mismatches over 1000 random vectors")


def _random_corpus(rng):
    m = int(rng.integers(5, 60))
    start = datetime(2015, 1, 1)
    days = rng.integers(0, 30, m)
    arts = [NewsArticle(id=f"a{i}", text="x", label=int(rng.integers(0, 2)),
                        published_at=start + timedelta(days=int(d)), caption="y")
            for i, d in enumerate(days)]
    order = rng.permutation(m)
    return Corpus([arts[i] for i in order], provenance="random")


def test_split_contracts(verdict):
    rng = np.random.default_rng(105)
    temporal_ok = kfold_ok = True
    for _ in range(100):
        corpus = _random_corpus(rng)
        train_c, test_c = temporal_split(corpus, 0.8)
        temporal_ok &= len(train_c) + len(test_c) == len(corpus) and len(test_c) > 0
        temporal_ok &= max(a.published_at for a in train_c) <= min(a.published_at for a in test_c)
        k = int(rng.integers(2, 6))
        folds = kfold_split(corpus, k, seed=int(rng.integers(0, 1000)))
        ids = sorted(a.id for a in corpus)
        tests = [sorted(a.id for a in te) for _, te in folds]
        kfold_ok &= len(folds) == k and sorted(i for t in tests for i in t) == ids
        for tr, te in folds:
            kfold_ok &= sorted([a.id for a in tr] + [a.id for a in te]) == ids
    verdict("split contracts", temporal_ok and kfold_ok,
            f"temporal split latest-only on 100 corpora={temporal_ok}; k-fold exact partition={kfold_ok}")
