"""Metrics, the train-then-test pipeline, ablations, and the alpha/beta sweep."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import VARIANTS
from .errors import EmptyInput, LengthMismatch
from .fusion import predict_label
from .numerics import RngState
from .text import EmbeddingTable, build_vocabulary, load_embeddings, tokenize
from .training import ModelState, TrainConfig, forward, prepare_corpus, train

CSV_COLUMNS = ("variant", "alpha", "beta", "accuracy", "precision", "recall", "f1", "tp", "fp", "tn", "fn")
EMBED_STREAM = 4


@dataclass
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    flags: list = field(default_factory=list)
    variant: str = ""
    config: dict = field(default_factory=dict)

    def row(self):
        return {"variant": self.variant, "alpha": self.config.get("alpha", ""),
                "beta": self.config.get("beta", ""), "accuracy": self.accuracy,
                "precision": self.precision, "recall": self.recall, "f1": self.f1,
                "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}

    def to_dict(self):
        return {"variant": self.variant, "accuracy": self.accuracy, "precision": self.precision,
                "recall": self.recall, "f1": self.f1,
                "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
                "flags": list(self.flags), "config": self.config}


def metrics_from_counts(tp, fp, tn, fn):
    m = tp + fp + tn + fn
    flags = []
    if tp + fp == 0:
        precision = 0.0
        flags.append("precision_undefined")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        flags.append("recall_undefined")
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0:
        f1 = 0.0
        flags.append("f1_undefined")
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricsReport(tp, fp, tn, fn, (tp + tn) / m, precision, recall, f1, flags)


def compute_metrics(predictions, labels):
    """Positive class is fake (1).  ``predictions`` are 0/1 decisions."""
    if len(predictions) != len(labels):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(labels)} labels")
    if len(labels) == 0:
        raise EmptyInput("no predictions to score")
    p = np.asarray(predictions, dtype=int)
    y = np.asarray(labels, dtype=int)
    tp = int(np.sum((p == 1) & (y == 1)))
    fp = int(np.sum((p == 1) & (y == 0)))
    tn = int(np.sum((p == 0) & (y == 0)))
    fn = int(np.sum((p == 0) & (y == 1)))
    return metrics_from_counts(tp, fp, tn, fn)


# ------------------------------------------------------------------ pipeline

def build_resources(train_corpus, config: TrainConfig, embeddings_path=None, min_count=1):
    """Vocabulary from the training articles (text and caption) and a frozen embedding table."""
    vocab = build_vocabulary(
        [tokenize(a.text) + tokenize(a.caption) for a in train_corpus], min_count)
    rng = RngState.derived(config.seed, EMBED_STREAM)
    if embeddings_path:
        table = load_embeddings(embeddings_path, vocab, rng, config.embed_dim)
    else:
        table = EmbeddingTable.random(vocab, config.embed_dim, rng)
    return vocab, table


def fit(train_corpus, config: TrainConfig, embeddings_path=None, resources=None, on_epoch=None):
    """Initialize from ``config.seed`` and train.  Returns ``(state, trace)``."""
    vocab, table = resources or build_resources(train_corpus, config, embeddings_path)
    state = ModelState.initialize(config, vocab, table)
    examples = prepare_corpus(train_corpus, vocab, table, config)
    return train(state, examples, on_epoch=on_epoch)


def evaluate(state: ModelState, test_corpus):
    examples = prepare_corpus(test_corpus, state.vocab, state.embeddings, state.config)
    if not examples:
        raise EmptyInput("no usable test articles")
    preds = [predict_label(forward(state, ex).y_hat) for ex in examples]
    report = compute_metrics(preds, [ex.label for ex in examples])
    report.variant = state.config.variant
    report.config = state.config.to_dict()
    return report


def pooled_report(reports):
    """Sum confusion counts over folds and recompute the metrics."""
    tp = sum(r.tp for r in reports)
    fp = sum(r.fp for r in reports)
    tn = sum(r.tn for r in reports)
    fn = sum(r.fn for r in reports)
    out = metrics_from_counts(tp, fp, tn, fn)
    out.variant = reports[0].variant
    out.config = reports[0].config
    return out


def run_cell(splits, config, embeddings_path=None):
    """Train and test one configuration on each (train, test) split; pool the results."""
    reports = []
    for train_c, test_c in splits:
        state, _ = fit(train_c, config, embeddings_path)
        reports.append(evaluate(state, test_c))
    return reports[0] if len(reports) == 1 else pooled_report(reports)


def run_ablation(splits, base: TrainConfig, variants=VARIANTS, embeddings_path=None):
    """One report per variant, same seed and splits, in ``VARIANTS`` order (SAFE first)."""
    return [run_cell(splits, replace(base, variant=v), embeddings_path) for v in variants]


def sweep_grid(step, mode="paired"):
    if not 0 < step <= 1:
        raise ValueError("step must lie in (0, 1]")
    n = int(round(1.0 / step))
    values = [round(i * step, 10) for i in range(n + 1) if i * step <= 1 + 1e-9]
    if mode == "paired":
        return [(a, round(1.0 - a, 10)) for a in values]
    if mode == "full":
        return [(a, b) for a in values for b in values if a + b > 0]
    raise ValueError(f"unknown sweep mode {mode!r}")


def sweep_alpha_beta(splits, base: TrainConfig, step=0.2, mode="paired", embeddings_path=None):
    """Retrain per cell.  Returns ``[(alpha, beta, MetricsReport), ...]``."""
    return [(a, b, run_cell(splits, replace(base, alpha=a, beta=b), embeddings_path))
            for a, b in sweep_grid(step, mode)]


# ------------------------------------------------------------------- output

def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        row = r.row()
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
