"""Joint-loss forward pass, closed-form gradients, and per-sample SGD.

Variants
--------
``SAFE``  concatenation head, loss ``alpha * L_p + beta * L_s``
``T``     text representation replaced by zeros, text encoder frozen
``V``     caption representation replaced by zeros, caption encoder frozen
``S``     similarity term dropped (beta forced to 0)
``W``     similarity-only head on ``[s, 1 - s]``; encoders learn only through ``s``

Zeroing one modality leaves the similarity undefined, so ``T`` and ``V``
train on the prediction loss alone.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from . import VARIANTS
from .encoder import EncoderParams, encode, encoder_backward
from .errors import ConfigError, EmptyCorpus
from .fusion import (
    ClassifierParams, dloss_s_ds, label_delta, loss_p, loss_s, predict_prob,
    predict_prob_w, similarity, similarity_features, similarity_grad_t,
)
from .numerics import RngState
from .text import DEFAULT_MAX_LEN, EmbeddingTable, TokenSequence, Vocabulary, embed_sequence, tokenize

log = logging.getLogger(__name__)

INIT_STREAM = 0
SHUFFLE_STREAM = 1


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.4
    beta: float = 0.6
    lr: float = 1e-4
    windows: tuple = (3, 4)
    embed_dim: int = 32
    latent_dim: int = 32
    epochs: int = 100
    seed: int = 0
    variant: str = "SAFE"
    shuffle: bool = True
    n_filters: int = 1
    max_len: int = DEFAULT_MAX_LEN
    early_stop: float | None = None
    init_scale: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "windows", tuple(int(h) for h in self.windows))
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.alpha < 0 or self.beta < 0 or not (self.alpha + self.beta > 0):
            raise ConfigError(f"need alpha, beta >= 0 and alpha + beta > 0 (got {self.alpha}, {self.beta})")
        if not self.lr >= 0:
            raise ConfigError("learning rate must be non-negative")
        if not self.windows or min(self.windows) < 1:
            raise ConfigError("window sizes must be a non-empty list of positive integers")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        for name in ("embed_dim", "latent_dim", "n_filters", "max_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.max_len < max(self.windows):
            raise ConfigError("max_len shorter than the largest window")

    @property
    def effective_beta(self):
        return 0.0 if self.variant in ("S", "T", "V") else self.beta

    @property
    def uses_similarity(self):
        return self.effective_beta > 0 or self.variant == "W"

    def to_dict(self):
        d = asdict(self)
        d["windows"] = list(self.windows)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class PreparedExample:
    id: str
    text: np.ndarray      # (n, k) embedded, padded
    caption: np.ndarray   # (m, k)
    label: int


def prepare(article, vocab: Vocabulary, table: EmbeddingTable, config: TrainConfig):
    min_len = max(config.windows)
    seqs = [TokenSequence.from_tokens(tokenize(s), vocab, min_len, config.max_len)
            for s in (article.text, article.caption)]
    text, caption = (embed_sequence(q, table, config.embed_dim) for q in seqs)
    return PreparedExample(article.id, text, caption, int(article.label))


def usable(article, variant):
    """Articles whose required modality is empty cannot be encoded meaningfully."""
    if variant != "T" and not tokenize(article.text):
        return False
    if variant != "V" and not tokenize(article.caption):
        return False
    return True


def prepare_corpus(articles, vocab, table, config):
    out = []
    for a in articles:
        if not usable(a, config.variant):
            log.warning("skipping article %s: empty %s under variant %s", a.id,
                        "caption" if a.text.strip() else "text", config.variant)
            continue
        out.append(prepare(a, vocab, table, config))
    return out


@dataclass
class ModelState:
    text: EncoderParams
    caption: EncoderParams
    head: ClassifierParams
    config: TrainConfig
    vocab: Vocabulary
    embeddings: EmbeddingTable
    epoch: int = 0

    @classmethod
    def initialize(cls, config: TrainConfig, vocab, embeddings):
        rng = RngState.derived(config.seed, INIT_STREAM)
        enc = dict(windows=config.windows, embed_dim=config.embed_dim, latent_dim=config.latent_dim,
                   n_filters=config.n_filters, scale=config.init_scale)
        text = EncoderParams.initialize(rng, **enc)
        caption = EncoderParams.initialize(rng, **enc)
        in_dim = 2 if config.variant == "W" else 2 * config.latent_dim
        head = ClassifierParams.initialize(rng, in_dim, config.init_scale)
        return cls(text, caption, head, config, vocab, embeddings)

    def copy(self):
        return ModelState(self.text.copy(), self.caption.copy(), self.head.copy(), self.config,
                          self.vocab, self.embeddings, self.epoch)

    def astype(self, dtype):
        """Copy with every trainable array cast to ``dtype`` (embeddings untouched)."""
        return ModelState(self.text.astype(dtype), self.caption.astype(dtype), self.head.astype(dtype),
                          self.config, self.vocab, self.embeddings, self.epoch)

    def named_arrays(self):
        out = []
        for prefix, p in (("text", self.text), ("caption", self.caption), ("head", self.head)):
            out += [(f"{prefix}.{n}", a) for n, a in zip(p.array_names(), p.arrays())]
        return out


@dataclass
class Forward:
    t: np.ndarray
    v: np.ndarray
    text_cache: object
    caption_cache: object
    y_hat: float
    s: float | None
    loss_pred: float      # cross-entropy of the active head
    loss_sim: float       # 0 when the similarity term is inactive
    loss: float


def forward(state: ModelState, ex: PreparedExample, text_out=None, caption_out=None):
    """Full forward pass.  ``text_out``/``caption_out`` reuse an earlier ``encode`` result."""
    cfg = state.config
    d = cfg.latent_dim
    if cfg.variant == "T":
        t, tc = np.zeros(d), None
    else:
        t, tc = text_out if text_out is not None else encode(state.text, ex.text)
    if cfg.variant == "V":
        v, vc = np.zeros(d), None
    else:
        v, vc = caption_out if caption_out is not None else encode(state.caption, ex.caption)
    s = similarity(t, v) if cfg.uses_similarity else None
    if cfg.variant == "W":
        y_hat = predict_prob_w(state.head, s)
    else:
        y_hat, _ = predict_prob(state.head, t, v)
    lp = loss_p(y_hat, ex.label)
    beta = cfg.effective_beta
    ls = loss_s(s, ex.label) if beta > 0 else 0.0
    total = cfg.alpha * lp + beta * ls if beta > 0 else cfg.alpha * lp
    return Forward(t, v, tc, vc, y_hat, s, lp, ls, total)


@dataclass
class GradientSet:
    """Gradients of the total loss, shaped like the parameters they update."""
    text: EncoderParams | None
    caption: EncoderParams | None
    head: ClassifierParams | None
    delta_y: np.ndarray
    b_t: np.ndarray | None = None
    b_v: np.ndarray | None = None
    grad_lp_t: np.ndarray | None = None
    grad_ls_t: np.ndarray | None = None
    grad_lp_v: np.ndarray | None = None
    grad_ls_v: np.ndarray | None = None
    extras: dict = field(default_factory=dict)


def grad_classifier(t, v, y_hat, y):
    """Unweighted ``(dW_p, db_p)`` of the prediction loss: ``delta_y (t+v)^T`` and ``delta_y``."""
    dy = label_delta(y_hat, y)
    return np.outer(dy, np.concatenate([t, v])), dy


def gradients(state: ModelState, ex: PreparedExample, fwd: Forward | None = None) -> GradientSet:
    cfg = state.config
    if fwd is None:
        fwd = forward(state, ex)
    alpha, beta = cfg.alpha, cfg.effective_beta
    y = ex.label
    d = cfg.latent_dim
    t, v = fwd.t, fwd.v
    dy = label_delta(fwd.y_hat, y)
    gs = GradientSet(None, None, None, dy)

    if cfg.variant == "W":
        feats = similarity_features(fwd.s)
        gs.head = ClassifierParams(alpha * np.outer(dy, feats), alpha * dy) if alpha > 0 else None
        w = state.head.weight
        d_s_head = dy @ (w[:, 0] - w[:, 1])
        d_s = alpha * d_s_head + beta * dloss_s_ds(fwd.s, y)
        ds_dt = similarity_grad_t(t, v, fwd.s)
        ds_dv = similarity_grad_t(v, t, fwd.s)
        gs.b_t = d_s * ds_dt
        gs.b_v = d_s * ds_dv
        gs.extras["d_loss_d_s"] = d_s
    else:
        if alpha > 0:
            gw, gb = grad_classifier(t, v, fwd.y_hat, y)
            gs.head = ClassifierParams(alpha * gw, alpha * gb)
        w = state.head.weight
        gs.grad_lp_t = w[:, :d].T @ dy
        gs.grad_lp_v = w[:, d:].T @ dy
        gs.b_t = alpha * gs.grad_lp_t
        gs.b_v = alpha * gs.grad_lp_v
        if beta > 0:
            dls = dloss_s_ds(fwd.s, y)
            gs.grad_ls_t = dls * similarity_grad_t(t, v, fwd.s)
            gs.grad_ls_v = dls * similarity_grad_t(v, t, fwd.s)
            gs.b_t = gs.b_t + beta * gs.grad_ls_t
            gs.b_v = gs.b_v + beta * gs.grad_ls_v

    if cfg.variant != "T":
        gs.text = encoder_backward(state.text, fwd.text_cache, gs.b_t)
    if cfg.variant != "V":
        gs.caption = encoder_backward(state.caption, fwd.caption_cache, gs.b_v)
    return gs


def _apply(params, grads, lr):
    for p, g in zip(params.arrays(), grads.arrays()):
        p -= lr * g


def apply_gradients(state: ModelState, gs: GradientSet, lr):
    """theta <- theta - lr * grad, in place; absent gradient blocks leave parameters untouched."""
    if gs.head is not None:
        _apply(state.head, gs.head, lr)
    if gs.text is not None:
        _apply(state.text, gs.text, lr)
    if gs.caption is not None:
        _apply(state.caption, gs.caption, lr)


def sgd_step(state: ModelState, ex: PreparedExample) -> float:
    """One per-sample update, in place.  Returns the loss measured before the update."""
    fwd = forward(state, ex)
    gs = gradients(state, ex, fwd)
    apply_gradients(state, gs, state.config.lr)
    return float(fwd.loss)


def train(state: ModelState, examples, epochs=None, on_epoch=None):
    """Run ``epochs`` passes of per-sample SGD on a copy of ``state``.

    Returns ``(trained_state, trace)`` where ``trace[e]`` is the mean per-sample
    loss of epoch ``e`` (losses measured before each update).
    """
    examples = list(examples)
    if not examples:
        raise EmptyCorpus("no usable training examples")
    cfg = state.config
    epochs = cfg.epochs if epochs is None else epochs
    state = state.copy()
    trace = []
    for _ in range(epochs):
        order = range(len(examples))
        if cfg.shuffle:
            order = RngState.derived(cfg.seed, 1000 + state.epoch).permutation(len(examples))
        total = 0.0
        for i in order:
            total += sgd_step(state, examples[i])
        trace.append(total / len(examples))
        state.epoch += 1
        if on_epoch is not None:
            on_epoch(state.epoch, trace[-1])
        if cfg.early_stop is not None and len(trace) > 1 and abs(trace[-1] - trace[-2]) < cfg.early_stop:
            break
    return state, trace


def predict(state: ModelState, examples):
    return [float(forward(state, ex).y_hat) for ex in examples]


def with_config(state: ModelState, **changes):
    s = state.copy()
    s.config = replace(state.config, **changes)
    return s
