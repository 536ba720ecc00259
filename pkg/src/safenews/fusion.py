"""Prediction heads, cross-modal similarity, and the losses built on them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch, ZeroVector
from .numerics import as_float_array, concat, norm, seeded_normal, softmax

EPS = 1e-12
SELECTOR = np.array([1.0, 0.0])  # picks the "fake" component of the softmax pair


class ClassifierParams:
    """Weight (2, m) and bias (2,).  m = 2d for the concatenation head, 2 for the similarity-only head."""

    def __init__(self, weight, bias):
        self.weight = as_float_array(weight)
        self.bias = as_float_array(bias)
        if self.weight.ndim != 2 or self.weight.shape[0] != 2 or self.bias.shape != (2,):
            raise DimensionMismatch(f"classifier weight {self.weight.shape}, bias {self.bias.shape}")

    @classmethod
    def initialize(cls, rng, in_dim, scale=0.1):
        return cls(seeded_normal(rng, (2, in_dim), scale), np.zeros(2))

    def arrays(self):
        return [self.weight, self.bias]

    def array_names(self):
        return ["weight", "bias"]

    def copy(self):
        return ClassifierParams(self.weight.copy(), self.bias.copy())

    def astype(self, dtype):
        return ClassifierParams(self.weight.astype(dtype), self.bias.astype(dtype))

    def zeros_like(self):
        return ClassifierParams(np.zeros_like(self.weight), np.zeros_like(self.bias))


@dataclass(frozen=True)
class LossWeights:
    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or not (self.alpha + self.beta > 0):
            raise ConfigError(f"need alpha, beta >= 0 and alpha + beta > 0, got {self.alpha}, {self.beta}")


def predict_prob(params: ClassifierParams, t, v):
    """Probability of fake from the concatenated representations, plus the softmax pair."""
    x = concat(t, v)
    if params.weight.shape[1] != x.shape[0]:
        raise DimensionMismatch(f"head expects {params.weight.shape[1]} inputs, got {x.shape[0]}")
    p = softmax(params.weight @ x + params.bias)
    return p[0], p


def similarity(t, v):
    """Cosine similarity shifted and scaled into [0, 1]."""
    t = as_float_array(t)
    v = as_float_array(v)
    if t.shape != v.shape:
        raise DimensionMismatch(f"{t.shape} vs {v.shape}")
    nt, nv = norm(t), norm(v)
    if nt == 0.0 or nv == 0.0:
        raise ZeroVector("similarity undefined for a zero representation")
    s = (np.dot(t, v) + nt * nv) / (2.0 * nt * nv)
    return min(1.0, max(0.0, s))


def _clamp(p):
    return min(1.0 - EPS, max(EPS, p))


def binary_cross_entropy(p, y):
    p = _clamp(p)
    return -(y * np.log(p) + (1 - y) * np.log(1.0 - p))


def loss_p(y_hat, y):
    return binary_cross_entropy(y_hat, y)


def loss_s(s, y):
    """Low similarity is evidence of fake: y=1 is penalized for high s."""
    s = _clamp(s)
    return -(y * np.log(1.0 - s) + (1 - y) * np.log(s))


def dloss_s_ds(s, y):
    if s <= EPS or s >= 1.0 - EPS:
        return 0.0
    return y / (1.0 - s) - (1 - y) / s


def total_loss(weights: LossWeights, y_hat, s, y):
    return weights.alpha * loss_p(y_hat, y) + weights.beta * loss_s(s, y)


def similarity_features(s):
    return np.stack([s, 1.0 - s])


def predict_prob_w(params: ClassifierParams, s):
    """Similarity-only head: softmax over ``weight @ [s, 1-s] + bias``."""
    if params.weight.shape != (2, 2):
        raise DimensionMismatch(f"similarity head needs a 2x2 weight, got {params.weight.shape}")
    p = softmax(params.weight @ similarity_features(s) + params.bias)
    return p[0]


def label_delta(y_hat, y):
    """dL/dlogits for the two-way softmax cross-entropy: ``[y_hat - y, y - y_hat]``."""
    return np.array([y_hat - y, y - y_hat])


def similarity_grad_t(t, v, s=None):
    """ds/dt = (v0 - (2s - 1) t0) / (2 ||t||)."""
    nt, nv = norm(t), norm(v)
    if nt == 0.0 or nv == 0.0:
        raise ZeroVector("similarity gradient undefined for a zero representation")
    if s is None:
        s = similarity(t, v)
    return (v / nv - (2.0 * s - 1.0) * (t / nt)) / (2.0 * nt)


def grad_similarity_wrt_t(t, v, s, y):
    """d loss_s / d t, both label branches included."""
    return dloss_s_ds(s, y) * similarity_grad_t(t, v, s)


def predict_label(y_hat):
    return int(y_hat >= 0.5)
