"""Text-CNN encoder: window convolution, ReLU, max-over-time pooling, affine projection.

The same module encodes both the article body and the image caption; each
modality owns an independent :class:`EncoderParams`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyMap, SequenceTooShort
from .numerics import DTYPE, as_float_array, seeded_normal


def convolve_window(filt, bias, window):
    """Return ``(pre_activation, relu(pre_activation))`` for one window."""
    filt = np.asarray(filt, dtype=DTYPE)
    window = np.asarray(window, dtype=DTYPE)
    if filt.shape != window.shape:
        raise DimensionMismatch(f"filter {filt.shape} vs window {window.shape}")
    pre = float(np.dot(filt, window)) + float(bias)
    return pre, (pre if pre > 0.0 else 0.0)


def windows_of(embedded, h):
    """Stack the n-h+1 concatenated windows of an (n, k) array into (n-h+1, h*k)."""
    n, k = embedded.shape
    if n < h:
        raise SequenceTooShort(f"sequence of length {n} shorter than window {h}")
    view = np.lib.stride_tricks.sliding_window_view(embedded, (h, k))
    return view.reshape(n - h + 1, h * k)


def feature_map(filt, bias, embedded, h):
    """List of ``(pre_activation, activated)`` over every window of size ``h``."""
    embedded = np.asarray(embedded, dtype=DTYPE)
    return [convolve_window(filt, bias, w) for w in windows_of(embedded, h)]


def max_pool(values):
    """Maximum and the lowest index attaining it."""
    if len(values) == 0:
        raise EmptyMap("cannot pool an empty feature map")
    best = 0
    for i in range(1, len(values)):
        if values[i] > values[best]:
            best = i
    return values[best], best


class EncoderParams:
    """Per window size ``h``: ``filters[j]`` is (f, h*k) and ``filter_bias[j]`` is (f,).

    ``proj`` is (d, g) and ``proj_bias`` is (d,), with g = f * len(windows).
    """

    def __init__(self, windows, filters, filter_bias, proj, proj_bias):
        self.windows = tuple(int(h) for h in windows)
        self.filters = [as_float_array(w) for w in filters]
        self.filter_bias = [as_float_array(b) for b in filter_bias]
        self.proj = as_float_array(proj)
        self.proj_bias = as_float_array(proj_bias)
        self._check()

    def _check(self):
        if len(self.filters) != len(self.windows) or len(self.filter_bias) != len(self.windows):
            raise DimensionMismatch("one filter bank per window size required")
        f = self.filters[0].shape[0]
        k = self.filters[0].shape[1] // self.windows[0]
        for h, w, b in zip(self.windows, self.filters, self.filter_bias):
            if w.shape != (f, h * k) or b.shape != (f,):
                raise DimensionMismatch(f"filter bank for h={h} has shape {w.shape}, bias {b.shape}")
        g = f * len(self.windows)
        d = self.proj.shape[0]
        if self.proj.shape != (d, g) or self.proj_bias.shape != (d,):
            raise DimensionMismatch(f"projection {self.proj.shape} incompatible with g={g}")

    @property
    def embed_dim(self):
        return self.filters[0].shape[1] // self.windows[0]

    @property
    def n_filters(self):
        return self.filters[0].shape[0]

    @property
    def latent_dim(self):
        return self.proj.shape[0]

    @classmethod
    def initialize(cls, rng, windows, embed_dim, latent_dim, n_filters=1, scale=0.1):
        filters = [seeded_normal(rng, (n_filters, h * embed_dim), scale) for h in windows]
        filter_bias = [np.zeros(n_filters) for _ in windows]
        proj = seeded_normal(rng, (latent_dim, n_filters * len(windows)), scale)
        return cls(windows, filters, filter_bias, proj, np.zeros(latent_dim))

    def arrays(self):
        """Parameter arrays in canonical order (shared by gradients and serialization)."""
        out = []
        for w, b in zip(self.filters, self.filter_bias):
            out += [w, b]
        return out + [self.proj, self.proj_bias]

    def array_names(self):
        names = []
        for h in self.windows:
            names += [f"filter_h{h}", f"filter_bias_h{h}"]
        return names + ["proj", "proj_bias"]

    def copy(self):
        return EncoderParams(self.windows, [w.copy() for w in self.filters],
                             [b.copy() for b in self.filter_bias],
                             self.proj.copy(), self.proj_bias.copy())

    def astype(self, dtype):
        return EncoderParams(self.windows, [w.astype(dtype) for w in self.filters],
                             [b.astype(dtype) for b in self.filter_bias],
                             self.proj.astype(dtype), self.proj_bias.astype(dtype))

    def zeros_like(self):
        return EncoderParams(self.windows, [np.zeros_like(w) for w in self.filters],
                             [np.zeros_like(b) for b in self.filter_bias],
                             np.zeros_like(self.proj), np.zeros_like(self.proj_bias))


@dataclass
class ForwardCache:
    embedded: np.ndarray        # (n, k) padded input
    windows: list               # per h: (n-h+1, h*k)
    pre_activations: list       # per h: (n-h+1, f)
    activations: list           # per h: (n-h+1, f)
    argmax: list                # per h: (f,) winning window index
    pooled: np.ndarray          # (g,)
    output: np.ndarray          # (d,)

    def winning_pre(self):
        """Pre-activation at each pooled position, flattened like ``pooled``."""
        return np.concatenate([pre[idx, np.arange(pre.shape[1])]
                               for pre, idx in zip(self.pre_activations, self.argmax)])


def encode(params: EncoderParams, embedded):
    """Representation ``proj @ pooled + proj_bias`` and the cache needed for backprop."""
    embedded = as_float_array(embedded)
    if embedded.ndim != 2 or embedded.shape[1] != params.embed_dim:
        raise DimensionMismatch(
            f"embedded input {embedded.shape} does not match k={params.embed_dim}")
    wins, pres, acts, idxs, pooled = [], [], [], [], []
    for h, w, b in zip(params.windows, params.filters, params.filter_bias):
        x = windows_of(embedded, h)
        pre = x @ w.T + b
        act = np.where(pre > 0.0, pre, 0.0)
        idx = np.argmax(act, axis=0)  # first occurrence on ties
        wins.append(x)
        pres.append(pre)
        acts.append(act)
        idxs.append(idx)
        pooled.append(act[idx, np.arange(act.shape[1])])
    pooled = np.concatenate(pooled)
    out = params.proj @ pooled + params.proj_bias
    return out, ForwardCache(embedded, wins, pres, acts, idxs, pooled, out)


def encoder_backward(params: EncoderParams, cache: ForwardCache, seed):
    """Gradient of a scalar loss w.r.t. ``params`` given ``seed`` = dL/d(output).

    Returns an :class:`EncoderParams` holding the gradients.  Only the winning
    window of each filter receives gradient, and only when its pre-activation
    is strictly positive (ReLU subgradient 0 at the kink).
    """
    seed = as_float_array(seed)
    if seed.shape != (params.latent_dim,):
        raise DimensionMismatch(f"backprop seed {seed.shape} != ({params.latent_dim},)")
    grad_proj = np.outer(seed, cache.pooled)
    grad_proj_bias = seed.copy()
    d_pooled = params.proj.T @ seed
    f = params.n_filters
    grad_filters, grad_fbias = [], []
    for j, (x, pre, idx) in enumerate(zip(cache.windows, cache.pre_activations, cache.argmax)):
        cols = np.arange(f)
        mask = (pre[idx, cols] > 0.0).astype(pre.dtype)
        d_pre = d_pooled[j * f:(j + 1) * f] * mask
        grad_filters.append(d_pre[:, None] * x[idx])
        grad_fbias.append(d_pre)
    return EncoderParams(params.windows, grad_filters, grad_fbias, grad_proj, grad_proj_bias)
