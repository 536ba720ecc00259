"""Central finite-difference verification of the analytic gradients.

The finite differences re-run the ordinary forward pass on a copy of the
model cast to ``numpy.longdouble``.  At the default step the difference
quotient then carries ~1e-19 relative rounding instead of ~1e-16, which is
what lets gradients down to ~1e-8 be resolved to 1e-4 relative error.

Entries whose perturbation flips a discrete decision of the forward pass
(pooling winner, ReLU sign of a winning pre-activation, loss clamp) are
reported as skipped: the loss is not differentiable across that point.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .encoder import encode
from .fusion import EPS
from .training import ModelState, PreparedExample, forward, gradients

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4
EXTENDED = np.longdouble


def relative_error(a, n):
    return abs(a - n) / max(abs(a), abs(n), 1e-8)


@dataclass
class GroupResult:
    checked: int = 0
    skipped: int = 0
    failed: int = 0
    max_error: float = 0.0


@dataclass
class GradCheckReport:
    tolerance: float
    groups: dict = field(default_factory=dict)

    @property
    def max_error(self):
        return max((g.max_error for g in self.groups.values()), default=0.0)

    @property
    def checked(self):
        return sum(g.checked for g in self.groups.values())

    @property
    def skipped(self):
        return sum(g.skipped for g in self.groups.values())

    @property
    def failed(self):
        return sum(g.failed for g in self.groups.values())

    @property
    def passed(self):
        return self.failed == 0

    def merge(self, other):
        for name, g in other.groups.items():
            mine = self.groups.setdefault(name, GroupResult())
            mine.checked += g.checked
            mine.skipped += g.skipped
            mine.failed += g.failed
            mine.max_error = max(mine.max_error, g.max_error)
        return self


def _pattern(state, fwd):
    """Discrete decisions taken by one forward pass."""
    key = []
    for cache in (fwd.text_cache, fwd.caption_cache):
        if cache is None:
            continue
        key += [tuple(idx) for idx in cache.argmax]
        key.append(tuple(cache.winning_pre() > 0.0))
    if fwd.s is not None:
        key.append(fwd.s <= EPS or fwd.s >= 1.0 - EPS)
    key.append(fwd.y_hat <= EPS or fwd.y_hat >= 1.0 - EPS)
    return tuple(key)


def _loss_parts(state, ex, group, base_text, base_caption):
    """(prediction-loss, similarity-loss, pattern) with cached encodings for untouched encoders."""
    cfg = state.config
    text_out = None if group == "text" or cfg.variant == "T" else base_text
    caption_out = None if group == "caption" or cfg.variant == "V" else base_caption
    fwd = forward(state, ex, text_out, caption_out)
    return fwd.loss_pred, (fwd.loss_sim if fwd.s is not None else 0.0), _pattern(state, fwd)


def numeric_parts(state: ModelState, ex: PreparedExample, step=DEFAULT_STEP):
    """Central differences of the two loss components for every parameter entry.

    Returns ``{name: (d_pred, d_sim, skip_mask)}``.  The total-loss derivative
    for weights (a, b) is ``a * d_pred + b * d_sim``.
    """
    state = state.astype(EXTENDED)
    ex = PreparedExample(ex.id, ex.text.astype(EXTENDED), ex.caption.astype(EXTENDED), ex.label)
    step = EXTENDED(step)
    base_text = None if state.config.variant == "T" else encode(state.text, ex.text)
    base_caption = None if state.config.variant == "V" else encode(state.caption, ex.caption)
    base_fwd = forward(state, ex, base_text, base_caption)
    base_pattern = _pattern(state, base_fwd)
    out = {}
    for name, arr in state.named_arrays():
        group = name.split(".")[0]
        d_pred = np.zeros(arr.shape)
        d_sim = np.zeros(arr.shape)
        skip = np.zeros(arr.shape, dtype=bool)
        flat = arr.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            p_plus, s_plus, pat_plus = _loss_parts(state, ex, group, base_text, base_caption)
            flat[i] = orig - step
            p_minus, s_minus, pat_minus = _loss_parts(state, ex, group, base_text, base_caption)
            flat[i] = orig
            idx = np.unravel_index(i, arr.shape)
            d_pred[idx] = float((p_plus - p_minus) / (2 * step))
            d_sim[idx] = float((s_plus - s_minus) / (2 * step))
            skip[idx] = pat_plus != base_pattern or pat_minus != base_pattern
        out[name] = (d_pred, d_sim, skip)
    return out


def analytic_arrays(state, ex):
    """Analytic total-loss gradients keyed like ``named_arrays``; frozen blocks are zero."""
    gs = gradients(state, ex)
    out = {}
    for prefix, params, grads in (("text", state.text, gs.text), ("caption", state.caption, gs.caption),
                                  ("head", state.head, gs.head)):
        src = grads.arrays() if grads is not None else [np.zeros_like(a) for a in params.arrays()]
        for n, g in zip(params.array_names(), src):
            out[f"{prefix}.{n}"] = g
    return out


def compare(analytic, numeric, alpha, beta, tolerance):
    report = GradCheckReport(tolerance)
    for name, (d_pred, d_sim, skip) in numeric.items():
        num = alpha * d_pred + beta * d_sim
        ana = analytic[name]
        g = report.groups.setdefault(name, GroupResult())
        for idx in np.ndindex(num.shape):
            if skip[idx]:
                g.skipped += 1
                continue
            err = relative_error(float(ana[idx]), float(num[idx]))
            g.checked += 1
            g.max_error = max(g.max_error, err)
            if not err < tolerance:
                g.failed += 1
    return report


def gradient_check(state: ModelState, ex: PreparedExample, step=DEFAULT_STEP, tolerance=DEFAULT_TOLERANCE,
                   analytic=None) -> GradCheckReport:
    """Check every parameter of ``state`` at its configured loss weights."""
    cfg = state.config
    probe = state.copy()
    probe.config = replace(cfg, alpha=1.0, beta=1.0)
    numeric = numeric_parts(probe, ex, step)
    if analytic is None:
        analytic = analytic_arrays(state, ex)
    return compare(analytic, numeric, cfg.alpha, cfg.effective_beta, tolerance)


def gradient_check_weights(state: ModelState, ex: PreparedExample, weight_pairs, step=DEFAULT_STEP,
                           tolerance=DEFAULT_TOLERANCE):
    """One finite-difference sweep reused for several (alpha, beta) settings.

    Returns ``{(alpha, beta): GradCheckReport}``.
    """
    probe = state.copy()
    probe.config = replace(state.config, alpha=1.0, beta=1.0)  # evaluate both loss components
    numeric = numeric_parts(probe, ex, step)
    reports = {}
    for alpha, beta in weight_pairs:
        s = state.copy()
        s.config = replace(state.config, alpha=alpha, beta=beta)
        analytic = analytic_arrays(s, ex)
        reports[(alpha, beta)] = compare(analytic, numeric, alpha, s.config.effective_beta, tolerance)
    return reports


WEIGHT_VALUES = (0.0, 0.4, 0.6, 1.0)


def default_weight_pairs(values=WEIGHT_VALUES):
    return [(a, b) for a in values for b in values if a + b > 0]


def random_model(config, vocab, table, seed):
    """Initialized model with biases also randomized, so bias gradients are exercised."""
    from .numerics import RngState
    state = ModelState.initialize(replace(config, seed=seed), vocab, table)
    rng = RngState.derived(seed, 5)
    for name, arr in state.named_arrays():
        if name.endswith("bias") or "bias_h" in name:
            arr[...] = rng.normal(arr.shape, config.init_scale)
    return state


def run_gradcheck(n_examples, config, variants=None, weight_pairs=None, step=DEFAULT_STEP,
                  tolerance=DEFAULT_TOLERANCE, progress=None):
    """Check ``n_examples`` random model/example pairs under every variant and weight pair.

    Returns the merged :class:`GradCheckReport`.
    """
    from . import VARIANTS
    from .data import generate_synthetic
    from .evaluation import build_resources
    from .training import prepare

    variants = VARIANTS if variants is None else variants
    weight_pairs = default_weight_pairs() if weight_pairs is None else weight_pairs
    corpus, _ = generate_synthetic(size=max(4, 2 * ((n_examples + 1) // 2)), seed=config.seed)
    vocab, table = build_resources(corpus, config)
    total = GradCheckReport(tolerance)
    for i in range(n_examples):
        article = corpus.articles[i]
        for v in variants:
            cfg = replace(config, variant=v)
            state = random_model(cfg, vocab, table, config.seed + 7919 * (i + 1))
            ex = prepare(article, vocab, table, cfg)
            for (a, b), rep in gradient_check_weights(state, ex, weight_pairs, step, tolerance).items():
                total.merge(rep)
                if progress is not None:
                    progress(i, v, a, b, rep)
    return total
