"""News corpora: JSON-lines I/O, temporal and k-fold splits, synthetic generator."""
from __future__ import annotations

import datetime as dt
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DuplicateId, MalformedRecord, MissingTimestamp, TooFewExamples
from .numerics import RngState

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NewsArticle:
    id: str
    text: str
    label: int            # 1 = fake, 0 = true
    published_at: dt.datetime | None
    caption: str = ""
    caption_missing: bool = False

    def to_record(self):
        rec = {"id": self.id, "text": self.text, "label": self.label,
               "published_at": self.published_at.isoformat() if self.published_at else None}
        if not self.caption_missing:
            rec["caption"] = self.caption
        return rec


@dataclass
class Corpus:
    articles: list
    provenance: str = ""

    def __len__(self):
        return len(self.articles)

    def __iter__(self):
        return iter(self.articles)

    @property
    def labels(self):
        return [a.label for a in self.articles]


def parse_timestamp(value):
    if isinstance(value, str):
        ts = dt.datetime.fromisoformat(value.replace("Z", "+00:00"))
        if ts.tzinfo is not None:
            ts = ts.astimezone(dt.timezone.utc).replace(tzinfo=None)
        return ts
    raise ValueError(f"expected ISO-8601 string, got {value!r}")


def parse_record(obj, line_no):
    if not isinstance(obj, dict):
        raise MalformedRecord(line_no, "record is not a JSON object")
    for key in ("id", "text", "label", "published_at"):
        if key not in obj:
            raise MalformedRecord(line_no, f"missing required key {key!r}")
    if not isinstance(obj["id"], str) or not isinstance(obj["text"], str):
        raise MalformedRecord(line_no, "'id' and 'text' must be strings")
    label = obj["label"]
    if isinstance(label, bool) or label not in (0, 1):
        raise MalformedRecord(line_no, f"label must be 0 or 1, got {label!r}")
    try:
        published = parse_timestamp(obj["published_at"])
    except ValueError as exc:
        raise MalformedRecord(line_no, f"bad published_at: {exc}") from None
    caption = obj.get("caption")
    if caption is not None and not isinstance(caption, str):
        raise MalformedRecord(line_no, "'caption' must be a string")
    return NewsArticle(obj["id"], obj["text"], int(label), published,
                       caption or "", caption_missing=caption is None)


def load_corpus(path) -> Corpus:
    articles, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from None
            art = parse_record(obj, line_no)
            if art.id in seen:
                raise DuplicateId(f"line {line_no}: duplicate id {art.id!r}")
            seen.add(art.id)
            if art.caption_missing:
                log.info("article %s has no caption", art.id)
            articles.append(art)
    return Corpus(articles, provenance=str(path))


def save_corpus(corpus, path):
    with open(path, "w", encoding="utf-8") as fh:
        for a in corpus:
            fh.write(json.dumps(a.to_record(), ensure_ascii=False) + "\n")


def temporal_split(corpus, train_fraction=0.8):
    """Oldest floor(fraction * m) articles train; the newest remainder is held out."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    for a in corpus:
        if a.published_at is None:
            raise MissingTimestamp(f"article {a.id} has no publication date")
    ordered = sorted(corpus, key=lambda a: (a.published_at, a.id))
    n_train = int(np.floor(train_fraction * len(ordered)))
    return (Corpus(ordered[:n_train], f"{corpus.provenance}[train]"),
            Corpus(ordered[n_train:], f"{corpus.provenance}[test]"))


def kfold_split(corpus, k=5, seed=0):
    """Seeded shuffle, then k contiguous folds whose sizes differ by at most one."""
    m = len(corpus)
    if k < 2:
        raise ValueError("k must be >= 2")
    if m < k:
        raise TooFewExamples(f"{m} articles cannot fill {k} folds")
    order = RngState.derived(seed, 2).permutation(m)
    folds = np.array_split(order, k)
    arts = corpus.articles
    out = []
    for i, val_idx in enumerate(folds):
        val = set(val_idx.tolist())
        out.append((Corpus([arts[j] for j in order if j not in val], f"{corpus.provenance}[fold{i}-train]"),
                    Corpus([arts[j] for j in val_idx], f"{corpus.provenance}[fold{i}-val]")))
    return out


# ---------------------------------------------------------------- synthetic

@dataclass
class SyntheticTruth:
    """Planted ground truth for each generated article, keyed by id."""
    topic: dict = field(default_factory=dict)
    mismatched: dict = field(default_factory=dict)
    text_pool: dict = field(default_factory=dict)
    caption_pool: dict = field(default_factory=dict)


MARKER_WORDS = 4


def _pools(vocab_size, n_topics):
    words = [f"w{i:04d}" for i in range(vocab_size)]
    # n_topics topic pools, one off-topic pool, a few text-marker words, shared filler
    n_pools = n_topics + 3
    per = max(4, vocab_size // n_pools)
    pools = {}
    for j in range(n_topics):
        pools[f"topic{j}"] = words[j * per:(j + 1) * per]
    base = n_topics * per
    pools["offtopic"] = words[base:base + per]
    pools["marker"] = words[base + per:base + per + MARKER_WORDS]
    pools["filler"] = words[base + 2 * per:] or words[:per]
    return pools


def generate_synthetic(size=200, vocab_size=240, mismatch=1.0, seed=0, n_topics=4,
                       text_len=(20, 30), caption_len=(6, 10), text_signal=0.0,
                       start=dt.datetime(2016, 1, 1), days=730):
    """Balanced corpus with planted text/caption (mis)matches.

    True articles draw text and caption words from one topic pool.  A fake
    article draws its caption from the off-topic pool (disjoint from every
    topic pool) with probability ``mismatch``, otherwise from its own topic
    like a true article.  With probability ``text_signal`` a fake article's
    text also carries a few recurring marker words, a text-only cue.
    Publication dates are uniform over ``days`` and independent of labels.
    """
    if size < 4 or size % 2:
        raise ValueError("size must be an even number >= 4")
    if not 0.0 <= mismatch <= 1.0 or not 0.0 <= text_signal <= 1.0:
        raise ValueError("probabilities must lie in [0, 1]")
    rng = RngState.derived(seed, 3).generator
    pools = _pools(vocab_size, n_topics)
    labels = np.array([0] * (size // 2) + [1] * (size // 2))
    rng.shuffle(labels)
    truth = SyntheticTruth()
    articles = []

    def draw(pool, n):
        return [pool[i] for i in rng.integers(0, len(pool), size=n)]

    for i, y in enumerate(labels.tolist()):
        topic = f"topic{int(rng.integers(0, n_topics))}"
        n_text = int(rng.integers(text_len[0], text_len[1] + 1))
        n_cap = int(rng.integers(caption_len[0], caption_len[1] + 1))
        text = draw(pools[topic], n_text - n_text // 4) + draw(pools["filler"], n_text // 4)
        if y == 1 and rng.random() < text_signal:
            text[: n_text // 5] = draw(pools["marker"], n_text // 5)
        mismatched = y == 1 and rng.random() < mismatch
        cap_pool = "offtopic" if mismatched else topic
        caption = draw(pools[cap_pool], n_cap)
        rng.shuffle(text)
        rng.shuffle(caption)
        published = start + dt.timedelta(seconds=int(rng.integers(0, days * 86400)))
        aid = f"syn{seed}-{i:05d}"
        articles.append(NewsArticle(aid, " ".join(text), int(y), published, " ".join(caption)))
        truth.topic[aid] = topic
        truth.mismatched[aid] = mismatched
        truth.text_pool[aid] = topic
        truth.caption_pool[aid] = cap_pool
    return Corpus(articles, provenance=f"synthetic(size={size},mismatch={mismatch},seed={seed})"), truth
