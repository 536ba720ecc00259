"""Tokenization, vocabulary, and frozen word-embedding lookup."""
from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, MalformedEmbeddingFile
from .numerics import DTYPE, RngState, seeded_normal

PAD = "<pad>"
UNK = "<unk>"
PAD_ID = 0
UNK_ID = 1
DEFAULT_MAX_LEN = 1000

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase, keep word runs, split every punctuation mark into its own token."""
    return _TOKEN_RE.findall(text.lower())


class Vocabulary:
    def __init__(self, tokens):
        tokens = list(tokens)
        if tokens[:2] != [PAD, UNK]:
            raise ValueError("vocabulary must start with PAD and UNK")
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}
        if len(self.index) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def lookup(self, token):
        return self.index.get(token, UNK_ID)

    def token(self, i):
        return self.tokens[i]

    def encode(self, tokens):
        return [self.lookup(t) for t in tokens]

    def digest(self) -> str:
        """SHA-256 over the ordered token list; identifies the index assignment."""
        h = hashlib.sha256()
        for t in self.tokens:
            h.update(t.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()


def build_vocabulary(corpus, min_count=1) -> Vocabulary:
    """Tokens with frequency >= min_count, ordered by (-frequency, token)."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter()
    for tokens in corpus:
        counts.update(tokens)
    counts.pop(PAD, None)
    counts.pop(UNK, None)
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return Vocabulary([PAD, UNK] + kept)


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple
    length: int  # before padding / after truncation

    @classmethod
    def from_tokens(cls, tokens, vocab, min_len, max_len=DEFAULT_MAX_LEN):
        ids = vocab.encode(tokens[:max_len])
        n = len(ids)
        if n < min_len:
            ids = ids + [PAD_ID] * (min_len - n)
        return cls(tuple(ids), n)


class EmbeddingTable:
    """|vocab| x k matrix with a zero PAD row."""

    def __init__(self, matrix):
        matrix = np.array(matrix, dtype=DTYPE)
        if matrix.ndim != 2 or matrix.shape[0] < 2:
            raise DimensionMismatch(f"bad embedding matrix shape {matrix.shape}")
        matrix[PAD_ID] = 0.0
        matrix.setflags(write=False)
        self.matrix = matrix

    @property
    def dim(self):
        return self.matrix.shape[1]

    def __len__(self):
        return self.matrix.shape[0]

    @classmethod
    def random(cls, vocab, dim, rng):
        return cls(seeded_normal(rng, (len(vocab), dim), 1.0 / np.sqrt(dim)))


def embed_sequence(seq: TokenSequence, table: EmbeddingTable, dim=None):
    """One row per padded position; returns an (n, k) array."""
    if dim is not None and table.dim != dim:
        raise DimensionMismatch(f"embedding dim {table.dim} != configured {dim}")
    return table.matrix[np.asarray(seq.ids, dtype=np.intp)]


def load_embeddings(path, vocab: Vocabulary, rng: RngState, dim=None) -> EmbeddingTable:
    """Read ``token v1 ... vk`` lines.  Tokens absent from the file get N(0, 1/k) rows."""
    rows = {}
    k = dim
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            token, fields = parts[0], parts[1:]
            if k is None:
                k = len(fields)
            if len(fields) != k or k == 0:
                raise MalformedEmbeddingFile(
                    f"{path}:{line_no}: expected {k} values, got {len(fields)}")
            try:
                values = [float(x) for x in fields]
            except ValueError as exc:
                raise MalformedEmbeddingFile(f"{path}:{line_no}: {exc}") from None
            if not np.all(np.isfinite(values)):
                raise MalformedEmbeddingFile(f"{path}:{line_no}: non-finite value")
            if token in vocab:
                rows[vocab.lookup(token)] = values
    if k is None:
        raise MalformedEmbeddingFile(f"{path}: empty file and no dimension given")
    matrix = seeded_normal(rng, (len(vocab), k), 1.0 / np.sqrt(k))
    for i, values in rows.items():
        matrix[i] = values
    return EmbeddingTable(matrix)


def write_embeddings(path, vocab, table):
    with open(path, "w", encoding="utf-8") as fh:
        for i, tok in enumerate(vocab.tokens):
            if i == PAD_ID:
                continue
            fh.write(tok + " " + " ".join(repr(float(x)) for x in table.matrix[i]) + "\n")
