"""Model file: UTF-8 JSON, fixed key order, floats written in shortest round-trip form.

Layout (format ``safenews-model/1``)::

    {"format": "safenews-model/1",
     "config": {TrainConfig fields},
     "epoch": int,
     "vocabulary": {"sha256": hex, "tokens": [...]},
     "embeddings": {"shape": [V, k], "data": [row-major floats]},
     "params": [{"name": ..., "shape": [...], "data": [...]}, ...]}

``params`` follow ``ModelState.named_arrays()``: text encoder, caption
encoder, then head; within an encoder, filter and filter bias per window
size in ascending configuration order, then projection and its bias.
"""
import json

import numpy as np

from .encoder import EncoderParams
from .errors import CorruptModelFile, VocabularyMismatch
from .fusion import ClassifierParams
from .text import EmbeddingTable, Vocabulary
from .training import ModelState, TrainConfig

FORMAT = "safenews-model/1"


def _array(a):
    return {"shape": list(a.shape), "data": [float(x) for x in a.ravel()]}


def dumps_model(state: ModelState) -> str:
    doc = {
        "format": FORMAT,
        "config": state.config.to_dict(),
        "epoch": state.epoch,
        "vocabulary": {"sha256": state.vocab.digest(), "tokens": state.vocab.tokens},
        "embeddings": _array(state.embeddings.matrix),
        "params": [dict(name=n, **_array(a)) for n, a in state.named_arrays()],
    }
    return json.dumps(doc, ensure_ascii=False, allow_nan=False) + "\n"


def save_model(state: ModelState, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(state))


def _load_array(entry):
    shape = tuple(int(x) for x in entry["shape"])
    a = np.asarray(entry["data"], dtype=np.float64)
    if a.size != int(np.prod(shape)):
        raise CorruptModelFile(f"array has {a.size} values, shape {shape} needs {int(np.prod(shape))}")
    return a.reshape(shape)


def loads_model(text, expected_vocab_hash=None) -> ModelState:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModelFile(f"not a model file: {exc}") from None
    try:
        if doc.get("format") != FORMAT:
            raise CorruptModelFile(f"unsupported format tag {doc.get('format')!r}")
        config = TrainConfig.from_dict(doc["config"])
        vocab = Vocabulary(doc["vocabulary"]["tokens"])
        recorded = doc["vocabulary"]["sha256"]
        if vocab.digest() != recorded:
            raise VocabularyMismatch("stored vocabulary does not match its recorded hash")
        if expected_vocab_hash is not None and recorded != expected_vocab_hash:
            raise VocabularyMismatch(f"model vocabulary {recorded[:12]} != expected {expected_vocab_hash[:12]}")
        embeddings = EmbeddingTable(_load_array(doc["embeddings"]))
        arrays = {p["name"]: _load_array(p) for p in doc["params"]}
        windows = config.windows

        def enc(prefix):
            return EncoderParams(
                windows,
                [arrays[f"{prefix}.filter_h{h}"] for h in windows],
                [arrays[f"{prefix}.filter_bias_h{h}"] for h in windows],
                arrays[f"{prefix}.proj"], arrays[f"{prefix}.proj_bias"])

        state = ModelState(enc("text"), enc("caption"),
                           ClassifierParams(arrays["head.weight"], arrays["head.bias"]),
                           config, vocab, embeddings, int(doc["epoch"]))
    except (VocabularyMismatch, CorruptModelFile):
        raise
    except Exception as exc:  # missing keys, wrong types, inconsistent shapes
        raise CorruptModelFile(f"invalid model file: {exc!r}") from None
    if len(embeddings) != len(vocab) or embeddings.dim != config.embed_dim:
        raise CorruptModelFile("embedding table does not match vocabulary/config")
    if state.text.latent_dim != config.latent_dim or state.text.embed_dim != config.embed_dim:
        raise CorruptModelFile("encoder shapes do not match config")
    return state


def load_model(path, expected_vocab_hash=None) -> ModelState:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except UnicodeDecodeError as exc:
        raise CorruptModelFile(str(exc)) from None
    return loads_model(text, expected_vocab_hash)
