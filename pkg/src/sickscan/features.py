"""Tokenization and TF-IDF vectorization for the linear classifier.

Tokenization rules: NFC-normalize, case-fold (configurable), segment on
word boundaries, re-segment contiguous CJK runs into character bigrams
(whitespace segmentation carries no signal for zh/ja), drop
punctuation-only tokens, truncate to a token budget. IDF uses the
smoothed form ln((1 + N) / (1 + df)) + 1 so values stay positive, and
vectors are L2-normalized.
"""

from __future__ import annotations

import json
import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from sickscan.corpus import Document, content_hash

_SEGMENT_RE = re.compile(r"\w+|[^\w\s]+")

# Han ideographs plus kana; the scripts where whitespace segmentation fails.
_CJK_RANGES = (
    (0x3040, 0x30FF),  # hiragana + katakana
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xF900, 0xFAFF),
    (0xFF66, 0xFF9D),  # halfwidth katakana
)


class FeatureError(Exception):
    pass


class EmptyVocabulary(FeatureError):
    pass


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    cjk_mode: str = "char_bigrams"  # or "chars"
    drop_punctuation: bool = True
    max_tokens: int = 512

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.cjk_mode not in ("char_bigrams", "chars"):
            raise ValueError(f"unknown cjk_mode {self.cjk_mode!r}")

    def to_json(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "cjk_mode": self.cjk_mode,
            "drop_punctuation": self.drop_punctuation,
            "max_tokens": self.max_tokens,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TokenizerConfig":
        return cls(**obj)


def _is_cjk(ch: str) -> bool:
    code = ord(ch)
    return any(lo <= code <= hi for lo, hi in _CJK_RANGES)


def _split_cjk_runs(token: str) -> list[tuple[str, bool]]:
    runs: list[tuple[str, bool]] = []
    start = 0
    current = _is_cjk(token[0])
    for i in range(1, len(token)):
        flag = _is_cjk(token[i])
        if flag != current:
            runs.append((token[start:i], current))
            start = i
            current = flag
    runs.append((token[start:], current))
    return runs


def tokenize(text: str, lang: str, config: TokenizerConfig | None = None) -> list[str]:
    """Total over all Unicode input; empty text gives an empty list."""
    config = config or TokenizerConfig()
    text = unicodedata.normalize("NFC", text)
    if config.lowercase:
        text = text.casefold()
    tokens: list[str] = []
    for match in _SEGMENT_RE.finditer(text):
        piece = match.group()
        if not piece[0].isalnum() and piece[0] != "_" and not _is_cjk(piece[0]):
            # punctuation-only run by construction of the regex
            if not config.drop_punctuation:
                tokens.append(piece)
            continue
        for run, is_cjk in _split_cjk_runs(piece):
            if not is_cjk:
                tokens.append(run)
            elif config.cjk_mode == "chars" or len(run) == 1:
                tokens.extend(run)
            else:
                tokens.extend(run[i : i + 2] for i in range(len(run) - 1))
        if len(tokens) >= config.max_tokens:
            break
    return tokens[: config.max_tokens]


@dataclass(frozen=True, eq=False)
class SparseVector:
    indices: np.ndarray  # strictly increasing, < dim
    values: np.ndarray
    dim: int

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values length mismatch")
        if len(self.indices):
            if not np.all(np.diff(self.indices) > 0):
                raise ValueError("indices must be strictly increasing")
            if self.indices[-1] >= self.dim or self.indices[0] < 0:
                raise ValueError("index out of range")
            if not np.all(np.isfinite(self.values)):
                raise ValueError("values must be finite")

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2)))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim)
        dense[self.indices] = self.values
        return dense


@dataclass(frozen=True)
class Vectorizer:
    vocab: dict[str, int]  # token -> column, insertion-ordered
    idf: np.ndarray
    doc_count: int
    config: TokenizerConfig

    @property
    def dim(self) -> int:
        return len(self.vocab)

    def to_json(self) -> dict:
        return {
            "version": 1,
            "config": self.config.to_json(),
            "vocab": list(self.vocab.keys()),
            "idf": [float(v) for v in self.idf],
            "doc_count": self.doc_count,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Vectorizer":
        vocab = {tok: i for i, tok in enumerate(obj["vocab"])}
        return cls(
            vocab=vocab,
            idf=np.asarray(obj["idf"], dtype=np.float64),
            doc_count=int(obj["doc_count"]),
            config=TokenizerConfig.from_json(obj["config"]),
        )

    def content_hash(self) -> str:
        return content_hash(json.dumps(self.to_json(), ensure_ascii=False, sort_keys=True))


def fit_vectorizer(
    corpus: Sequence[Document],
    config: TokenizerConfig | None = None,
    min_df: int = 2,
) -> Vectorizer:
    """Build the vocabulary (document frequency >= min_df, first-appearance
    order) and smoothed IDF weights from a document collection."""
    if not corpus:
        raise ValueError("cannot fit a vectorizer on an empty corpus")
    config = config or TokenizerConfig()
    df: dict[str, int] = {}
    for doc in corpus:
        for token in set(tokenize(doc.text, doc.lang, config)):
            df[token] = df.get(token, 0) + 1
    # a second pass in corpus order fixes the first-appearance ordering
    vocab: dict[str, int] = {}
    for doc in corpus:
        for token in tokenize(doc.text, doc.lang, config):
            if token not in vocab and df[token] >= min_df:
                vocab[token] = len(vocab)
    if not vocab:
        raise EmptyVocabulary(f"no token has document frequency >= {min_df}")
    n = len(corpus)
    idf = np.array(
        [math.log((1 + n) / (1 + df[tok])) + 1.0 for tok in vocab], dtype=np.float64
    )
    return Vectorizer(vocab=vocab, idf=idf, doc_count=n, config=config)


def vectorize(v: Vectorizer, text: str, lang: str) -> SparseVector:
    """Raw term counts times IDF, L2-normalized; all-OOV text gives the
    zero vector."""
    counts = Counter(
        v.vocab[t] for t in tokenize(text, lang, v.config) if t in v.vocab
    )
    if not counts:
        return SparseVector(
            indices=np.empty(0, dtype=np.int64),
            values=np.empty(0, dtype=np.float64),
            dim=v.dim,
        )
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[i] for i in indices], dtype=np.float64) * v.idf[indices]
    norm = np.sqrt(np.sum(values**2))
    if norm > 0:
        values = values / norm
    return SparseVector(indices=indices, values=values, dim=v.dim)


def vectorize_doc(v: Vectorizer, doc: Document) -> SparseVector:
    return vectorize(v, doc.text, doc.lang)


def save_vectorizer(v: Vectorizer, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(v.to_json(), ensure_ascii=False, sort_keys=True), encoding="utf-8"
    )
    return path


def load_vectorizer(path: Path | str) -> Vectorizer:
    with open(path, encoding="utf-8") as fh:
        return Vectorizer.from_json(json.load(fh))
