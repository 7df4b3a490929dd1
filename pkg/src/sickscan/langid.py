"""Character n-gram language identification.

Multinomial Naive Bayes over character 1/2/3-grams of NFC-normalized,
case-folded text. Works uniformly across Latin and CJK scripts and
returns a calibrated posterior so callers can route uncertain documents
instead of guessing: texts shorter than 20 characters fall back to "und"
unless one language is nearly certain.
"""

from __future__ import annotations

import json
import math
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from sickscan.corpus import UNDETERMINED, valid_lang

NGRAM_ORDER = 3
MIN_NGRAMS_PER_LANG = 100
SHORT_TEXT_CHARS = 20
SHORT_TEXT_OVERRIDE = 0.95

_WS_RE = re.compile(r"\s+")


class LangIdError(Exception):
    pass


class InvalidConfig(LangIdError):
    pass


class InsufficientData(LangIdError):
    def __init__(self, lang: str, got: int):
        super().__init__(
            f"language {lang!r} contributes {got} n-grams, need >= {MIN_NGRAMS_PER_LANG}"
        )
        self.lang = lang
        self.got = got


class EmptyText(LangIdError):
    pass


def _normalize(text: str) -> str:
    text = unicodedata.normalize("NFC", text).casefold()
    return _WS_RE.sub(" ", text).strip()


def _ngrams(text: str) -> dict[str, int]:
    counts: dict[str, int] = {}
    for n in range(1, NGRAM_ORDER + 1):
        for i in range(len(text) - n + 1):
            g = text[i : i + n]
            counts[g] = counts.get(g, 0) + 1
    return counts


@dataclass(frozen=True)
class DetectorModel:
    languages: tuple[str, ...]
    ngram_order: int
    smoothing_alpha: float
    log_priors: dict[str, float]
    log_likelihoods: dict[str, dict[str, float]]
    total_ngrams: dict[str, int]
    vocab: frozenset[str] = field(repr=False)
    default_log_likelihood: dict[str, float] = field(repr=False)

    def to_json(self) -> dict:
        return {
            "version": 1,
            "languages": list(self.languages),
            "ngram_order": self.ngram_order,
            "alpha": self.smoothing_alpha,
            "log_priors": self.log_priors,
            "total_ngrams": self.total_ngrams,
            "log_likelihoods": self.log_likelihoods,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DetectorModel":
        languages = tuple(obj["languages"])
        alpha = float(obj["alpha"])
        tables = {lang: dict(t) for lang, t in obj["log_likelihoods"].items()}
        totals = {lang: int(v) for lang, v in obj["total_ngrams"].items()}
        return _finalize_model(
            languages=languages,
            ngram_order=int(obj["ngram_order"]),
            alpha=alpha,
            log_priors={k: float(v) for k, v in obj["log_priors"].items()},
            tables=tables,
            totals=totals,
        )


def _finalize_model(
    *,
    languages: tuple[str, ...],
    ngram_order: int,
    alpha: float,
    log_priors: dict[str, float],
    tables: dict[str, dict[str, float]],
    totals: dict[str, int],
) -> DetectorModel:
    vocab = frozenset(g for table in tables.values() for g in table)
    defaults = {
        lang: math.log(alpha / (totals[lang] + alpha * len(vocab)))
        for lang in languages
    }
    return DetectorModel(
        languages=languages,
        ngram_order=ngram_order,
        smoothing_alpha=alpha,
        log_priors=log_priors,
        log_likelihoods=tables,
        total_ngrams=totals,
        vocab=vocab,
        default_log_likelihood=defaults,
    )


def train_detector(
    seed_corpora: Mapping[str, Sequence[str]], alpha: float = 0.5
) -> DetectorModel:
    """Fit the detector from per-language seed texts.

    Likelihoods are add-alpha smoothed relative frequencies of character
    1/2/3-grams over a vocabulary shared across languages; priors follow
    seed text counts.
    """
    if alpha <= 0:
        raise InvalidConfig("smoothing alpha must be positive")
    if len(seed_corpora) < 2:
        raise InvalidConfig("need seed corpora for at least 2 languages")
    for lang in seed_corpora:
        if not valid_lang(lang) or lang == UNDETERMINED:
            raise InvalidConfig(f"bad language tag {lang!r}")

    counts: dict[str, dict[str, int]] = {}
    totals: dict[str, int] = {}
    text_counts: dict[str, int] = {}
    for lang, texts in seed_corpora.items():
        lang_counts: dict[str, int] = {}
        n_texts = 0
        for text in texts:
            norm = _normalize(text)
            if not norm:
                continue
            n_texts += 1
            for g, c in _ngrams(norm).items():
                lang_counts[g] = lang_counts.get(g, 0) + c
        total = sum(lang_counts.values())
        if total < MIN_NGRAMS_PER_LANG:
            raise InsufficientData(lang, total)
        counts[lang] = lang_counts
        totals[lang] = total
        text_counts[lang] = n_texts

    languages = tuple(sorted(counts))
    vocab_size = len({g for c in counts.values() for g in c})
    total_texts = sum(text_counts.values())
    log_priors = {
        lang: math.log(text_counts[lang] / total_texts) for lang in languages
    }
    tables = {
        lang: {
            g: math.log((c + alpha) / (totals[lang] + alpha * vocab_size))
            for g, c in counts[lang].items()
        }
        for lang in languages
    }
    return _finalize_model(
        languages=languages,
        ngram_order=NGRAM_ORDER,
        alpha=alpha,
        log_priors=log_priors,
        tables=tables,
        totals=totals,
    )


def posteriors(model: DetectorModel, text: str) -> dict[str, float]:
    """Normalized posterior over the model's languages; sums to 1."""
    norm = _normalize(text)
    if not norm:
        raise EmptyText("cannot detect language of empty text")
    grams = _ngrams(norm)
    scores = {}
    for lang in model.languages:
        table = model.log_likelihoods[lang]
        default = model.default_log_likelihood[lang]
        score = model.log_priors[lang]
        for g, c in grams.items():
            if g in model.vocab:
                score += c * table.get(g, default)
        scores[lang] = score
    peak = max(scores.values())
    exps = {lang: math.exp(s - peak) for lang, s in scores.items()}
    z = sum(exps.values())
    return {lang: e / z for lang, e in exps.items()}


def detect(model: DetectorModel, text: str) -> tuple[str, float]:
    """Return (language, confidence); short uncertain texts map to ("und", 0.0)."""
    post = posteriors(model, text)
    best = max(post, key=lambda lang: (post[lang], lang))
    confidence = post[best]
    if len(_normalize(text)) < SHORT_TEXT_CHARS and confidence <= SHORT_TEXT_OVERRIDE:
        return UNDETERMINED, 0.0
    return best, confidence


def save_model(model: DetectorModel, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(model.to_json(), ensure_ascii=False, sort_keys=True),
        encoding="utf-8",
    )
    return path


def load_model(path: Path | str) -> DetectorModel:
    with open(path, encoding="utf-8") as fh:
        return DetectorModel.from_json(json.load(fh))


def load_seed_corpora(seed_dir: Path | str) -> dict[str, list[str]]:
    """Read <lang>.txt files (one sentence per line) from a directory."""
    seed_dir = Path(seed_dir)
    corpora: dict[str, list[str]] = {}
    for path in sorted(seed_dir.glob("*.txt")):
        lang = path.stem
        lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines()]
        corpora[lang] = [ln for ln in lines if ln]
    if not corpora:
        raise InvalidConfig(f"no seed corpora found in {seed_dir}")
    return corpora
