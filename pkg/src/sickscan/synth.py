"""Synthetic review generators.

The labeled corpus behind published foodborne-illness classifiers is
private, so schema-compatible synthetic fixtures stand in for it. Two
generators live here: a cheap pseudo-document generator for count
arithmetic at full dataset scale, and a bilingual (en/es) review
generator with aligned vocabularies so that token-map translation of
English reviews produces text that genuinely matches native synthetic
Spanish, which is what makes the cross-lingual transfer demo work.
"""

from __future__ import annotations

import random

from sickscan.corpus import Document, Label, LabeledDataset, Split, UnlabeledCorpus

# English and Spanish banks are aligned index-by-index; the token map is
# derived from them so translated and native documents share vocabulary.
_SICK_EN = (
    "sick", "vomit", "vomited", "nausea", "poisoning", "diarrhea",
    "stomachache", "cramps", "ill", "queasy", "fever", "hospital",
)
_SICK_ES = (
    "enfermo", "vomito", "vomitamos", "nausea", "intoxicacion", "diarrea",
    "dolor", "calambres", "malestar", "mareado", "fiebre", "hospital",
)
_PRAISE_EN = (
    "delicious", "tasty", "great", "amazing", "wonderful", "friendly",
    "cozy", "lovely", "excellent", "perfect", "fresh", "attentive",
)
_PRAISE_ES = (
    "delicioso", "sabroso", "genial", "increible", "maravilloso", "amable",
    "acogedor", "encantador", "excelente", "perfecto", "fresco", "atento",
)
_FILLER_EN = (
    "the", "we", "my", "was", "after", "eating", "food", "meal", "dinner",
    "lunch", "here", "place", "restaurant", "service", "staff", "ordered",
    "night", "again", "never", "back", "table", "waiter", "really", "very",
)
_FILLER_ES = (
    "el", "nosotros", "mi", "fue", "despues", "comiendo", "comida", "plato",
    "cena", "almuerzo", "aqui", "lugar", "restaurante", "servicio", "personal",
    "pedimos", "noche", "otra", "nunca", "volver", "mesa", "camarero",
    "realmente", "muy",
)
# loanwords, shared across both languages
_DISHES = ("pizza", "sushi", "taco", "ramen", "curry", "paella", "burger", "pasta")

_BANKS = {
    "en": {"sick": _SICK_EN, "praise": _PRAISE_EN, "filler": _FILLER_EN},
    "es": {"sick": _SICK_ES, "praise": _PRAISE_ES, "filler": _FILLER_ES},
}


def token_map_en_es() -> dict[str, str]:
    """English to Spanish token dictionary covering every bank entry."""
    mapping = {}
    for en, es in zip(_SICK_EN + _PRAISE_EN + _FILLER_EN, _SICK_ES + _PRAISE_ES + _FILLER_ES):
        mapping[en] = es
    for dish in _DISHES:
        mapping[dish] = dish
    return mapping


def _compose(rng: random.Random, lang: str, label: Label) -> str:
    banks = _BANKS[lang]
    topic = banks["sick"] if label is Label.SICK else banks["praise"]
    words = []
    words.extend(rng.sample(banks["filler"], rng.randint(4, 8)))
    words.extend(rng.sample(topic, rng.randint(2, 4)))
    words.append(rng.choice(_DISHES))
    rng.shuffle(words)
    return " ".join(words)


def _unique_texts(
    rng: random.Random, lang: str, labels: list[Label]
) -> list[str]:
    texts: list[str] = []
    seen: set[str] = set()
    for label in labels:
        for _ in range(1000):
            text = _compose(rng, lang, label)
            if text not in seen:
                break
        else:
            raise RuntimeError("could not generate enough unique texts")
        seen.add(text)
        texts.append(text)
    return texts


def bilingual_labeled(
    lang: str,
    n_sick: int,
    n_not_sick: int,
    seed: int,
    split: Split | str = Split.TRAIN,
    id_prefix: str = "",
) -> LabeledDataset:
    """Synthetic labeled reviews in one of the bilingual languages."""
    rng = random.Random(f"labeled:{lang}:{seed}")
    labels = [Label.SICK] * n_sick + [Label.NOT_SICK] * n_not_sick
    rng.shuffle(labels)
    texts = _unique_texts(rng, lang, labels)
    prefix = id_prefix or f"{lang}-{Split(split).value}"
    docs = tuple(
        Document(id=f"{prefix}-{i}", text=text, lang=lang, label=label)
        for i, (text, label) in enumerate(zip(texts, labels))
    )
    return LabeledDataset(docs=docs, split=Split(split), lang=lang)


def bilingual_pool(
    lang: str, size: int, seed: int, sick_fraction: float = 0.02, source: str = "synthetic"
) -> UnlabeledCorpus:
    """Unlabeled synthetic reviews; a small fraction reads like complaints,
    mirroring how rare real complaints are in review streams."""
    rng = random.Random(f"pool:{lang}:{seed}")
    n_sick = int(size * sick_fraction)
    labels = [Label.SICK] * n_sick + [Label.NOT_SICK] * (size - n_sick)
    rng.shuffle(labels)
    texts = _unique_texts(rng, lang, labels)
    docs = tuple(
        Document(id=f"{lang}-pool-{i}", text=text, lang=lang)
        for i, text in enumerate(texts)
    )
    return UnlabeledCorpus(docs=docs, lang=lang, source=source)


def pseudo_labeled(
    lang: str,
    n_sick: int,
    n_not_sick: int,
    split: Split | str = Split.TRAIN,
) -> LabeledDataset:
    """Cheap schema-valid documents for count arithmetic at full scale;
    texts are unique by construction."""
    docs = []
    for i in range(n_sick):
        docs.append(
            Document(
                id=f"{lang}-s{i}",
                text=f"{lang} complaint review number {i}",
                lang=lang,
                label=Label.SICK,
            )
        )
    for i in range(n_not_sick):
        docs.append(
            Document(
                id=f"{lang}-n{i}",
                text=f"{lang} ordinary review number {i}",
                lang=lang,
                label=Label.NOT_SICK,
            )
        )
    return LabeledDataset(docs=tuple(docs), split=Split(split), lang=lang)


def pseudo_pool(lang: str, size: int, source: str = "synthetic") -> UnlabeledCorpus:
    docs = tuple(
        Document(
            id=f"{lang}-p{i}",
            text=f"{lang} unlabeled review number {i}",
            lang=lang,
        )
        for i in range(size)
    )
    return UnlabeledCorpus(docs=docs, lang=lang, source=source)
