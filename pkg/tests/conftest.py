import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from sickscan.corpus import Document, Label, LabeledDataset, Split, UnlabeledCorpus  # noqa: E402

FIXTURES = ROOT / "fixtures"


def doc(i, text, lang="en", label=None, **kwargs):
    return Document(id=f"d{i}", text=text, lang=lang, label=label, **kwargs)


def labeled(pairs, lang="en", split=Split.TRAIN, id_prefix="d"):
    """pairs: list of (text, Label)"""
    docs = tuple(
        Document(id=f"{id_prefix}{i}", text=text, lang=lang, label=label)
        for i, (text, label) in enumerate(pairs)
    )
    return LabeledDataset(docs=docs, split=split, lang=lang)


def unlabeled(texts, lang="en", id_prefix="u", source=""):
    docs = tuple(
        Document(id=f"{id_prefix}{i}", text=text, lang=lang) for i, text in enumerate(texts)
    )
    return UnlabeledCorpus(docs=docs, lang=lang, source=source)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def toy_labeled():
    return labeled(
        [
            ("got sick after the chicken", Label.SICK),
            ("vomited all night long", Label.SICK),
            ("wonderful dinner and staff", Label.NOT_SICK),
            ("great pasta and service", Label.NOT_SICK),
            ("the dessert was lovely", Label.NOT_SICK),
        ]
    )
