"""Multilingual document collections with binary Sick / NotSick labels.

JSON Lines record schema (UTF-8, one object per line):

    {"id": str, "text": str, "lang": str?, "label": "Sick"|"NotSick"?,
     "source": str?, "provenance": {...}?}

Unknown keys are ignored with a warning. Text is NFC-normalized and
whitespace-trimmed at ingest; case is preserved (case folding belongs to
the feature pipeline). Exact (text, lang) duplicates are dropped at
ingest, first occurrence wins, so translated copies added later cannot
amplify train/test leakage.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import unicodedata
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Union

log = logging.getLogger(__name__)

LANG_CODE_RE = re.compile(r"^[a-z]{2}$")
UNDETERMINED = "und"

_RECORD_KEYS = ("id", "text", "lang", "label", "source", "provenance")


class CorpusError(Exception):
    """Base class for ingest and dataset construction failures."""


class MalformedRecord(CorpusError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class LabelMissing(CorpusError):
    def __init__(self, doc_id: str):
        super().__init__(f"record {doc_id!r} has no label but labels were expected")
        self.doc_id = doc_id


class DuplicateId(CorpusError):
    def __init__(self, doc_id: str):
        super().__init__(f"duplicate document id {doc_id!r}")
        self.doc_id = doc_id


class Label(str, Enum):
    SICK = "Sick"
    NOT_SICK = "NotSick"


class Split(str, Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


def valid_lang(code: str) -> bool:
    return code == UNDETERMINED or bool(LANG_CODE_RE.match(code))


def normalize_text(text: str) -> str:
    """NFC normalization plus whitespace trim; no case folding."""
    return unicodedata.normalize("NFC", text).strip()


@dataclass(frozen=True)
class Provenance:
    """Where a document came from: original, translated, or a pool sample
    assumed NotSick."""

    kind: str  # "original" | "translated" | "sampled-negative"
    translated_from: str | None = None
    provider: str | None = None

    @classmethod
    def original(cls) -> "Provenance":
        return cls(kind="original")

    @classmethod
    def translated(cls, from_lang: str, provider: str) -> "Provenance":
        return cls(kind="translated", translated_from=from_lang, provider=provider)

    @classmethod
    def sampled_negative(cls) -> "Provenance":
        return cls(kind="sampled-negative")

    def to_json(self) -> dict | None:
        if self.kind == "original":
            return None
        obj: dict = {"kind": self.kind}
        if self.kind == "translated":
            obj["from"] = self.translated_from
            obj["provider"] = self.provider
        return obj

    @classmethod
    def from_json(cls, obj: dict | None) -> "Provenance":
        if obj is None:
            return cls.original()
        kind = obj.get("kind")
        if kind == "original":
            return cls.original()
        if kind == "translated":
            return cls.translated(obj.get("from", UNDETERMINED), obj.get("provider", ""))
        if kind == "sampled-negative":
            return cls.sampled_negative()
        raise ValueError(f"unknown provenance kind {kind!r}")


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    lang: str
    label: Label | None = None
    provenance: Provenance = field(default_factory=Provenance.original)

    def __post_init__(self):
        if not self.id:
            raise ValueError("document id must be non-empty")
        if not self.text.strip():
            raise ValueError(f"document {self.id!r}: text empty after trimming")
        if not valid_lang(self.lang):
            raise ValueError(f"document {self.id!r}: bad language tag {self.lang!r}")
        if self.provenance.kind == "translated" and self.label is None:
            raise ValueError(
                f"document {self.id!r}: translated documents must carry a label"
            )


@dataclass(frozen=True)
class LabeledDataset:
    """A fully labeled document collection for one split and language."""

    docs: tuple[Document, ...]
    split: Split
    lang: str
    sick_count: int = field(init=False)
    not_sick_count: int = field(init=False)

    def __post_init__(self):
        ids = set()
        sick = 0
        for d in self.docs:
            if d.label is None:
                raise ValueError(f"document {d.id!r} in labeled dataset has no label")
            if d.id in ids:
                raise DuplicateId(d.id)
            ids.add(d.id)
            if d.label is Label.SICK:
                sick += 1
        object.__setattr__(self, "sick_count", sick)
        object.__setattr__(self, "not_sick_count", len(self.docs) - sick)

    def __len__(self) -> int:
        return len(self.docs)


@dataclass(frozen=True)
class UnlabeledCorpus:
    """Unlabeled documents in one language, e.g. reviews from one metro area."""

    docs: tuple[Document, ...]
    lang: str
    source: str = ""

    def __post_init__(self):
        ids = set()
        for d in self.docs:
            if d.label is not None:
                raise ValueError(f"document {d.id!r} in unlabeled corpus has a label")
            if d.id in ids:
                raise DuplicateId(d.id)
            ids.add(d.id)

    def __len__(self) -> int:
        return len(self.docs)


Dataset = Union[LabeledDataset, UnlabeledCorpus]


@dataclass(frozen=True)
class ClassCounts:
    total: int
    sick: int
    not_sick: int


@dataclass(frozen=True)
class DatasetStats:
    total: int
    sick: int
    not_sick: int
    per_language: dict[str, ClassCounts]

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "sick": self.sick,
            "not_sick": self.not_sick,
            "per_language": {
                lang: {"total": c.total, "sick": c.sick, "not_sick": c.not_sick}
                for lang, c in sorted(self.per_language.items())
            },
        }


def stats(dataset: Dataset) -> DatasetStats:
    per_lang: dict[str, list[int]] = {}
    sick = 0
    not_sick = 0
    for d in dataset.docs:
        bucket = per_lang.setdefault(d.lang, [0, 0, 0])
        bucket[0] += 1
        if d.label is Label.SICK:
            sick += 1
            bucket[1] += 1
        elif d.label is Label.NOT_SICK:
            not_sick += 1
            bucket[2] += 1
    return DatasetStats(
        total=len(dataset.docs),
        sick=sick,
        not_sick=not_sick,
        per_language={
            lang: ClassCounts(total=t, sick=s, not_sick=n)
            for lang, (t, s, n) in per_lang.items()
        },
    )


def _parse_record(obj: dict, line_no: int) -> Document:
    if not isinstance(obj, dict):
        raise MalformedRecord(line_no, "record is not a JSON object")
    unknown = set(obj) - set(_RECORD_KEYS)
    if unknown:
        log.warning("line %d: ignoring unknown keys %s", line_no, sorted(unknown))
    doc_id = obj.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        raise MalformedRecord(line_no, "missing or non-string 'id'")
    text = obj.get("text")
    if not isinstance(text, str):
        raise MalformedRecord(line_no, "missing or non-string 'text'")
    text = normalize_text(text)
    if not text:
        raise MalformedRecord(line_no, "text empty after trimming")
    lang = obj.get("lang", UNDETERMINED)
    if not isinstance(lang, str) or not valid_lang(lang):
        raise MalformedRecord(line_no, f"bad language tag {lang!r}")
    raw_label = obj.get("label")
    label: Label | None = None
    if raw_label is not None:
        try:
            label = Label(raw_label)
        except ValueError:
            raise MalformedRecord(line_no, f"bad label {raw_label!r}") from None
    try:
        provenance = Provenance.from_json(obj.get("provenance"))
    except ValueError as exc:
        raise MalformedRecord(line_no, str(exc)) from None
    try:
        return Document(id=doc_id, text=text, lang=lang, label=label, provenance=provenance)
    except ValueError as exc:
        raise MalformedRecord(line_no, str(exc)) from None


def parse_jsonl_records(lines: Iterable[str]) -> list[Document]:
    """Parse records without any dedup or labeling policy; blank lines skipped."""
    docs = []
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, f"invalid JSON ({exc.msg})") from None
        docs.append(_parse_record(obj, line_no))
    return docs


def ingest_jsonl(
    lines: Iterable[str],
    expect_labels: bool,
    *,
    split: Split | str = Split.TRAIN,
    lang: str | None = None,
    source: str = "",
) -> Dataset:
    """Parse a JSONL stream into a dataset.

    Duplicate ids are rejected; exact (text, lang) duplicates are dropped
    with a logged count, first occurrence wins. Input order is preserved.
    """
    docs: list[Document] = []
    seen_ids: set[str] = set()
    seen_texts: set[tuple[str, str]] = set()
    dropped = 0
    stripped_labels = 0
    record_source = ""
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, f"invalid JSON ({exc.msg})") from None
        doc = _parse_record(obj, line_no)
        if expect_labels and doc.label is None:
            raise LabelMissing(doc.id)
        if not expect_labels and doc.label is not None:
            doc = replace(doc, label=None)
            stripped_labels += 1
        if doc.id in seen_ids:
            raise DuplicateId(doc.id)
        key = (doc.text, doc.lang)
        if key in seen_texts:
            dropped += 1
            continue
        seen_ids.add(doc.id)
        seen_texts.add(key)
        if not record_source and isinstance(obj.get("source"), str):
            record_source = obj["source"]
        docs.append(doc)
    if dropped:
        log.info("dropped %d duplicate (text, lang) records", dropped)
    if stripped_labels:
        log.warning(
            "stripped labels from %d records ingested as unlabeled", stripped_labels
        )
    if lang is None:
        langs = {d.lang for d in docs}
        lang = langs.pop() if len(langs) == 1 else UNDETERMINED
    if expect_labels:
        return LabeledDataset(docs=tuple(docs), split=Split(split), lang=lang)
    return UnlabeledCorpus(docs=tuple(docs), lang=lang, source=source or record_source)


def record_to_json(doc: Document, *, source: str = "") -> dict:
    obj: dict = {"id": doc.id, "text": doc.text, "lang": doc.lang}
    if doc.label is not None:
        obj["label"] = doc.label.value
    if source:
        obj["source"] = source
    prov = doc.provenance.to_json()
    if prov is not None:
        obj["provenance"] = prov
    return obj


def serialize_jsonl(dataset: Dataset) -> str:
    source = dataset.source if isinstance(dataset, UnlabeledCorpus) else ""
    lines = [
        json.dumps(record_to_json(d, source=source), ensure_ascii=False)
        for d in dataset.docs
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def content_hash(payload: str | bytes) -> str:
    data = payload.encode("utf-8") if isinstance(payload, str) else payload
    return hashlib.sha256(data).hexdigest()


def dataset_hash(dataset: Dataset) -> str:
    return content_hash(serialize_jsonl(dataset))


def sidecar_path(path: Path) -> Path:
    return path.with_name(path.stem + ".stats.json")


def save_dataset(dataset: Dataset, path: Path | str) -> Path:
    """Write the dataset JSONL plus a sidecar stats file with a content hash."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = serialize_jsonl(dataset)
    path.write_text(payload, encoding="utf-8")
    sidecar = {
        "stats": stats(dataset).to_json(),
        "content_hash": content_hash(payload),
    }
    sidecar_path(path).write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return path


def load_labeled(
    path: Path | str, *, split: Split | str = Split.TRAIN, lang: str | None = None
) -> LabeledDataset:
    with open(path, encoding="utf-8") as fh:
        ds = ingest_jsonl(fh, expect_labels=True, split=split, lang=lang)
    assert isinstance(ds, LabeledDataset)
    return ds


def load_unlabeled(
    path: Path | str, *, lang: str | None = None, source: str = ""
) -> UnlabeledCorpus:
    with open(path, encoding="utf-8") as fh:
        ds = ingest_jsonl(fh, expect_labels=False, lang=lang, source=source)
    assert isinstance(ds, UnlabeledCorpus)
    return ds
