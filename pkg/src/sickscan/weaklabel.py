"""Weakly labeled target-language datasets and multi-source training sets.

A weak set for target language T mirrors the labeled source exactly:
every Sick document is translated to T and keeps its label, an equal
number of NotSick documents is sampled (seeded, without replacement) and
translated, and the NotSick balance is topped up by sampling unlabeled
target documents that are assumed NotSick because complaints are rare.
The NotSick total therefore equals the source's, and so does the overall
size. Assemblies concatenate any number of such sets (plus the labeled
source) and apply one seeded Fisher-Yates shuffle.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence, Union

from sickscan.corpus import (
    Document,
    DuplicateId,
    Label,
    LabeledDataset,
    Provenance,
    UnlabeledCorpus,
    content_hash,
    parse_jsonl_records,
    record_to_json,
)
from sickscan.translate import (
    TranslationFailure,
    TranslationFailures,
    TranslationProvider,
    translate_batch,
)

log = logging.getLogger(__name__)


class WeakLabelError(Exception):
    pass


class PoolTooSmall(WeakLabelError):
    def __init__(self, needed: int, available: int):
        super().__init__(f"pool has {available} documents, {needed} needed")
        self.needed = needed
        self.available = available


class LeakageDetected(WeakLabelError):
    pass


class ConfigLabel(str, Enum):
    EN_ONLY = "EN_ONLY"
    T_ONLY = "T_ONLY"
    EN_PLUS_T = "EN_PLUS_T"
    ALL = "ALL"
    ALL_MINUS_T = "ALL_MINUS_T"


@dataclass(frozen=True)
class OriginCounts:
    translated_sick: int
    translated_not_sick: int
    sampled_negatives: int
    pool_shortfall: int = 0

    def to_json(self) -> dict:
        return {
            "translated_sick": self.translated_sick,
            "translated_not_sick": self.translated_not_sick,
            "sampled_negatives": self.sampled_negatives,
            "pool_shortfall": self.pool_shortfall,
        }


@dataclass(frozen=True)
class WeakLabeledDataset:
    lang: str
    docs: tuple[Document, ...]
    origin_counts: OriginCounts
    seed: int
    sampled_negative_ids: tuple[str, ...] = ()
    translation_failures: tuple[TranslationFailure, ...] = ()

    def __post_init__(self):
        ids = set()
        t_sick = t_not_sick = sampled = 0
        for d in self.docs:
            if d.id in ids:
                raise DuplicateId(d.id)
            ids.add(d.id)
            if d.provenance.kind == "translated":
                if d.label is Label.SICK:
                    t_sick += 1
                else:
                    t_not_sick += 1
            elif d.provenance.kind == "sampled-negative":
                if d.label is not Label.NOT_SICK:
                    raise ValueError(f"sampled negative {d.id!r} is not NotSick")
                sampled += 1
            else:
                raise ValueError(
                    f"document {d.id!r} has provenance {d.provenance.kind!r}; "
                    "weak sets contain only translated or sampled-negative docs"
                )
        got = OriginCounts(t_sick, t_not_sick, sampled, self.origin_counts.pool_shortfall)
        if got != self.origin_counts:
            raise ValueError(f"origin counts {self.origin_counts} do not match docs {got}")

    def __len__(self) -> int:
        return len(self.docs)

    @property
    def sick_count(self) -> int:
        return self.origin_counts.translated_sick

    @property
    def not_sick_count(self) -> int:
        return self.origin_counts.translated_not_sick + self.origin_counts.sampled_negatives


SourceDataset = Union[LabeledDataset, WeakLabeledDataset]


def build_weak_set(
    source: LabeledDataset,
    target_pool: UnlabeledCorpus,
    provider: TranslationProvider,
    tgt: str,
    seed: int,
    *,
    cache=None,
    parallelism: int = 4,
    allow_partial_failures: bool = True,
    strict_pool: bool = False,
) -> WeakLabeledDataset:
    """Construct the weak set for ``tgt`` from a labeled source and a pool.

    With s Sick and n NotSick source documents: all s Sick docs are
    translated, min(s, n) NotSick docs are sampled and translated, and
    max(0, n - min(s, n)) pool docs are sampled as assumed negatives, so
    the class counts match the source exactly. When the pool is too small
    the entire pool is taken and the shortfall recorded (or PoolTooSmall
    raised under ``strict_pool``). Sampled pool ids are returned for later
    leakage exclusion when scanning the same pool.
    """
    if tgt == source.lang:
        raise ValueError("target language must differ from the source language")
    if target_pool.lang != tgt:
        raise ValueError(
            f"pool language {target_pool.lang!r} does not match target {tgt!r}"
        )

    sick_docs = [d for d in source.docs if d.label is Label.SICK]
    not_sick_docs = [d for d in source.docs if d.label is Label.NOT_SICK]
    s, n = len(sick_docs), len(not_sick_docs)

    rng = random.Random(seed)
    k_translate = min(s, n)
    negatives_to_translate = rng.sample(not_sick_docs, k_translate)
    needed = max(0, n - k_translate)
    available = len(target_pool.docs)
    shortfall = 0
    if needed > available:
        if strict_pool:
            raise PoolTooSmall(needed, available)
        shortfall = needed - available
        log.warning(
            "pool for %s has %d documents, %d needed; taking all and recording "
            "a shortfall of %d",
            tgt,
            available,
            needed,
            shortfall,
        )
        needed = available
    sampled_pool = rng.sample(list(target_pool.docs), needed)

    to_translate = sick_docs + negatives_to_translate
    batch = translate_batch(
        provider,
        to_translate,
        tgt,
        cache,
        parallelism=parallelism,
        partial_failures=allow_partial_failures,
    )
    if batch.failures and not allow_partial_failures:
        raise TranslationFailures(batch.failures)

    translated_by_id = {r.source_doc_id: r for r in batch.records}
    docs: list[Document] = []
    for src_doc in to_translate:
        record = translated_by_id.get(src_doc.id)
        if record is None:
            continue  # failed translation, reported in batch.failures
        docs.append(
            Document(
                id=src_doc.id,
                text=record.translated_text,
                lang=tgt,
                label=src_doc.label,
                provenance=Provenance.translated(source.lang, provider.name),
            )
        )
    translated_ids = {d.id for d in docs}
    t_sick = sum(1 for d in sick_docs if d.id in translated_ids)
    t_not_sick = len(docs) - t_sick

    sampled_ids = []
    for pool_doc in sampled_pool:
        docs.append(
            Document(
                id=pool_doc.id,
                text=pool_doc.text,
                lang=tgt,
                label=Label.NOT_SICK,
                provenance=Provenance.sampled_negative(),
            )
        )
        sampled_ids.append(pool_doc.id)

    return WeakLabeledDataset(
        lang=tgt,
        docs=tuple(docs),
        origin_counts=OriginCounts(
            translated_sick=t_sick,
            translated_not_sick=t_not_sick,
            sampled_negatives=len(sampled_ids),
            pool_shortfall=shortfall,
        ),
        seed=seed,
        sampled_negative_ids=tuple(sampled_ids),
        translation_failures=tuple(batch.failures),
    )


@dataclass(frozen=True)
class TrainingAssembly:
    """Concatenated, seeded-shuffled multi-language training set."""

    sources: tuple[tuple[str, str], ...]  # (language, content hash)
    docs: tuple[Document, ...]
    seed: int
    config_label: ConfigLabel
    sampled_negative_ids: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.docs)


def _source_hash(dataset: SourceDataset) -> str:
    lines = [json.dumps(record_to_json(d), ensure_ascii=False) for d in dataset.docs]
    return content_hash("\n".join(lines))


def assemble(
    sources: Sequence[tuple[str, SourceDataset]],
    seed: int,
    config_label: ConfigLabel | str,
) -> TrainingAssembly:
    """Concatenate sources, namespace ids as ``<lang>:<id>``, and apply one
    seeded Fisher-Yates shuffle. The shuffled multiset always equals the
    concatenation; identical (sources, seed) give identical order.
    """
    if not sources:
        raise ValueError("assemble needs at least one source dataset")
    docs: list[Document] = []
    seen: set[str] = set()
    refs: list[tuple[str, str]] = []
    sampled_ids: list[str] = []
    for lang, dataset in sources:
        refs.append((lang, _source_hash(dataset)))
        if isinstance(dataset, WeakLabeledDataset):
            sampled_ids.extend(dataset.sampled_negative_ids)
        for d in dataset.docs:
            namespaced = f"{lang}:{d.id}"
            if namespaced in seen:
                raise DuplicateId(namespaced)
            seen.add(namespaced)
            docs.append(replace(d, id=namespaced))
    rng = random.Random(seed)
    rng.shuffle(docs)
    return TrainingAssembly(
        sources=tuple(refs),
        docs=tuple(docs),
        seed=seed,
        config_label=ConfigLabel(config_label),
        sampled_negative_ids=tuple(sampled_ids),
    )


@dataclass(frozen=True)
class Collision:
    text: str
    lang: str
    train_ids: tuple[str, ...]
    eval_ids: tuple[str, ...]
    eval_split: str


@dataclass(frozen=True)
class LeakageReport:
    collisions: tuple[Collision, ...]

    @property
    def clean(self) -> bool:
        return not self.collisions

    def to_json(self) -> list[dict]:
        return [
            {
                "text": c.text,
                "lang": c.lang,
                "train_ids": list(c.train_ids),
                "eval_ids": list(c.eval_ids),
                "eval_split": c.eval_split,
            }
            for c in self.collisions
        ]


def leakage_check(
    assembly: TrainingAssembly, eval_sets: Sequence[LabeledDataset]
) -> LeakageReport:
    """Report every (text, lang) pair shared between the assembly and any
    evaluation set. Report-only; the training entry points require a clean
    report before fitting."""
    train_index: dict[tuple[str, str], list[str]] = {}
    for d in assembly.docs:
        train_index.setdefault((d.text, d.lang), []).append(d.id)
    collisions = []
    for eval_set in eval_sets:
        for d in eval_set.docs:
            hit = train_index.get((d.text, d.lang))
            if hit:
                collisions.append(
                    Collision(
                        text=d.text,
                        lang=d.lang,
                        train_ids=tuple(hit),
                        eval_ids=(d.id,),
                        eval_split=eval_set.split.value,
                    )
                )
    return LeakageReport(collisions=tuple(collisions))


def serialize_docs_jsonl(docs: Sequence[Document]) -> str:
    lines = [json.dumps(record_to_json(d), ensure_ascii=False) for d in docs]
    return "\n".join(lines) + ("\n" if lines else "")


def save_weak_set(ws: WeakLabeledDataset, path: Path | str) -> Path:
    """Write docs as JSONL plus a manifest JSON next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = serialize_docs_jsonl(ws.docs)
    path.write_text(payload, encoding="utf-8")
    manifest = {
        "kind": "weak_labeled_dataset",
        "lang": ws.lang,
        "seed": ws.seed,
        "origin_counts": ws.origin_counts.to_json(),
        "sampled_negative_ids": list(ws.sampled_negative_ids),
        "translation_failures": [
            {"doc_id": f.doc_id, "error": f.error, "attempts": f.attempts}
            for f in ws.translation_failures
        ],
        "content_hash": content_hash(payload),
    }
    manifest_path(path).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return path


def manifest_path(path: Path | str) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".manifest.json")


def save_assembly(assembly: TrainingAssembly, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = serialize_docs_jsonl(assembly.docs)
    path.write_text(payload, encoding="utf-8")
    manifest = {
        "kind": "training_assembly",
        "config_label": assembly.config_label.value,
        "seed": assembly.seed,
        "sources": [{"lang": lang, "hash": h} for lang, h in assembly.sources],
        "sampled_negative_ids": list(assembly.sampled_negative_ids),
        "size": len(assembly.docs),
        "content_hash": content_hash(payload),
    }
    manifest_path(path).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return path


def load_assembly(path: Path | str) -> TrainingAssembly:
    path = Path(path)
    manifest = json.loads(manifest_path(path).read_text(encoding="utf-8"))
    with open(path, encoding="utf-8") as fh:
        docs = parse_jsonl_records(fh)
    return TrainingAssembly(
        sources=tuple((s["lang"], s["hash"]) for s in manifest["sources"]),
        docs=tuple(docs),
        seed=int(manifest["seed"]),
        config_label=ConfigLabel(manifest["config_label"]),
        sampled_negative_ids=tuple(manifest.get("sampled_negative_ids", ())),
    )


def load_weak_set(path: Path | str) -> WeakLabeledDataset:
    path = Path(path)
    manifest = json.loads(manifest_path(path).read_text(encoding="utf-8"))
    with open(path, encoding="utf-8") as fh:
        docs = parse_jsonl_records(fh)
    counts = manifest["origin_counts"]
    return WeakLabeledDataset(
        lang=manifest["lang"],
        docs=tuple(docs),
        origin_counts=OriginCounts(
            translated_sick=counts["translated_sick"],
            translated_not_sick=counts["translated_not_sick"],
            sampled_negatives=counts["sampled_negatives"],
            pool_shortfall=counts.get("pool_shortfall", 0),
        ),
        seed=int(manifest["seed"]),
        sampled_negative_ids=tuple(manifest.get("sampled_negative_ids", ())),
        translation_failures=tuple(
            TranslationFailure(f["doc_id"], f["error"], f["attempts"])
            for f in manifest.get("translation_failures", ())
        ),
    )
