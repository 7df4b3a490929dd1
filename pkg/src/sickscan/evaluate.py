"""Confusion-matrix metrics, validation-based model selection, and result
tables across training configurations and test languages.

The Sick class is positive. Both the positive-class F1 (harmonic mean of
precision and recall) and the macro F1 (unweighted mean of the per-class
F1s) are computed and reported: published results for this task label
their F1 column "macro" while the printed values match the positive-class
harmonic mean, so comparisons against reference tables use f1_positive
and both numbers are always shown.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Sequence

from sickscan.corpus import Label

LANGUAGE_ORDER = ("en", "es", "zh", "fr", "de", "ja", "it")


class EvalError(Exception):
    pass


class IdMismatch(EvalError):
    pass


class EmptyEvaluation(EvalError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1_positive: float
    f1_macro: float


@dataclass(frozen=True)
class ResultRow:
    model_name: str
    train_config_label: str
    test_lang: str
    metrics: Metrics


def confusion(
    preds: Sequence[tuple[str, float]],
    labels: Sequence[tuple[str, Label]],
    threshold: float = 0.5,
) -> ConfusionMatrix:
    """Tally predictions against labels; Sick is predicted when
    p_sick >= threshold."""
    pred_ids = {doc_id for doc_id, _ in preds}
    label_map = dict(labels)
    if len(pred_ids) != len(preds) or len(label_map) != len(labels):
        raise IdMismatch("duplicate ids in predictions or labels")
    if pred_ids != set(label_map):
        missing = pred_ids.symmetric_difference(label_map)
        raise IdMismatch(f"prediction and label id sets differ: {sorted(missing)[:5]}")
    tp = fp = fn = tn = 0
    for doc_id, p in preds:
        predicted_sick = p >= threshold
        actually_sick = label_map[doc_id] is Label.SICK
        if predicted_sick and actually_sick:
            tp += 1
        elif predicted_sick:
            fp += 1
        elif actually_sick:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def metrics(cm: ConfusionMatrix) -> Metrics:
    """Accuracy, precision, recall, and both F1 variants; zero-denominator
    precision and recall are defined as 0."""
    if cm.total == 0:
        raise EmptyEvaluation("confusion matrix has no entries")
    precision = cm.tp / (cm.tp + cm.fp) if (cm.tp + cm.fp) else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if (cm.tp + cm.fn) else 0.0
    precision_neg = cm.tn / (cm.tn + cm.fn) if (cm.tn + cm.fn) else 0.0
    recall_neg = cm.tn / (cm.tn + cm.fp) if (cm.tn + cm.fp) else 0.0
    f1_pos = _f1(precision, recall)
    f1_neg = _f1(precision_neg, recall_neg)
    return Metrics(
        accuracy=(cm.tp + cm.tn) / cm.total,
        precision=precision,
        recall=recall,
        f1_positive=f1_pos,
        f1_macro=(f1_pos + f1_neg) / 2,
    )


def select_best(
    candidates: Sequence[tuple],
    validation,
    backend,
    threshold: float = 0.5,
):
    """Pick the candidate (config_id, model_ref) with the highest validation
    f1_positive; exact ties go to the lowest config_id."""
    if not candidates:
        raise ValueError("select_best needs at least one candidate")
    labels = [(d.id, d.label) for d in validation.docs]
    scored = []
    for config_id, model_ref in candidates:
        output = backend.predict(model_ref, list(validation.docs))
        cm = confusion(output.probs, labels, threshold)
        scored.append((metrics(cm).f1_positive, config_id))
    best_f1 = max(f1 for f1, _ in scored)
    return min(config_id for f1, config_id in scored if f1 == best_f1)


def percent(value: float) -> str:
    """Half-up rounding to one decimal, in percent (0.8374 -> '83.7')."""
    return str(
        (Decimal(repr(value)) * 100).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    )


def _ordered_rows(rows: Sequence[ResultRow]) -> list[ResultRow]:
    model_order: dict[str, int] = {}
    config_order: dict[str, int] = {}
    for row in rows:
        model_order.setdefault(row.model_name, len(model_order))
        config_order.setdefault(row.train_config_label, len(config_order))

    def lang_rank(lang: str) -> tuple[int, str]:
        if lang in LANGUAGE_ORDER:
            return (LANGUAGE_ORDER.index(lang), lang)
        return (len(LANGUAGE_ORDER), lang)

    return sorted(
        rows,
        key=lambda r: (
            model_order[r.model_name],
            config_order[r.train_config_label],
            lang_rank(r.test_lang),
        ),
    )


_CSV_FIELDS = (
    "model",
    "train_config",
    "test_lang",
    "accuracy",
    "precision",
    "recall",
    "f1_positive",
    "f1_macro",
)


def render_report(rows: Sequence[ResultRow], format: str = "markdown") -> str:
    """Render result rows with deterministic ordering: models in declaration
    order, languages in en, es, zh, fr, de, ja, it order."""
    ordered = _ordered_rows(rows)
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(_CSV_FIELDS)
        for r in ordered:
            m = r.metrics
            writer.writerow(
                [
                    r.model_name,
                    r.train_config_label,
                    r.test_lang,
                    f"{m.accuracy:.4f}",
                    f"{m.precision:.4f}",
                    f"{m.recall:.4f}",
                    f"{m.f1_positive:.4f}",
                    f"{m.f1_macro:.4f}",
                ]
            )
        return buf.getvalue()
    if format == "markdown":
        lines = [
            "| Model | Train | Test | Acc | Prec | Rec | F1 (pos) | F1 (macro) |",
            "|---|---|---|---|---|---|---|---|",
        ]
        for r in ordered:
            m = r.metrics
            lines.append(
                f"| {r.model_name} | {r.train_config_label} | {r.test_lang} "
                f"| {percent(m.accuracy)} | {percent(m.precision)} "
                f"| {percent(m.recall)} | {percent(m.f1_positive)} "
                f"| {percent(m.f1_macro)} |"
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {format!r}")


def parse_csv_report(text: str) -> list[ResultRow]:
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for rec in reader:
        rows.append(
            ResultRow(
                model_name=rec["model"],
                train_config_label=rec["train_config"],
                test_lang=rec["test_lang"],
                metrics=Metrics(
                    accuracy=float(rec["accuracy"]),
                    precision=float(rec["precision"]),
                    recall=float(rec["recall"]),
                    f1_positive=float(rec["f1_positive"]),
                    f1_macro=float(rec["f1_macro"]),
                ),
            )
        )
    return rows


@dataclass(frozen=True)
class ReferenceRow:
    """One transcribed row of the published per-language result tables;
    metric values are percentages."""

    table: str
    model: str
    train_config: str
    acc: float
    prec: float
    rec: float
    f1: float


def load_reference_tables(path: Path | str) -> list[ReferenceRow]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        filtered = (ln for ln in fh if not ln.startswith("#"))
        for rec in csv.DictReader(filtered):
            rows.append(
                ReferenceRow(
                    table=rec["table"],
                    model=rec["model"],
                    train_config=rec["train_config"],
                    acc=float(rec["acc"]),
                    prec=float(rec["prec"]),
                    rec=float(rec["rec"]),
                    f1=float(rec["f1"]),
                )
            )
    return rows
