#!/usr/bin/env python3
"""Desk-scale cross-lingual transfer experiment.

Trains the linear classifier under EN_ONLY, T_ONLY, and EN_PLUS_T
configurations on the shipped synthetic bilingual corpus (token-map mock
translator) and evaluates each on the synthetic Spanish test set. The
expected outcome: training jointly on English plus translated Spanish
beats English-only training on the Spanish test set.

Usage: python scripts/run_desk_experiment.py [--out reports/desk]
"""

import argparse
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from sickscan.corpus import Split, load_labeled, load_unlabeled  # noqa: E402
from sickscan.evaluate import ResultRow, confusion, metrics, render_report  # noqa: E402
from sickscan.features import TokenizerConfig, fit_vectorizer, vectorize_doc  # noqa: E402
from sickscan.linear import TrainConfig, predict_proba, train  # noqa: E402
from sickscan.translate import MemoryCache, TokenMapProvider  # noqa: E402
from sickscan.weaklabel import assemble, build_weak_set, leakage_check  # noqa: E402

SEED = 13


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="reports/desk")
    parser.add_argument("--seed", type=int, default=SEED)
    args = parser.parse_args()

    fixtures = ROOT / "fixtures"
    en_train = load_labeled(fixtures / "synthetic/en_train.jsonl", split=Split.TRAIN)
    en_val = load_labeled(fixtures / "synthetic/en_val.jsonl", split=Split.VALIDATION)
    es_pool = load_unlabeled(fixtures / "synthetic/es_pool.jsonl", lang="es")
    es_test = load_labeled(fixtures / "synthetic/es_test.jsonl", split=Split.TEST)

    provider = TokenMapProvider.from_tsv(
        fixtures / "dictionaries/en_es.tsv", "en", "es"
    )
    started = time.time()
    weak_es = build_weak_set(
        en_train, es_pool, provider, "es", seed=args.seed, cache=MemoryCache()
    )
    print(
        f"weak Spanish set: {len(weak_es)} docs "
        f"({weak_es.origin_counts.translated_sick} translated Sick, "
        f"{weak_es.origin_counts.translated_not_sick} translated NotSick, "
        f"{weak_es.origin_counts.sampled_negatives} sampled negatives)"
    )

    assemblies = {
        "EN_ONLY": assemble([("en", en_train)], args.seed, "EN_ONLY"),
        "T_ONLY": assemble([("es", weak_es)], args.seed, "T_ONLY"),
        "EN_PLUS_T": assemble(
            [("en", en_train), ("es", weak_es)], args.seed, "EN_PLUS_T"
        ),
    }

    rows = []
    scores = {}
    for label, assembly in assemblies.items():
        report = leakage_check(assembly, [en_val, es_test])
        if not report.clean:
            print(f"leakage under {label}: {len(report.collisions)}", file=sys.stderr)
            return 1
        vectorizer = fit_vectorizer(assembly.docs, TokenizerConfig(), min_df=2)
        model = train(assembly, en_val, vectorizer, TrainConfig(seed=args.seed))
        preds = [
            (d.id, predict_proba(model, vectorize_doc(vectorizer, d)))
            for d in es_test.docs
        ]
        labels = [(d.id, d.label) for d in es_test.docs]
        m = metrics(confusion(preds, labels, threshold=0.5))
        scores[label] = m.f1_positive
        rows.append(
            ResultRow(
                model_name="LogReg",
                train_config_label=label,
                test_lang="es",
                metrics=m,
            )
        )
        print(
            f"{label:10s} es-test f1_pos={m.f1_positive:.4f} "
            f"acc={m.accuracy:.4f} prec={m.precision:.4f} rec={m.recall:.4f}"
        )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "results.md").write_text(render_report(rows, "markdown"), encoding="utf-8")
    (out_dir / "results.csv").write_text(render_report(rows, "csv"), encoding="utf-8")
    print(f"wrote {out_dir / 'results.md'} ({time.time() - started:.1f}s)")

    if scores["EN_PLUS_T"] >= scores["EN_ONLY"]:
        print("joint training on source plus target beats source-only: confirmed")
        return 0
    print("unexpected: EN_PLUS_T did not reach EN_ONLY", file=sys.stderr)
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
