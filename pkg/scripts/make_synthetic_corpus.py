#!/usr/bin/env python3
"""Regenerate the shipped synthetic bilingual corpus and token dictionary.

Writes fixtures/synthetic/{en_train,en_val,es_pool,es_test}.jsonl (2,000
documents total) and fixtures/dictionaries/en_es.tsv. Generation is fully
seeded; rerunning reproduces the shipped files byte for byte. The script
refuses to write if any (text, lang) pair collides across sets, which
would leak training text into evaluation.
"""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from sickscan.corpus import Split, save_dataset, stats  # noqa: E402
from sickscan.synth import (  # noqa: E402
    bilingual_labeled,
    bilingual_pool,
    token_map_en_es,
)

SEED = 20200219


def main() -> int:
    out_dir = ROOT / "fixtures" / "synthetic"
    dict_dir = ROOT / "fixtures" / "dictionaries"
    out_dir.mkdir(parents=True, exist_ok=True)
    dict_dir.mkdir(parents=True, exist_ok=True)

    en_train = bilingual_labeled("en", 300, 700, seed=SEED, split=Split.TRAIN)
    en_val = bilingual_labeled("en", 45, 105, seed=SEED + 1, split=Split.VALIDATION)
    es_pool = bilingual_pool("es", 450, seed=SEED + 2)
    es_test = bilingual_labeled("es", 120, 280, seed=SEED + 3, split=Split.TEST)

    sets = {
        "en_train": en_train,
        "en_val": en_val,
        "es_pool": es_pool,
        "es_test": es_test,
    }
    seen: dict[tuple[str, str], str] = {}
    for name, dataset in sets.items():
        for doc in dataset.docs:
            key = (doc.text, doc.lang)
            if key in seen:
                print(f"collision: {name} and {seen[key]} share {key!r}", file=sys.stderr)
                return 1
            seen[key] = name

    total = 0
    for name, dataset in sets.items():
        path = save_dataset(dataset, out_dir / f"{name}.jsonl")
        st = stats(dataset)
        total += st.total
        print(f"{path}: {st.total} docs (Sick {st.sick} / NotSick {st.not_sick})")
    print(f"total documents: {total}")

    mapping = token_map_en_es()
    tsv = "".join(f"{en}\t{es}\n" for en, es in sorted(mapping.items()))
    (dict_dir / "en_es.tsv").write_text(tsv, encoding="utf-8")
    print(f"{dict_dir / 'en_es.tsv'}: {len(mapping)} entries")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
