"""Command-line entry point wiring the whole pipeline.

Subcommands: ingest, langid train|detect, translate, build-trainset,
train, evaluate, grid, scan, report. Exit code 0 on full success, 1 on
errors, 2 on partial translation failures (a failure report is written).
Identical config and inputs reproduce identical artifacts; timestamps
only ever land in log output, never in manifests.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from sickscan import backend as backend_mod
from sickscan import corpus, evaluate, langid
from sickscan import linear as linear_mod
from sickscan import translate as translate_mod
from sickscan import weaklabel
from sickscan.config import RunConfig, apply_overrides, load_run_config

log = logging.getLogger("sickscan")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL_FAILURES = 2


def _provider(cfg: RunConfig, pairs: list[tuple[str, str]] | None = None):
    kind = cfg.provider_kind
    if kind == "identity":
        return translate_mod.IdentityProvider()
    if kind == "reversing":
        return translate_mod.ReversingProvider()
    if kind == "token-map":
        tables = {}
        dict_dir = Path(cfg.dictionary_dir)
        for src, tgt in pairs or []:
            path = dict_dir / f"{src}_{tgt}.tsv"
            if not path.exists():
                raise FileNotFoundError(f"no token map {path}")
            provider = translate_mod.TokenMapProvider.from_tsv(path, src, tgt)
            tables.update(provider.tables)
        return translate_mod.TokenMapProvider(tables)
    if kind == "remote":
        profile = translate_mod.ProviderProfile(
            name="remote",
            endpoint=cfg.provider_endpoint,
            api_key_env=cfg.provider_api_key_env,
            requests_per_second=cfg.provider_rps,
        )
        return translate_mod.RemoteHTTPProvider(profile)
    raise ValueError(f"unknown provider kind {kind!r}")


def _backend(cfg: RunConfig):
    if cfg.backend_kind == "linear_local":
        return backend_mod.LinearLocalBackend(
            cfg.models_dir,
            train_config=cfg.train,
            tokenizer_config=cfg.tokenizer,
            min_df=cfg.min_df,
        )
    if cfg.backend_kind == "remote_encoder":
        return backend_mod.RemoteBackend(cfg.backend_endpoint)
    raise ValueError(f"unknown backend kind {cfg.backend_kind!r}")


def _load_config(args) -> RunConfig:
    cfg = load_run_config(getattr(args, "config", None))
    overrides = {
        key: getattr(args, key)
        for key in (
            "seed",
            "threshold",
            "target_lang",
            "config_label",
            "provider_kind",
            "dictionary_dir",
            "cache_dir",
            "models_dir",
            "reports_dir",
            "backend_kind",
            "backend_endpoint",
            "langid_model",
        )
        if hasattr(args, key)
    }
    return apply_overrides(cfg, **overrides)


def cmd_ingest(args) -> int:
    with open(args.input, encoding="utf-8") as fh:
        dataset = corpus.ingest_jsonl(
            fh,
            expect_labels=args.labeled,
            split=args.split,
            lang=args.lang,
            source=args.source or "",
        )
    corpus.save_dataset(dataset, args.out)
    st = corpus.stats(dataset)
    print(
        f"ingested {st.total} documents "
        f"(Sick {st.sick} / NotSick {st.not_sick}) -> {args.out}"
    )
    return EXIT_OK


def cmd_langid_train(args) -> int:
    corpora = langid.load_seed_corpora(args.seed_dir)
    model = langid.train_detector(corpora, alpha=args.alpha)
    langid.save_model(model, args.out)
    print(f"trained detector for {', '.join(model.languages)} -> {args.out}")
    return EXIT_OK


def cmd_langid_detect(args) -> int:
    model = langid.load_model(args.model)
    if args.text is not None:
        texts = [args.text]
    else:
        stream = open(args.input, encoding="utf-8") if args.input else sys.stdin
        with stream:
            texts = [line.strip() for line in stream if line.strip()]
    for text in texts:
        lang, confidence = langid.detect(model, text)
        print(f"{lang}\t{confidence:.4f}\t{text[:60]}")
    return EXIT_OK


def cmd_translate(args) -> int:
    cfg = _load_config(args)
    source_docs = corpus.parse_jsonl_records(
        Path(args.input).read_text(encoding="utf-8").splitlines()
    )
    pairs = sorted({(d.lang, args.tgt) for d in source_docs})
    provider = _provider(cfg, pairs)
    cache = translate_mod.DirectoryCache(cfg.cache_dir) if cfg.cache_dir else None
    batch = translate_mod.translate_batch(
        provider, source_docs, args.tgt, cache, parallelism=cfg.parallelism
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        for r in batch.records:
            fh.write(
                json.dumps(
                    {
                        "source_doc_id": r.source_doc_id,
                        "src": r.src,
                        "tgt": r.tgt,
                        "source_text": r.source_text,
                        "translated_text": r.translated_text,
                        "provider": r.provider,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    print(
        f"translated {len(batch.records)}/{len(source_docs)} documents "
        f"({batch.cache_hits} cache hits) -> {out}"
    )
    if batch.failures:
        report = translate_mod.write_failure_report(
            batch.failures, out.with_suffix(".failures.json")
        )
        print(f"{len(batch.failures)} failures written to {report}", file=sys.stderr)
        return EXIT_PARTIAL_FAILURES
    return EXIT_OK


def _build_assembly(cfg: RunConfig, label: str, target: str):
    source = corpus.load_labeled(
        cfg.labeled_source, split=corpus.Split.TRAIN, lang=cfg.source_lang
    )
    others = [lang for lang in cfg.languages if lang != cfg.source_lang]
    needed: list[str]
    if label == "EN_ONLY":
        needed = []
    elif label in ("T_ONLY", "EN_PLUS_T"):
        needed = [target]
    elif label == "ALL":
        needed = others
    elif label == "ALL_MINUS_T":
        needed = [lang for lang in others if lang != target]
    else:
        raise ValueError(f"unknown config label {label!r}")
    if label in ("T_ONLY", "EN_PLUS_T") and not target:
        raise ValueError(f"config label {label} requires a target language")

    provider = _provider(cfg, [(cfg.source_lang, lang) for lang in needed])
    cache = translate_mod.DirectoryCache(cfg.cache_dir) if cfg.cache_dir else None
    weak_sets = {}
    failures = 0
    for lang in needed:
        pool_path = cfg.pools.get(lang)
        if pool_path is None:
            raise ValueError(f"no unlabeled pool configured for language {lang!r}")
        pool = corpus.load_unlabeled(pool_path, lang=lang)
        ws = weaklabel.build_weak_set(
            source,
            pool,
            provider,
            lang,
            cfg.seed,
            cache=cache,
            parallelism=cfg.parallelism,
        )
        failures += len(ws.translation_failures)
        weak_sets[lang] = ws

    sources: list[tuple[str, object]] = []
    if label != "T_ONLY":
        sources.append((cfg.source_lang, source))
    sources.extend((lang, weak_sets[lang]) for lang in needed)
    assembly = weaklabel.assemble(sources, cfg.seed, label)
    return assembly, failures


def cmd_build_trainset(args) -> int:
    cfg = _load_config(args)
    label = cfg.config_label
    assembly, failures = _build_assembly(cfg, label, cfg.target_lang)
    weaklabel.save_assembly(assembly, args.out)
    print(
        f"assembled {len(assembly)} documents ({label}"
        + (f", target {cfg.target_lang}" if cfg.target_lang else "")
        + f") -> {args.out}"
    )
    if failures:
        print(f"{failures} translation failures recorded", file=sys.stderr)
        return EXIT_PARTIAL_FAILURES
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    assembly = weaklabel.load_assembly(args.trainset)
    validation = corpus.load_labeled(args.val, split=corpus.Split.VALIDATION)
    report = weaklabel.leakage_check(assembly, [validation])
    if not report.clean:
        print(
            f"leakage: {len(report.collisions)} (text, lang) collisions with the "
            "validation set; refusing to train",
            file=sys.stderr,
        )
        return EXIT_ERROR
    backend = _backend(cfg)
    model_ref = backend_mod.backend_train(backend, assembly, validation)
    if args.ref_out:
        Path(args.ref_out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.ref_out).write_text(
            json.dumps({"model_ref": model_ref}) + "\n", encoding="utf-8"
        )
    print(model_ref)
    return EXIT_OK


def _evaluate_model(cfg: RunConfig, backend, model_ref: str, test_path: str):
    test_set = corpus.load_labeled(test_path, split=corpus.Split.TEST)
    output = backend_mod.backend_predict(backend, model_ref, list(test_set.docs))
    labels = [(d.id, d.label) for d in test_set.docs]
    cm = evaluate.confusion(output.probs, labels, cfg.threshold)
    return evaluate.metrics(cm), test_set.lang


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    backend = _backend(cfg)
    m, test_lang = _evaluate_model(cfg, backend, args.model_ref, args.test)
    row = evaluate.ResultRow(
        model_name=cfg.model_name,
        train_config_label=args.train_label or cfg.config_label,
        test_lang=test_lang,
        metrics=m,
    )
    print(evaluate.render_report([row], "markdown"), end="")
    if args.rows_out:
        _append_row(Path(args.rows_out), row)
    return EXIT_OK


def _append_row(path: Path, row: evaluate.ResultRow) -> None:
    rows = []
    if path.exists():
        rows = json.loads(path.read_text(encoding="utf-8"))
    rows.append(
        {
            "model": row.model_name,
            "train_config": row.train_config_label,
            "test_lang": row.test_lang,
            "metrics": row.metrics.__dict__,
        }
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")


def _read_rows(path: Path) -> list[evaluate.ResultRow]:
    return [
        evaluate.ResultRow(
            model_name=r["model"],
            train_config_label=r["train_config"],
            test_lang=r["test_lang"],
            metrics=evaluate.Metrics(**r["metrics"]),
        )
        for r in json.loads(path.read_text(encoding="utf-8"))
    ]


def _write_reports(rows: list[evaluate.ResultRow], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "results.md").write_text(
        evaluate.render_report(rows, "markdown"), encoding="utf-8"
    )
    (out_dir / "results.csv").write_text(
        evaluate.render_report(rows, "csv"), encoding="utf-8"
    )


def cmd_grid(args) -> int:
    cfg = _load_config(args)
    backend = _backend(cfg)
    validation = corpus.load_labeled(cfg.validation, split=corpus.Split.VALIDATION)
    rows = []
    exit_code = EXIT_OK
    for label in cfg.grid_configs:
        for test_lang, test_path in sorted(cfg.tests.items()):
            target = test_lang if test_lang != cfg.source_lang else cfg.target_lang
            assembly, failures = _build_assembly(cfg, label, target)
            if failures:
                exit_code = EXIT_PARTIAL_FAILURES
            report = weaklabel.leakage_check(assembly, [validation])
            if not report.clean:
                print(
                    f"leakage in {label}/{test_lang}: "
                    f"{len(report.collisions)} collisions; skipping",
                    file=sys.stderr,
                )
                exit_code = EXIT_ERROR
                continue
            model_ref = backend_mod.backend_train(backend, assembly, validation)
            m, _ = _evaluate_model(cfg, backend, model_ref, test_path)
            rows.append(
                evaluate.ResultRow(
                    model_name=cfg.model_name,
                    train_config_label=label,
                    test_lang=test_lang,
                    metrics=m,
                )
            )
            log.info("grid cell %s/%s done: f1_pos=%.4f", label, test_lang, m.f1_positive)
    out_dir = Path(cfg.reports_dir) / args.run_id
    _write_reports(rows, out_dir)
    rows_path = out_dir / "rows.json"
    for row in rows:
        _append_row(rows_path, row)
    print(f"wrote {len(rows)} result rows to {out_dir}")
    return exit_code


def cmd_scan(args) -> int:
    cfg = _load_config(args)
    backend = _backend(cfg)
    scan_corpus = corpus.load_unlabeled(args.corpus)
    excluded: set[str] = set()
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        excluded = set(manifest.get("sampled_negative_ids", ()))
    detector = langid.load_model(cfg.langid_model) if cfg.langid_model else None

    quarantine = []
    candidates = []
    skipped = 0
    for doc in scan_corpus.docs:
        if doc.id in excluded:
            skipped += 1
            continue
        lang = doc.lang
        if lang == corpus.UNDETERMINED and detector is not None:
            lang, _ = langid.detect(detector, doc.text)
        if lang == corpus.UNDETERMINED:
            quarantine.append(doc)
        else:
            candidates.append((doc, lang))

    probs = []
    if candidates:
        docs = [doc for doc, _ in candidates]
        output = backend_mod.backend_predict(backend, args.model_ref, docs)
        lang_by_id = {doc.id: lang for doc, lang in candidates}
        text_by_id = {doc.id: doc.text for doc, _ in candidates}
        probs = [
            (doc_id, p, lang_by_id[doc_id], text_by_id[doc_id])
            for doc_id, p in output.probs
            if p >= cfg.threshold
        ]
        probs.sort(key=lambda item: (-item[1], item[0]))

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# Scan report", ""]
    lines.append(f"Flagged {len(probs)} of {len(scan_corpus.docs)} documents "
                 f"(threshold {cfg.threshold}, {skipped} excluded as training "
                 f"sampled negatives).")
    lines.append("")
    lines.append("| id | lang | p_sick | text |")
    lines.append("|---|---|---|---|")
    for doc_id, p, lang, text in probs:
        snippet = text[:80].replace("|", "\\|")
        lines.append(f"| {doc_id} | {lang} | {p:.4f} | {snippet} |")
    lines.append("")
    lines.append(f"## Quarantine (undetermined language): {len(quarantine)}")
    for doc in quarantine:
        lines.append(f"- {doc.id}: {doc.text[:80]}")
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")

    flagged_jsonl = out.with_suffix(".flagged.jsonl")
    with flagged_jsonl.open("w", encoding="utf-8") as fh:
        for doc_id, p, lang, text in probs:
            fh.write(
                json.dumps(
                    {"id": doc_id, "lang": lang, "p_sick": round(p, 6), "text": text},
                    ensure_ascii=False,
                )
                + "\n"
            )
    print(f"flagged {len(probs)} documents, {len(quarantine)} quarantined -> {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    rows = _read_rows(Path(args.rows))
    out_dir = Path(args.out_dir)
    _write_reports(rows, out_dir)
    print(f"wrote {out_dir / 'results.md'} and {out_dir / 'results.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sickscan",
        description="Multilingual foodborne-illness complaint detection pipeline.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and persist a JSONL dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--labeled", action="store_true")
    group.add_argument("--unlabeled", dest="labeled", action="store_false")
    p.add_argument("--split", default="train", choices=["train", "validation", "test"])
    p.add_argument("--lang", default=None)
    p.add_argument("--source", default=None, help="corpus source tag, e.g. a metro area")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("langid", help="language identification")
    lsub = p.add_subparsers(dest="langid_command", required=True)
    pt = lsub.add_parser("train", help="train the detector from seed corpora")
    pt.add_argument("--seed-dir", required=True)
    pt.add_argument("--alpha", type=float, default=0.5)
    pt.add_argument("--out", required=True)
    pt.set_defaults(func=cmd_langid_train)
    pd = lsub.add_parser("detect", help="detect the language of text")
    pd.add_argument("--model", required=True)
    pd.add_argument("--text", default=None)
    pd.add_argument("--input", default=None, help="file with one text per line")
    pd.set_defaults(func=cmd_langid_detect)

    p = sub.add_parser("translate", help="translate a JSONL document file")
    p.add_argument("--config", default=None)
    p.add_argument("--input", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--provider-kind", dest="provider_kind", default=None)
    p.add_argument("--dictionary-dir", dest="dictionary_dir", default=None)
    p.add_argument("--cache-dir", dest="cache_dir", default=None)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("build-trainset", help="build a weak-labeled training assembly")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config-label", dest="config_label", default=None)
    p.add_argument("--target-lang", dest="target_lang", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_build_trainset)

    p = sub.add_parser("train", help="train a classifier on an assembly")
    p.add_argument("--config", required=True)
    p.add_argument("--trainset", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--ref-out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a trained model on a test set")
    p.add_argument("--config", required=True)
    p.add_argument("--model-ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--train-label", default=None)
    p.add_argument("--rows-out", default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grid", help="train and evaluate the config x language matrix")
    p.add_argument("--config", required=True)
    p.add_argument("--run-id", default="run")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("scan", help="scan an unlabeled corpus for complaints")
    p.add_argument("--config", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--model-ref", required=True)
    p.add_argument("--manifest", default=None,
                   help="assembly manifest; its sampled negatives are excluded")
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--langid-model", dest="langid_model", default=None,
                   help="detector used to route documents tagged 'und'")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("report", help="render stored result rows")
    p.add_argument("--rows", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (
        corpus.CorpusError,
        langid.LangIdError,
        translate_mod.TranslateError,
        weaklabel.WeakLabelError,
        backend_mod.BackendError,
        evaluate.EvalError,
        FileNotFoundError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
