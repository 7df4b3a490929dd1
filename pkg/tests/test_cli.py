import json
from pathlib import Path

import pytest

from sickscan.cli import main

from conftest import FIXTURES


def write_config(tmp_path: Path, **extra) -> Path:
    lines = [
        "[paths]",
        f'cache_dir = "{tmp_path / "cache"}"',
        f'models_dir = "{tmp_path / "artifacts"}"',
        f'reports_dir = "{tmp_path / "reports"}"',
        f'labeled_source = "{FIXTURES / "synthetic/en_train.jsonl"}"',
        f'validation = "{FIXTURES / "synthetic/en_val.jsonl"}"',
        "[paths.pools]",
        f'es = "{FIXTURES / "synthetic/es_pool.jsonl"}"',
        "[paths.tests]",
        f'es = "{FIXTURES / "synthetic/es_test.jsonl"}"',
        "[run]",
        "seed = 13",
        'source_lang = "en"',
        'languages = ["en", "es"]',
        'target_lang = "es"',
        'config_label = "EN_PLUS_T"',
        "threshold = 0.5",
        'grid_configs = ["EN_ONLY", "EN_PLUS_T"]',
        "[provider]",
        'kind = "token-map"',
        f'dictionary_dir = "{FIXTURES / "dictionaries"}"',
        "[train]",
        "max_epochs = 50",
        "patience = 5",
    ]
    for key, value in extra.items():
        lines.append(f"{key} = {value}")
    path = tmp_path / "run.toml"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_ingest_roundtrip(tmp_path, capsys):
    out = tmp_path / "train.jsonl"
    code = main(
        [
            "ingest",
            "--input", str(FIXTURES / "synthetic/en_train.jsonl"),
            "--labeled",
            "--split", "train",
            "--out", str(out),
        ]
    )
    assert code == 0
    assert "1000 documents" in capsys.readouterr().out
    assert out.exists()
    assert (tmp_path / "train.stats.json").exists()


def test_ingest_rejects_bad_file(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "a", "text": "x", "label": "Maybe"}\n', encoding="utf-8")
    code = main(["ingest", "--input", str(bad), "--labeled", "--out", str(tmp_path / "o.jsonl")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_langid_train_and_detect(tmp_path, capsys):
    model_path = tmp_path / "langid.json"
    assert main(
        ["langid", "train", "--seed-dir", str(FIXTURES / "langid_seed"), "--out", str(model_path)]
    ) == 0
    capsys.readouterr()
    assert main(
        ["langid", "detect", "--model", str(model_path),
         "--text", "nos intoxicamos con los mariscos y pasamos la noche enfermos"]
    ) == 0
    out = capsys.readouterr().out
    assert out.startswith("es\t")


def test_translate_with_cache(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "records.jsonl"
    code = main(
        [
            "translate",
            "--config", str(cfg),
            "--input", str(FIXTURES / "synthetic/en_val.jsonl"),
            "--tgt", "es",
            "--out", str(out),
        ]
    )
    assert code == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 150
    record = json.loads(lines[0])
    assert record["tgt"] == "es" and record["provider"] == "mock-token-map"
    # second run is fully cached
    capsys.readouterr()
    assert main(
        ["translate", "--config", str(cfg),
         "--input", str(FIXTURES / "synthetic/en_val.jsonl"),
         "--tgt", "es", "--out", str(out)]
    ) == 0
    assert "150 cache hits" in capsys.readouterr().out


def test_translate_partial_failures_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path)
    docs = tmp_path / "docs.jsonl"
    docs.write_text(
        '{"id": "a", "text": "hello there friend", "lang": "en"}\n', encoding="utf-8"
    )
    code = main(
        [
            "translate",
            "--config", str(cfg),
            "--input", str(docs),
            "--tgt", "de",  # no en_de.tsv dictionary
            "--out", str(tmp_path / "r.jsonl"),
            "--provider-kind", "remote",
        ]
    )
    # remote provider with no endpooint configured: every doc fails, report written
    assert code == 2
    assert (tmp_path / "r.failures.json").exists()


def flow(tmp_path):
    """build-trainset -> train; returns (config path, assembly path, model_ref)."""
    cfg = write_config(tmp_path)
    assembly_path = tmp_path / "assembly.jsonl"
    assert main(["build-trainset", "--config", str(cfg), "--out", str(assembly_path)]) == 0
    ref_file = tmp_path / "model_ref.json"
    assert main(
        ["train", "--config", str(cfg), "--trainset", str(assembly_path),
         "--val", str(FIXTURES / "synthetic/en_val.jsonl"), "--ref-out", str(ref_file)]
    ) == 0
    model_ref = json.loads(ref_file.read_text(encoding="utf-8"))["model_ref"]
    return cfg, assembly_path, model_ref


def test_build_trainset_en_plus_t(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "assembly.jsonl"
    assert main(["build-trainset", "--config", str(cfg), "--out", str(out)]) == 0
    assert "assembled 2000 documents" in capsys.readouterr().out
    manifest = json.loads((tmp_path / "assembly.manifest.json").read_text())
    assert manifest["config_label"] == "EN_PLUS_T"
    assert manifest["size"] == 2000
    assert len(manifest["sampled_negative_ids"]) == 400
    assert {s["lang"] for s in manifest["sources"]} == {"en", "es"}


def test_build_trainset_en_only_size(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "en_only.jsonl"
    assert main(
        ["build-trainset", "--config", str(cfg), "--out", str(out),
         "--config-label", "EN_ONLY"]
    ) == 0
    assert len(out.read_text(encoding="utf-8").splitlines()) == 1000


def test_build_trainset_all_minus_t_excludes_target(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "minus.jsonl"
    assert main(
        ["build-trainset", "--config", str(cfg), "--out", str(out),
         "--config-label", "ALL_MINUS_T", "--target-lang", "es"]
    ) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    # languages are [en, es]; holding out es leaves the English source only
    assert len(lines) == 1000
    assert all(json.loads(line)["lang"] != "es" for line in lines)
    manifest = json.loads((tmp_path / "minus.manifest.json").read_text())
    assert manifest["config_label"] == "ALL_MINUS_T"


def test_build_trainset_reproducible_bytes(tmp_path):
    cfg = write_config(tmp_path)
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    assert main(["build-trainset", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["build-trainset", "--config", str(cfg), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.manifest.json").read_bytes() == (tmp_path / "b.manifest.json").read_bytes()


def test_train_evaluate_scan_chain(tmp_path, capsys):
    cfg, assembly_path, model_ref = flow(tmp_path)
    capsys.readouterr()

    rows_out = tmp_path / "rows.json"
    assert main(
        ["evaluate", "--config", str(cfg), "--model-ref", model_ref,
         "--test", str(FIXTURES / "synthetic/es_test.jsonl"),
         "--rows-out", str(rows_out)]
    ) == 0
    table = capsys.readouterr().out
    assert "| LogReg | EN_PLUS_T | es |" in table
    assert rows_out.exists()

    # language detector for routing und docs
    langid_model = tmp_path / "langid.json"
    assert main(
        ["langid", "train", "--seed-dir", str(FIXTURES / "langid_seed"),
         "--out", str(langid_model)]
    ) == 0
    capsys.readouterr()

    report = tmp_path / "scan.md"
    assert main(
        ["scan", "--config", str(cfg), "--corpus", str(FIXTURES / "scan_demo.jsonl"),
         "--model-ref", model_ref, "--out", str(report),
         "--manifest", str(tmp_path / "assembly.manifest.json"),
         "--langid-model", str(langid_model)]
    ) == 0
    text = report.read_text(encoding="utf-8")
    flagged = [
        json.loads(line)
        for line in (tmp_path / "scan.flagged.jsonl").read_text().splitlines()
    ]
    flagged_ids = {r["id"] for r in flagged}
    assert {"demo-es-1", "demo-es-2"} <= flagged_ids  # authored complaints caught
    assert "demo-es-3" not in flagged_ids  # praise review not flagged
    assert "demo-und-2" in text.split("Quarantine")[1]  # gibberish quarantined
    assert "demo-und-1" not in text.split("Quarantine")[1]  # detector routed it to es
    # probabilities sorted descending
    probs = [r["p_sick"] for r in flagged]
    assert probs == sorted(probs, reverse=True)


def test_scan_excludes_sampled_negatives(tmp_path, capsys):
    cfg, assembly_path, model_ref = flow(tmp_path)
    manifest = json.loads((tmp_path / "assembly.manifest.json").read_text())
    sampled = set(manifest["sampled_negative_ids"])
    assert len(sampled) == 400
    report = tmp_path / "pool_scan.md"
    assert main(
        ["scan", "--config", str(cfg), "--corpus", str(FIXTURES / "synthetic/es_pool.jsonl"),
         "--model-ref", model_ref, "--out", str(report),
         "--manifest", str(tmp_path / "assembly.manifest.json"),
         "--threshold", "0.0"]
    ) == 0
    emitted = {
        json.loads(line)["id"]
        for line in (tmp_path / "pool_scan.flagged.jsonl").read_text().splitlines()
    }
    assert emitted  # threshold 0 emits every non-excluded doc
    assert not emitted & sampled


def test_grid_and_report(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["grid", "--config", str(cfg), "--run-id", "t1"]) == 0
    out_dir = tmp_path / "reports" / "t1"
    md = (out_dir / "results.md").read_text(encoding="utf-8")
    csv_text = (out_dir / "results.csv").read_text(encoding="utf-8")
    assert "EN_ONLY" in md and "EN_PLUS_T" in md
    assert len(csv_text.splitlines()) == 3  # header + 2 configs x 1 language
    capsys.readouterr()
    # re-render from stored rows
    assert main(
        ["report", "--rows", str(out_dir / "rows.json"), "--out-dir", str(tmp_path / "r2")]
    ) == 0
    assert (tmp_path / "r2" / "results.csv").read_text(encoding="utf-8") == csv_text


def test_empty_scan_corpus(tmp_path, capsys):
    cfg, _, model_ref = flow(tmp_path)
    empty = tmp_path / "empty.jsonl"
    empty.write_text("", encoding="utf-8")
    report = tmp_path / "empty_scan.md"
    assert main(
        ["scan", "--config", str(cfg), "--corpus", str(empty),
         "--model-ref", model_ref, "--out", str(report)]
    ) == 0
    assert "Flagged 0 of 0" in report.read_text(encoding="utf-8")
