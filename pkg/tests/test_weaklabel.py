import random

import pytest

from sickscan.corpus import Label
from sickscan.synth import pseudo_labeled, pseudo_pool
from sickscan.translate import IdentityProvider, MemoryCache, TokenMapProvider
from sickscan.weaklabel import (
    ConfigLabel,
    PoolTooSmall,
    assemble,
    build_weak_set,
    leakage_check,
    load_assembly,
    load_weak_set,
    save_assembly,
    save_weak_set,
    serialize_docs_jsonl,
)

from conftest import labeled, unlabeled


def weak(s, n, pool, seed=7, **kwargs):
    source = pseudo_labeled("en", s, n)
    target_pool = pseudo_pool("es", pool)
    return build_weak_set(
        source, target_pool, IdentityProvider(), "es", seed, **kwargs
    )


def test_balanced_source_needs_no_pool():
    ws = weak(1, 1, pool=50)
    assert (
        ws.origin_counts.translated_sick,
        ws.origin_counts.translated_not_sick,
        ws.origin_counts.sampled_negatives,
    ) == (1, 1, 0)
    assert len(ws) == 2


def test_hand_arithmetic_small():
    ws = weak(3, 10, pool=100)
    counts = ws.origin_counts
    assert (counts.translated_sick, counts.translated_not_sick, counts.sampled_negatives) == (3, 3, 7)
    assert len(ws) == 13
    assert ws.sick_count == 3 and ws.not_sick_count == 10


def test_class_counts_match_source():
    ws = weak(5, 9, pool=30)
    assert ws.sick_count == 5
    assert ws.not_sick_count == 9
    assert len(ws) == 14


def test_label_projection():
    source = pseudo_labeled("en", 4, 6)
    pool = pseudo_pool("es", 10)
    ws = build_weak_set(source, pool, IdentityProvider(), "es", seed=3)
    source_labels = {d.id: d.label for d in source.docs}
    for d in ws.docs:
        if d.provenance.kind == "translated":
            assert d.label is source_labels[d.id]
            assert d.lang == "es"
            assert d.provenance.translated_from == "en"
        else:
            assert d.provenance.kind == "sampled-negative"
            assert d.label is Label.NOT_SICK


def test_sampled_negative_ids_recorded():
    ws = weak(2, 8, pool=20)
    assert len(ws.sampled_negative_ids) == 6
    pool_ids = {f"es-p{i}" for i in range(20)}
    assert set(ws.sampled_negative_ids) <= pool_ids
    assert len(set(ws.sampled_negative_ids)) == 6  # without replacement


def test_pool_too_small_takes_all_and_records_shortfall(caplog):
    with caplog.at_level("WARNING"):
        ws = weak(2, 10, pool=5)
    counts = ws.origin_counts
    assert counts.sampled_negatives == 5
    assert counts.pool_shortfall == 3
    assert len(ws) == 2 + 2 + 5
    assert "shortfall" in caplog.text


def test_pool_too_small_strict_raises():
    with pytest.raises(PoolTooSmall):
        weak(2, 10, pool=5, strict_pool=True)


def test_target_language_must_differ():
    source = pseudo_labeled("en", 1, 1)
    pool = pseudo_pool("en", 5)
    with pytest.raises(ValueError):
        build_weak_set(source, pool, IdentityProvider(), "en", seed=1)


def test_pool_language_must_match_target():
    source = pseudo_labeled("en", 1, 1)
    pool = pseudo_pool("fr", 5)
    with pytest.raises(ValueError):
        build_weak_set(source, pool, IdentityProvider(), "es", seed=1)


def test_build_weak_set_deterministic_bytes():
    a = serialize_docs_jsonl(weak(4, 9, pool=40, seed=11).docs)
    b = serialize_docs_jsonl(weak(4, 9, pool=40, seed=11).docs)
    c = serialize_docs_jsonl(weak(4, 9, pool=40, seed=12).docs)
    assert a == b
    assert a != c


def test_weak_set_save_load_round_trip(tmp_path):
    ws = weak(3, 5, pool=12)
    path = save_weak_set(ws, tmp_path / "weak_es.jsonl")
    again = load_weak_set(path)
    assert again == ws


def test_assemble_single_source_is_permutation(toy_labeled):
    assembly = assemble([("en", toy_labeled)], seed=42, config_label="EN_ONLY")
    assert len(assembly) == len(toy_labeled)
    original = sorted((d.text, d.lang, d.label) for d in toy_labeled.docs)
    shuffled = sorted((d.text, d.lang, d.label) for d in assembly.docs)
    assert original == shuffled
    assert all(d.id.startswith("en:") for d in assembly.docs)


def test_assemble_seed_determinism():
    a = labeled([("first text", Label.SICK), ("second text", Label.NOT_SICK)])
    b = labeled(
        [("tercero", Label.SICK), ("cuarto", Label.NOT_SICK), ("quinto", Label.NOT_SICK)],
        lang="es",
    )
    one = assemble([("en", a), ("es", b)], seed=42, config_label="EN_PLUS_T")
    two = assemble([("en", a), ("es", b)], seed=42, config_label="EN_PLUS_T")
    other = assemble([("en", a), ("es", b)], seed=43, config_label="EN_PLUS_T")
    assert [d.id for d in one.docs] == [d.id for d in two.docs]
    assert sorted(d.id for d in one.docs) == sorted(d.id for d in other.docs)
    assert len(one) == 5


def test_assemble_duplicate_ids_across_sources_rejected():
    a = labeled([("text one", Label.SICK)], lang="en")
    with pytest.raises(Exception):
        assemble([("en", a), ("en", a)], seed=1, config_label="ALL")


def test_assemble_requires_a_source():
    with pytest.raises(ValueError):
        assemble([], seed=1, config_label="ALL")


def test_assemble_collects_sampled_negative_ids():
    ws = weak(2, 6, pool=10)
    source = pseudo_labeled("en", 2, 6)
    assembly = assemble([("en", source), ("es", ws)], seed=5, config_label="EN_PLUS_T")
    assert set(assembly.sampled_negative_ids) == set(ws.sampled_negative_ids)
    assert assembly.config_label is ConfigLabel.EN_PLUS_T


def test_assembly_save_load_round_trip(tmp_path):
    ws = weak(2, 4, pool=9)
    source = pseudo_labeled("en", 2, 4)
    assembly = assemble([("en", source), ("es", ws)], seed=5, config_label="EN_PLUS_T")
    path = save_assembly(assembly, tmp_path / "assembly.jsonl")
    again = load_assembly(path)
    assert again == assembly


def test_leakage_disjoint_fixtures_clean(toy_labeled):
    assembly = assemble([("en", toy_labeled)], seed=1, config_label="EN_ONLY")
    eval_set = labeled([("completely different text", Label.SICK)], id_prefix="e")
    assert leakage_check(assembly, [eval_set]).clean


def test_leakage_sampled_negative_collision():
    ws = weak(2, 8, pool=10)
    sampled_id = ws.sampled_negative_ids[0]
    sampled_text = next(d.text for d in ws.docs if d.id == sampled_id)
    assembly = assemble([("es", ws)], seed=1, config_label="T_ONLY")
    eval_set = labeled([(sampled_text, Label.NOT_SICK)], lang="es", id_prefix="e")
    report = leakage_check(assembly, [eval_set])
    assert len(report.collisions) == 1
    assert report.collisions[0].text == sampled_text


def test_leakage_translated_doc_collision():
    # train and eval both derived from the same source review
    source = pseudo_labeled("en", 2, 2)
    pool = pseudo_pool("es", 4)
    provider = TokenMapProvider({("en", "es"): {"review": "resena"}})
    ws = build_weak_set(source, pool, provider, "es", seed=2)
    translated_text = next(
        d.text for d in ws.docs if d.provenance.kind == "translated"
    )
    assembly = assemble([("es", ws)], seed=1, config_label="T_ONLY")
    eval_set = labeled([(translated_text, Label.SICK)], lang="es", id_prefix="e")
    report = leakage_check(assembly, [eval_set])
    assert len(report.collisions) == 1


def test_sampling_uniformity_chi_square():
    # choosing 3 of 10 over many seeded runs: each doc near 3/10 frequency
    runs = 10_000
    counts = {f"es-p{i}": 0 for i in range(10)}
    source = pseudo_labeled("en", 1, 4)  # needs 3 pool negatives
    pool = pseudo_pool("es", 10)
    provider = IdentityProvider()
    for seed in range(runs):
        ws = build_weak_set(source, pool, provider, "es", seed)
        for doc_id in ws.sampled_negative_ids:
            counts[doc_id] += 1
    expected = runs * 3 / 10
    sigma = (runs * 0.3 * 0.7) ** 0.5
    for doc_id, got in counts.items():
        assert abs(got - expected) <= 3 * sigma, (doc_id, got, expected)


def test_translation_failures_propagate_when_disallowed():
    from sickscan.translate import ProviderError, TranslationFailures

    class Broken(IdentityProvider):
        def translate(self, text, src, tgt):
            raise ProviderError("down")

    source = pseudo_labeled("en", 1, 1)
    pool = pseudo_pool("es", 2)
    with pytest.raises(Exception):
        build_weak_set(
            source, pool, Broken(), "es", seed=1, allow_partial_failures=False
        )
