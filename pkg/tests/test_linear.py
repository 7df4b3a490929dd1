import math
import random

import numpy as np
import pytest

from sickscan.corpus import Label
from sickscan.features import SparseVector, TokenizerConfig, fit_vectorizer, vectorize_doc
from sickscan.linear import (
    DimensionMismatch,
    EmptyAssembly,
    LinearModel,
    TrainConfig,
    TrainingMeta,
    load_model,
    loss_and_gradient,
    model_loss,
    predict_proba,
    save_model,
    serialize_model,
    train,
)
from sickscan.weaklabel import LeakageDetected, assemble

from conftest import labeled


def sparse(dense):
    dense = np.asarray(dense, dtype=np.float64)
    idx = np.nonzero(dense)[0]
    return SparseVector(indices=idx, values=dense[idx], dim=len(dense))


def make_model(weights, bias=0.0):
    return LinearModel(
        weights=np.asarray(weights, dtype=np.float64),
        bias=bias,
        vectorizer_ref="test",
        training_meta=TrainingMeta(seed=0, epochs_run=0, final_val_loss=0.0,
                                   config=TrainConfig()),
    )


def numeric_gradient(weights, bias, batch, l2, h=1e-5):
    def loss_at(w, b):
        return loss_and_gradient(w, b, batch, l2)[0]

    grad_w = np.zeros_like(weights)
    for i in range(len(weights)):
        up, down = weights.copy(), weights.copy()
        up[i] += h
        down[i] -= h
        grad_w[i] = (loss_at(up, bias) - loss_at(down, bias)) / (2 * h)
    grad_b = (loss_at(weights, bias + h) - loss_at(weights, bias - h)) / (2 * h)
    return grad_w, grad_b


def random_batch(rng, dim=10, size=6):
    batch = []
    for _ in range(size):
        dense = [rng.gauss(0, 1) if rng.random() < 0.7 else 0.0 for _ in range(dim)]
        if not any(dense):
            dense[rng.randrange(dim)] = 1.0
        label = Label.SICK if rng.random() < 0.5 else Label.NOT_SICK
        batch.append((sparse(dense), label))
    return batch


def test_zero_model_loss_is_ln2():
    batch = random_batch(random.Random(0))
    loss, _, _ = loss_and_gradient(np.zeros(10), 0.0, batch, 0.0)
    assert loss == pytest.approx(math.log(2), abs=1e-12)


def test_single_example_margin_ln3():
    # one feature with value 1, weight ln 3, label Sick: loss = -ln(0.75)
    batch = [(sparse([1.0]), Label.SICK)]
    loss, _, _ = loss_and_gradient(np.array([math.log(3)]), 0.0, batch, 0.0)
    assert loss == pytest.approx(-math.log(0.75), abs=1e-12)


def test_l2_term_added():
    batch = [(sparse([1.0]), Label.SICK)]
    w = np.array([2.0])
    base, _, _ = loss_and_gradient(w, 0.0, batch, 0.0)
    reg, _, _ = loss_and_gradient(w, 0.0, batch, 0.5)
    assert reg == pytest.approx(base + 0.25 * 4.0)


def test_gradient_matches_finite_differences():
    rng = random.Random(1234)
    for _ in range(20):
        batch = random_batch(rng)
        weights = np.array([rng.gauss(0, 1) for _ in range(10)])
        bias = rng.gauss(0, 1)
        l2 = rng.choice([0.0, 1e-3, 1e-2])
        _, grad_w, grad_b = loss_and_gradient(weights, bias, batch, l2)
        num_w, num_b = numeric_gradient(weights, bias, batch, l2)
        for a, n in list(zip(grad_w, num_w)) + [(grad_b, num_b)]:
            rel = abs(a - n) / max(abs(a), abs(n), 1e-6)
            assert rel < 1e-4, (a, n, rel)


def test_dimension_mismatch():
    model = make_model([0.0, 0.0])
    with pytest.raises(DimensionMismatch):
        predict_proba(model, sparse([1.0, 0.0, 1.0]))


def test_predict_zero_model_is_half():
    model = make_model([0.0, 0.0, 0.0])
    assert predict_proba(model, sparse([1.0, 0.0, 2.0])) == 0.5


def test_predict_margin_ln3():
    model = make_model([math.log(3)])
    assert predict_proba(model, sparse([1.0])) == pytest.approx(0.75)


def test_sigmoid_saturation_no_overflow():
    model = make_model([50.0])
    assert predict_proba(model, sparse([1.0])) >= 1 - 1e-9
    model = make_model([700.0])
    assert predict_proba(model, sparse([1.0])) == pytest.approx(1.0)
    model = make_model([-700.0])
    assert predict_proba(model, sparse([1.0])) == pytest.approx(0.0, abs=1e-300)


SEPARABLE = [
    (f"sick vomit complaint number {i}", Label.SICK) for i in range(10)
] + [
    (f"lovely delicious dinner number {i}", Label.NOT_SICK) for i in range(10)
]
VAL = [
    ("sick vomit tonight", Label.SICK),
    ("sick stomach vomit", Label.SICK),
    ("delicious lovely meal", Label.NOT_SICK),
    ("lovely delicious evening", Label.NOT_SICK),
]


def separable_setup():
    train_set = labeled(SEPARABLE)
    val_set = labeled(VAL, id_prefix="v")
    assembly = assemble([("en", train_set)], seed=1, config_label="EN_ONLY")
    vectorizer = fit_vectorizer(assembly.docs, TokenizerConfig(), min_df=2)
    return assembly, val_set, vectorizer


def test_separable_toy_reaches_perfect_f1():
    assembly, val_set, vectorizer = separable_setup()
    model = train(assembly, val_set, vectorizer, TrainConfig(seed=7))
    errors = 0
    for d in assembly.docs:
        p = predict_proba(model, vectorize_doc(vectorizer, d))
        predicted = Label.SICK if p >= 0.5 else Label.NOT_SICK
        errors += predicted is not d.label
    assert errors == 0
    assert model.training_meta.epochs_run <= 50


def test_max_epochs_zero_returns_initialization():
    assembly, val_set, vectorizer = separable_setup()
    config = TrainConfig(max_epochs=0, patience=0, seed=1)
    model = train(assembly, val_set, vectorizer, config)
    assert np.all(model.weights == 0.0) and model.bias == 0.0
    assert model.training_meta.epochs_run == 0
    for d in val_set.docs:
        assert predict_proba(model, vectorize_doc(vectorizer, d)) == 0.5


def test_same_seed_byte_identical_models(tmp_path):
    assembly, val_set, vectorizer = separable_setup()
    config = TrainConfig(seed=99)
    m1 = train(assembly, val_set, vectorizer, config)
    m2 = train(assembly, val_set, vectorizer, config)
    assert serialize_model(m1) == serialize_model(m2)
    p1 = save_model(m1, tmp_path / "m1.json")
    p2 = save_model(m2, tmp_path / "m2.json")
    assert p1.read_bytes() == p2.read_bytes()


def test_different_seed_changes_model():
    assembly, val_set, vectorizer = separable_setup()
    m1 = train(assembly, val_set, vectorizer, TrainConfig(seed=1))
    m2 = train(assembly, val_set, vectorizer, TrainConfig(seed=2))
    assert serialize_model(m1) != serialize_model(m2)


def test_model_file_round_trip(tmp_path):
    assembly, val_set, vectorizer = separable_setup()
    model = train(assembly, val_set, vectorizer, TrainConfig(seed=3))
    path = save_model(model, tmp_path / "model.json")
    again = load_model(path)
    assert serialize_model(again) == serialize_model(model)
    assert again.vectorizer_ref == vectorizer.content_hash()


def test_full_batch_descent_loss_non_increasing():
    assembly, val_set, vectorizer = separable_setup()
    vecs = [vectorize_doc(vectorizer, d) for d in assembly.docs]
    labels = [d.label for d in assembly.docs]
    weights = np.zeros(vectorizer.dim)
    bias = 0.0
    losses = []
    for _ in range(30):
        losses.append(model_loss(weights, bias, vecs, labels, 0.0))
        _, gw, gb = loss_and_gradient(weights, bias, list(zip(vecs, labels)), 0.0)
        weights -= 0.01 * gw
        bias -= 0.01 * gb
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_early_stopping_meta_invariants():
    assembly, val_set, vectorizer = separable_setup()
    config = TrainConfig(seed=5, max_epochs=30, patience=2)
    model = train(assembly, val_set, vectorizer, config)
    meta = model.training_meta
    assert meta.epochs_run <= config.max_epochs
    # returned weights achieve the recorded best validation loss
    val_vecs = [vectorize_doc(vectorizer, d) for d in val_set.docs]
    val_labels = [d.label for d in val_set.docs]
    assert model_loss(model.weights, model.bias, val_vecs, val_labels) == pytest.approx(
        meta.final_val_loss
    )


def test_prediction_order_invariance():
    assembly, val_set, vectorizer = separable_setup()
    model = train(assembly, val_set, vectorizer, TrainConfig(seed=11))
    docs = list(val_set.docs)
    forward = {d.id: predict_proba(model, vectorize_doc(vectorizer, d)) for d in docs}
    backward = {
        d.id: predict_proba(model, vectorize_doc(vectorizer, d)) for d in reversed(docs)
    }
    assert forward == backward


def test_empty_assembly_rejected():
    _, val_set, vectorizer = separable_setup()
    empty = assemble([("en", labeled([("solo text", Label.SICK)]))], 1, "EN_ONLY")
    object.__setattr__(empty, "docs", ())
    with pytest.raises(EmptyAssembly):
        train(empty, val_set, vectorizer, TrainConfig())


def test_leakage_detected_blocks_training():
    train_set = labeled(SEPARABLE)
    assembly = assemble([("en", train_set)], seed=1, config_label="EN_ONLY")
    vectorizer = fit_vectorizer(assembly.docs, TokenizerConfig(), min_df=2)
    leaky_val = labeled([(SEPARABLE[0][0], Label.SICK)], id_prefix="v")
    with pytest.raises(LeakageDetected):
        train(assembly, leaky_val, vectorizer, TrainConfig())


def test_patience_must_not_exceed_max_epochs():
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=2, patience=5)
