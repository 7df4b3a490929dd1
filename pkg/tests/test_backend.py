import hashlib

import pytest

from sickscan.backend import (
    BackendDescriptor,
    BackendUnavailable,
    Capabilities,
    ConstantBackend,
    LinearLocalBackend,
    RemoteBackend,
    RemoteTrainingFailed,
    TrainingUnsupported,
    UnknownModel,
    backend_predict,
    backend_train,
)
from sickscan.backend_contract import run_contract_suite
from sickscan.corpus import Label
from sickscan.evaluate import ResultRow, confusion, metrics, render_report
from sickscan.features import load_vectorizer, vectorize
from sickscan.linear import load_model, predict_proba
from sickscan.weaklabel import assemble

from conftest import doc, labeled
from stub_server import StubBackendServer

TRAIN = [
    (f"sick vomit complaint {i}", Label.SICK) for i in range(8)
] + [
    (f"lovely delicious dinner {i}", Label.NOT_SICK) for i in range(8)
]
VAL = [
    ("sick vomit review", Label.SICK),
    ("delicious lovely food", Label.NOT_SICK),
]


@pytest.fixture
def local_backend(tmp_path):
    return LinearLocalBackend(tmp_path / "artifacts")


@pytest.fixture
def trained(local_backend):
    assembly = assemble([("en", labeled(TRAIN))], seed=4, config_label="EN_ONLY")
    validation = labeled(VAL, id_prefix="v")
    model_ref = backend_train(local_backend, assembly, validation)
    return local_backend, model_ref


def test_local_model_ref_is_file_hash(trained):
    backend, model_ref = trained
    path = backend.root / "models" / f"{model_ref}.json"
    assert path.exists()
    assert hashlib.sha256(path.read_bytes()).hexdigest() == model_ref


def test_local_predict_matches_direct_composition(trained):
    backend, model_ref = trained
    model = load_model(backend.root / "models" / f"{model_ref}.json")
    vectorizer = load_vectorizer(
        backend.root / "vectorizers" / f"{model.vectorizer_ref}.json"
    )
    docs = [doc(0, "sick vomit again"), doc(1, "delicious lovely place")]
    output = backend_predict(backend, model_ref, docs)
    for (doc_id, p), d in zip(output.probs, docs):
        assert doc_id == d.id
        assert p == predict_proba(model, vectorize(vectorizer, d.text, d.lang))


def test_predict_empty_list(trained):
    backend, model_ref = trained
    assert backend_predict(backend, model_ref, []).probs == []


def test_unknown_model_rejected(local_backend):
    with pytest.raises(UnknownModel):
        local_backend.predict("no-such-model", [doc(0, "whatever text")])


def test_truncation_flagged(tmp_path):
    backend = LinearLocalBackend(
        tmp_path, capabilities=Capabilities(max_text_length=10)
    )
    assembly = assemble([("en", labeled(TRAIN))], seed=4, config_label="EN_ONLY")
    model_ref = backend.train(assembly, labeled(VAL, id_prefix="v"))
    long_doc = doc(0, "sick " * 30)
    output = backend.predict(model_ref, [long_doc])
    assert output.truncated_ids == [long_doc.id]


def test_order_alignment_many_docs(trained):
    backend, model_ref = trained
    docs = [doc(i, f"review number {i} was fine") for i in range(25)]
    output = backend_predict(backend, model_ref, docs)
    assert [doc_id for doc_id, _ in output.probs] == [d.id for d in docs]


def test_constant_backend_cannot_train():
    stub = ConstantBackend(0.9)
    with pytest.raises(TrainingUnsupported):
        backend_train(stub, None, None)


def test_eval_report_works_with_any_backend():
    # substitutability: a constant-probability stub produces a well-formed report
    stub = ConstantBackend(0.9)
    docs = [doc(i, f"text number {i}") for i in range(4)]
    output = stub.predict("constant", docs)
    labels = [(d.id, Label.SICK if i % 2 else Label.NOT_SICK) for i, d in enumerate(docs)]
    m = metrics(confusion(output.probs, labels, threshold=0.5))
    report = render_report(
        [ResultRow("stub", "EN_ONLY", "en", m)], "markdown"
    )
    assert "stub" in report and "EN_ONLY" in report


def test_remote_backend_against_stub():
    with StubBackendServer(p_sick=0.9) as server:
        backend = RemoteBackend(server.base_url, poll_interval_seconds=0.01)
        assembly = assemble([("en", labeled(TRAIN))], seed=4, config_label="EN_ONLY")
        model_ref = backend.train(assembly, labeled(VAL, id_prefix="v"))
        assert model_ref.startswith("stub-model-")
        sent = server.state.train_requests[0]
        assert len(sent["train"]) == len(TRAIN)
        assert sent["validation"][0]["label"] in ("Sick", "NotSick")
        docs = [doc(i, f"remote text {i}") for i in range(3)]
        output = backend.predict(model_ref, docs)
        assert output.probs == [(d.id, 0.9) for d in docs]


def test_remote_prebuilt_model_predict():
    with StubBackendServer(p_sick=0.25) as server:
        backend = RemoteBackend(server.base_url)
        output = backend.predict("prebuilt", [doc(0, "some review text")])
        assert output.probs == [("d0", 0.25)]


def test_remote_unknown_model():
    with StubBackendServer() as server:
        backend = RemoteBackend(server.base_url)
        with pytest.raises(UnknownModel):
            backend.predict("missing", [doc(0, "text here")])


def test_remote_training_failure_surfaces_detail():
    with StubBackendServer(fail_training=True) as server:
        backend = RemoteBackend(server.base_url, poll_interval_seconds=0.01)
        assembly = assemble([("en", labeled(TRAIN))], seed=4, config_label="EN_ONLY")
        with pytest.raises(RemoteTrainingFailed) as err:
            backend.train(assembly, labeled(VAL, id_prefix="v"))
        assert "injected failure" in str(err.value)


def test_endpoint_down_gives_backend_unavailable():
    backend = RemoteBackend(
        "http://127.0.0.1:9", poll_interval_seconds=0.01, timeout_seconds=0.2
    )
    with pytest.raises(BackendUnavailable) as err:
        backend.health()
    assert "3 health checks" in str(err.value)


def test_descriptor_invariants():
    with pytest.raises(ValueError):
        BackendDescriptor(kind="remote_encoder")
    with pytest.raises(ValueError):
        BackendDescriptor(kind="mystery")
    d = BackendDescriptor(kind="remote_encoder", endpoint="http://x")
    assert d.capabilities.supports_training


def test_contract_suite_passes_against_stub():
    with StubBackendServer(polls_until_done=3) as server:
        passed = run_contract_suite(server.base_url)
    assert passed == [
        "health",
        "malformed_request",
        "train_flow",
        "predict_empty",
        "predict_alignment",
    ]
