"""Uniform classifier-backend contract.

The in-repo linear model and a remote fine-tuned encoder service are
interchangeable behind ``train(assembly, validation) -> model_ref`` and
``predict(model_ref, docs) -> probabilities``. Probabilities, not hard
labels, cross this boundary; thresholding stays in evaluation and
scanning. The remote wire protocol is JSON over HTTP:

    GET  /health            -> {"status": "ok", "model_kinds": [...]}
    POST /train             -> {"job_id": str}         (long-poll status)
    GET  /train/<job_id>    -> {"state": "running"|"done"|"failed",
                                "model_ref": str?, "detail": str?}
    POST /predict           -> {"probs": [{"id": str, "p_sick": float}...]}

Train and validation records use the corpus JSONL schema.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol, Sequence

import requests

from sickscan.corpus import Document, LabeledDataset, record_to_json
from sickscan.features import (
    TokenizerConfig,
    fit_vectorizer,
    load_vectorizer,
    save_vectorizer,
    vectorize,
)
from sickscan.linear import (
    LinearModel,
    TrainConfig,
    load_model,
    predict_proba,
    serialize_model,
    train,
)
from sickscan.weaklabel import TrainingAssembly

LINEAR_LOCAL = "linear_local"
REMOTE_ENCODER = "remote_encoder"


class BackendError(Exception):
    pass


class BackendUnavailable(BackendError):
    pass


class UnknownModel(BackendError):
    pass


class RemoteTrainingFailed(BackendError):
    def __init__(self, detail: str):
        super().__init__(f"remote training failed: {detail}")
        self.detail = detail


class TrainingUnsupported(BackendError):
    pass


@dataclass(frozen=True)
class Capabilities:
    max_text_length: int = 20000
    supports_training: bool = True


@dataclass(frozen=True)
class BackendDescriptor:
    kind: str
    endpoint: str | None = None
    model_ref: str | None = None
    capabilities: Capabilities = field(default_factory=Capabilities)

    def __post_init__(self):
        if self.kind not in (LINEAR_LOCAL, REMOTE_ENCODER):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == REMOTE_ENCODER and not self.endpoint:
            raise ValueError("remote_encoder backends require an endpoint")


@dataclass
class PredictOutput:
    """Per-document Sick probabilities, order-aligned with the input."""

    probs: list[tuple[str, float]]
    truncated_ids: list[str] = field(default_factory=list)


class Backend(Protocol):
    descriptor: BackendDescriptor

    def train(self, assembly: TrainingAssembly, validation: LabeledDataset) -> str: ...

    def predict(self, model_ref: str, docs: Sequence[Document]) -> PredictOutput: ...


def _truncate(docs: Sequence[Document], max_chars: int) -> tuple[list[Document], list[str]]:
    out = []
    truncated = []
    for d in docs:
        if len(d.text) > max_chars:
            out.append(replace(d, text=d.text[:max_chars]))
            truncated.append(d.id)
        else:
            out.append(d)
    return out, truncated


class LinearLocalBackend:
    """Trains and serves the in-repo linear model from a models directory."""

    def __init__(
        self,
        root: Path | str,
        train_config: TrainConfig | None = None,
        tokenizer_config: TokenizerConfig | None = None,
        min_df: int = 2,
        capabilities: Capabilities | None = None,
    ):
        self.root = Path(root)
        self.train_config = train_config or TrainConfig()
        self.tokenizer_config = tokenizer_config or TokenizerConfig()
        self.min_df = min_df
        caps = capabilities or Capabilities()
        self.descriptor = BackendDescriptor(kind=LINEAR_LOCAL, capabilities=caps)
        self._model_cache: dict[str, LinearModel] = {}

    def _model_path(self, model_ref: str) -> Path:
        return self.root / "models" / f"{model_ref}.json"

    def _vectorizer_path(self, vectorizer_ref: str) -> Path:
        return self.root / "vectorizers" / f"{vectorizer_ref}.json"

    def train(self, assembly: TrainingAssembly, validation: LabeledDataset) -> str:
        vectorizer = fit_vectorizer(assembly.docs, self.tokenizer_config, self.min_df)
        save_vectorizer(vectorizer, self._vectorizer_path(vectorizer.content_hash()))
        model = train(assembly, validation, vectorizer, self.train_config)
        payload = serialize_model(model)
        model_ref = hashlib.sha256(payload.encode("utf-8")).hexdigest()
        path = self._model_path(model_ref)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(payload, encoding="utf-8")
        return model_ref

    def _load(self, model_ref: str) -> tuple[LinearModel, object]:
        cached = self._model_cache.get(model_ref)
        if cached is None:
            path = self._model_path(model_ref)
            if not path.exists():
                raise UnknownModel(f"no model {model_ref!r} under {self.root}")
            cached = load_model(path)
            self._model_cache[model_ref] = cached
        vec_path = self._vectorizer_path(cached.vectorizer_ref)
        if not vec_path.exists():
            raise UnknownModel(f"missing vectorizer {cached.vectorizer_ref!r}")
        return cached, load_vectorizer(vec_path)

    def predict(self, model_ref: str, docs: Sequence[Document]) -> PredictOutput:
        model, vectorizer = self._load(model_ref)
        docs, truncated = _truncate(docs, self.descriptor.capabilities.max_text_length)
        probs = [
            (d.id, predict_proba(model, vectorize(vectorizer, d.text, d.lang)))
            for d in docs
        ]
        return PredictOutput(probs=probs, truncated_ids=truncated)


class ConstantBackend:
    """Stub returning one fixed probability; used for contract and report
    plumbing tests."""

    def __init__(self, p_sick: float = 0.9, model_ref: str = "constant"):
        self.p_sick = p_sick
        self.model_ref = model_ref
        self.descriptor = BackendDescriptor(
            kind=LINEAR_LOCAL, capabilities=Capabilities(supports_training=False)
        )

    def train(self, assembly, validation) -> str:
        raise TrainingUnsupported("constant backend cannot train")

    def predict(self, model_ref: str, docs: Sequence[Document]) -> PredictOutput:
        return PredictOutput(probs=[(d.id, self.p_sick) for d in docs])


class RemoteBackend:
    """HTTP client for any service speaking the backend wire protocol."""

    def __init__(
        self,
        endpoint: str,
        *,
        session: requests.Session | None = None,
        timeout_seconds: float = 60.0,
        poll_interval_seconds: float = 0.5,
        max_poll_seconds: float = 3600.0,
        health_attempts: int = 3,
        capabilities: Capabilities | None = None,
        sleep=time.sleep,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.descriptor = BackendDescriptor(
            kind=REMOTE_ENCODER,
            endpoint=self.endpoint,
            capabilities=capabilities or Capabilities(),
        )
        self._session = session or requests.Session()
        self._timeout = timeout_seconds
        self._poll_interval = poll_interval_seconds
        self._max_poll = max_poll_seconds
        self._health_attempts = health_attempts
        self._sleep = sleep

    def _url(self, path: str) -> str:
        return f"{self.endpoint}{path}"

    def health(self) -> dict:
        last = "no attempt made"
        for attempt in range(self._health_attempts):
            if attempt:
                self._sleep(self._poll_interval)
            try:
                resp = self._session.get(self._url("/health"), timeout=self._timeout)
                if resp.status_code == 200:
                    return resp.json()
                last = f"HTTP {resp.status_code}"
            except requests.RequestException as exc:
                last = str(exc)
        raise BackendUnavailable(
            f"{self.endpoint} failed {self._health_attempts} health checks: {last}"
        )

    def train(
        self,
        assembly: TrainingAssembly,
        validation: LabeledDataset,
        hparams: dict | None = None,
    ) -> str:
        self.health()
        body = {
            "train": [record_to_json(d) for d in assembly.docs],
            "validation": [record_to_json(d) for d in validation.docs],
            "hparams": hparams or {},
        }
        try:
            resp = self._session.post(
                self._url("/train"), json=body, timeout=self._timeout
            )
        except requests.RequestException as exc:
            raise BackendUnavailable(str(exc)) from exc
        if resp.status_code != 200:
            raise RemoteTrainingFailed(f"HTTP {resp.status_code}: {resp.text[:200]}")
        job_id = resp.json()["job_id"]
        waited = 0.0
        while True:
            try:
                status = self._session.get(
                    self._url(f"/train/{job_id}"), timeout=self._timeout
                )
            except requests.RequestException as exc:
                raise BackendUnavailable(str(exc)) from exc
            if status.status_code != 200:
                raise RemoteTrainingFailed(f"status HTTP {status.status_code}")
            payload = status.json()
            state = payload.get("state")
            if state == "done":
                return payload["model_ref"]
            if state == "failed":
                raise RemoteTrainingFailed(payload.get("detail", "no detail"))
            if waited >= self._max_poll:
                raise RemoteTrainingFailed(f"timed out after {waited:.0f}s")
            self._sleep(self._poll_interval)
            waited += self._poll_interval

    def predict(self, model_ref: str, docs: Sequence[Document]) -> PredictOutput:
        docs, truncated = _truncate(docs, self.descriptor.capabilities.max_text_length)
        body = {
            "model_ref": model_ref,
            "docs": [{"id": d.id, "text": d.text, "lang": d.lang} for d in docs],
        }
        try:
            resp = self._session.post(
                self._url("/predict"), json=body, timeout=self._timeout
            )
        except requests.RequestException as exc:
            raise BackendUnavailable(str(exc)) from exc
        if resp.status_code == 404:
            raise UnknownModel(f"remote service does not know model {model_ref!r}")
        if resp.status_code != 200:
            raise BackendError(f"predict HTTP {resp.status_code}: {resp.text[:200]}")
        probs = [(p["id"], float(p["p_sick"])) for p in resp.json()["probs"]]
        by_id = dict(probs)
        ordered = [(d.id, by_id[d.id]) for d in docs] if len(by_id) == len(docs) else probs
        return PredictOutput(probs=ordered, truncated_ids=truncated)


def open_backend(descriptor: BackendDescriptor, *, root: Path | str = "artifacts", **kwargs) -> Backend:
    if descriptor.kind == LINEAR_LOCAL:
        return LinearLocalBackend(root, capabilities=descriptor.capabilities, **kwargs)
    return RemoteBackend(
        descriptor.endpoint, capabilities=descriptor.capabilities, **kwargs
    )


def backend_train(
    backend: Backend, assembly: TrainingAssembly, validation: LabeledDataset
) -> str:
    if not backend.descriptor.capabilities.supports_training:
        raise TrainingUnsupported(
            f"backend {backend.descriptor.kind} does not support training"
        )
    return backend.train(assembly, validation)


def backend_predict(
    backend: Backend, model_ref: str, docs: Sequence[Document]
) -> PredictOutput:
    return backend.predict(model_ref, docs)
