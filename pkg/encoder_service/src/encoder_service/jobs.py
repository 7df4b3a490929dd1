"""Asynchronous fine-tuning jobs: one at a time, polled over HTTP."""

from __future__ import annotations

import logging
import threading
import uuid
from dataclasses import dataclass, field

from encoder_service.model import (
    FineTuneResult,
    Hparams,
    SickClassifier,
    TinyEncoder,
    fine_tune,
)

log = logging.getLogger(__name__)


@dataclass
class TrainJob:
    job_id: str
    state: str = "running"  # running -> done | failed
    model_ref: str | None = None
    detail: str | None = None
    metadata: dict = field(default_factory=dict)


class JobRegistry:
    """Runs fine-tune jobs on a single worker thread and keeps finished
    classifiers addressable by their content hash."""

    def __init__(self, encoder_factory):
        self._encoder_factory = encoder_factory
        self._jobs: dict[str, TrainJob] = {}
        self._models: dict[str, tuple[SickClassifier, int]] = {}
        self._lock = threading.Lock()
        self._train_lock = threading.Lock()  # one training job at a time

    def submit(self, train_records: list[dict], val_records: list[dict], hparams: Hparams) -> str:
        job_id = uuid.uuid4().hex[:12]
        job = TrainJob(job_id=job_id)
        with self._lock:
            self._jobs[job_id] = job
        thread = threading.Thread(
            target=self._run,
            args=(job, train_records, val_records, hparams),
            daemon=True,
        )
        thread.start()
        return job_id

    def _run(self, job: TrainJob, train_records, val_records, hparams: Hparams) -> None:
        with self._train_lock:
            try:
                encoder: TinyEncoder = self._encoder_factory()
                result: FineTuneResult = fine_tune(
                    encoder, train_records, val_records, hparams
                )
            except Exception as exc:
                log.exception("training job %s failed", job.job_id)
                with self._lock:
                    job.state = "failed"
                    job.detail = str(exc)
                return
        with self._lock:
            self._models[result.model_ref] = (
                result.model,
                result.hparams.max_sequence_length,
            )
            job.model_ref = result.model_ref
            job.metadata = {
                "epochs_run": result.epochs_run,
                "best_val_loss": result.best_val_loss,
                "val_f1_positive": result.val_f1_positive,
                "hparams": result.hparams.to_dict(),
                "validation_langs": result.validation_langs,
            }
            job.state = "done"

    def job(self, job_id: str) -> TrainJob | None:
        with self._lock:
            return self._jobs.get(job_id)

    def model(self, model_ref: str) -> tuple[SickClassifier, int] | None:
        with self._lock:
            return self._models.get(model_ref)
