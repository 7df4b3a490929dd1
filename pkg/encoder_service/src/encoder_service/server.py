"""HTTP service exposing the classifier-backend wire protocol.

    GET  /health            -> {"status": "ok", "model_kinds": [...]}
    POST /train             -> {"job_id": str}
    GET  /train/{job_id}    -> {"state": "running"|"done"|"failed", ...}
    POST /predict           -> {"probs": [{"id", "p_sick"}...]}

Training is asynchronous: fine-tuning can outlive any sensible HTTP
timeout, so /train returns a job id for polling. Records use the same
JSONL schema as the pipeline's corpus files. Returns 503 when the
pre-trained encoder checkpoint cannot be loaded, 400/422 on schema
violations, and 404 for unknown models or jobs.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import uvicorn
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from encoder_service.jobs import JobRegistry
from encoder_service.model import Hparams, TinyEncoder, load_encoder

log = logging.getLogger(__name__)

DEFAULT_CHECKPOINT = Path(__file__).resolve().parents[2] / "fixtures" / "tiny_encoder.pt"


class TrainRecord(BaseModel):
    id: str
    text: str
    lang: str = "und"
    label: str | None = None


class PredictDoc(BaseModel):
    id: str
    text: str
    lang: str = "und"


class TrainRequest(BaseModel):
    train: list[TrainRecord]
    validation: list[TrainRecord]
    hparams: dict = Field(default_factory=dict)


class PredictRequest(BaseModel):
    model_ref: str
    docs: list[PredictDoc]


def create_app(checkpoint: Path | str = DEFAULT_CHECKPOINT, device: str = "cpu") -> FastAPI:
    app = FastAPI(title="encoder-service")
    checkpoint = Path(checkpoint)

    def encoder_factory() -> TinyEncoder:
        return load_encoder(checkpoint, device)

    load_error: str | None = None
    try:
        encoder_factory()
    except Exception as exc:  # surface as 503 from the endpoints
        load_error = f"cannot load encoder checkpoint {checkpoint}: {exc}"
        log.error(load_error)

    registry = JobRegistry(encoder_factory)
    app.state.registry = registry

    def require_loaded():
        if load_error is not None:
            raise HTTPException(status_code=503, detail=load_error)

    @app.get("/health")
    def health():
        if load_error is not None:
            return {"status": "degraded", "detail": load_error, "model_kinds": []}
        return {"status": "ok", "model_kinds": ["tiny_multilingual_encoder"]}

    @app.post("/train")
    def train(request: TrainRequest):
        require_loaded()
        if not request.train or not request.validation:
            raise HTTPException(status_code=400, detail="train and validation must be non-empty")
        for record in request.train + request.validation:
            if record.label not in ("Sick", "NotSick"):
                raise HTTPException(
                    status_code=400, detail=f"record {record.id!r} has no valid label"
                )
        hparams = Hparams.from_dict(request.hparams)
        job_id = registry.submit(
            [r.model_dump() for r in request.train],
            [r.model_dump() for r in request.validation],
            hparams,
        )
        return {"job_id": job_id}

    @app.get("/train/{job_id}")
    def train_status(job_id: str):
        job = registry.job(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        payload = {"state": job.state}
        if job.state == "done":
            payload["model_ref"] = job.model_ref
            payload["metadata"] = job.metadata
        elif job.state == "failed":
            payload["detail"] = job.detail
        return payload

    @app.post("/predict")
    def predict(request: PredictRequest):
        require_loaded()
        entry = registry.model(request.model_ref)
        if entry is None:
            raise HTTPException(
                status_code=404, detail=f"unknown model {request.model_ref!r}"
            )
        model, max_tokens = entry
        from encoder_service.model import predict_proba

        probs = predict_proba(model, [d.text for d in request.docs], max_tokens)
        return {
            "probs": [
                {"id": d.id, "p_sick": p} for d, p in zip(request.docs, probs)
            ]
        }

    return app


def load_service_config(path: Path | str | None) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return raw.get("service", raw)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Run the encoder backend service.")
    parser.add_argument("--config", default=None, help="TOML file with a [service] table")
    parser.add_argument("--checkpoint", default=None)
    parser.add_argument("--device", default=None)
    parser.add_argument("--host", default=None)
    parser.add_argument("--port", type=int, default=None)
    args = parser.parse_args(argv)

    config = load_service_config(args.config)
    checkpoint = args.checkpoint or config.get("checkpoint", str(DEFAULT_CHECKPOINT))
    device = args.device or config.get("device", "cpu")
    host = args.host or config.get("host", "127.0.0.1")
    port = args.port or int(config.get("port", 8901))

    logging.basicConfig(level=logging.INFO)
    app = create_app(checkpoint, device)
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
