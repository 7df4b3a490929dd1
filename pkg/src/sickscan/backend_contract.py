"""Conformance checks for the backend wire protocol.

Any HTTP service claiming to implement the train/predict protocol can be
verified with ``run_contract_suite``. The primary test suite runs these
checks against its stub server; a real encoder service must pass the
identical checks. Each check raises AssertionError with a readable
message on violation.
"""

from __future__ import annotations

from typing import Callable, Sequence

import requests

DEFAULT_TIMEOUT = 30.0

TOY_TRAIN_RECORDS = [
    {"id": f"t{i}", "text": text, "lang": "en", "label": label}
    for i, (text, label) in enumerate(
        [
            ("got violently sick after the chicken", "Sick"),
            ("vomited all night after eating here", "Sick"),
            ("food poisoning from the oysters", "Sick"),
            ("stomach cramps and nausea afterwards", "Sick"),
            ("wonderful dinner and lovely staff", "NotSick"),
            ("great pasta and friendly service", "NotSick"),
            ("the dessert was delicious", "NotSick"),
            ("cozy place with amazing pizza", "NotSick"),
        ]
    )
]

TOY_VALIDATION_RECORDS = [
    {"id": "v0", "text": "sick and vomiting after dinner", "lang": "en", "label": "Sick"},
    {"id": "v1", "text": "delicious food, great service", "lang": "en", "label": "NotSick"},
]


def check_health(base_url: str, session: requests.Session) -> None:
    resp = session.get(f"{base_url}/health", timeout=DEFAULT_TIMEOUT)
    assert resp.status_code == 200, f"/health returned {resp.status_code}"
    payload = resp.json()
    assert payload.get("status") == "ok", f"/health status is {payload.get('status')!r}"
    assert isinstance(payload.get("model_kinds"), list), "/health must list model_kinds"


def check_predict_empty(base_url: str, session: requests.Session, model_ref: str) -> None:
    resp = session.post(
        f"{base_url}/predict",
        json={"model_ref": model_ref, "docs": []},
        timeout=DEFAULT_TIMEOUT,
    )
    assert resp.status_code == 200, f"/predict empty returned {resp.status_code}"
    assert resp.json()["probs"] == [], "empty input must give empty probs"


def check_predict_alignment(
    base_url: str, session: requests.Session, model_ref: str
) -> None:
    docs = [
        {"id": f"d{i}", "text": f"review number {i} mentions dinner", "lang": "en"}
        for i in range(5)
    ]
    resp = session.post(
        f"{base_url}/predict",
        json={"model_ref": model_ref, "docs": docs},
        timeout=DEFAULT_TIMEOUT,
    )
    assert resp.status_code == 200, f"/predict returned {resp.status_code}"
    probs = resp.json()["probs"]
    assert [p["id"] for p in probs] == [d["id"] for d in docs], (
        "prediction order must match input order"
    )
    for p in probs:
        assert 0.0 <= float(p["p_sick"]) <= 1.0, f"p_sick out of range: {p}"


def check_malformed_request(base_url: str, session: requests.Session) -> None:
    resp = session.post(
        f"{base_url}/predict", json={"nonsense": True}, timeout=DEFAULT_TIMEOUT
    )
    assert resp.status_code in (400, 422), (
        f"malformed /predict body should give 400/422, got {resp.status_code}"
    )


def check_train_flow(
    base_url: str,
    session: requests.Session,
    *,
    hparams: dict | None = None,
    poll: Callable[[], None] | None = None,
    max_polls: int = 600,
) -> str:
    import time

    resp = session.post(
        f"{base_url}/train",
        json={
            "train": TOY_TRAIN_RECORDS,
            "validation": TOY_VALIDATION_RECORDS,
            "hparams": hparams or {},
        },
        timeout=DEFAULT_TIMEOUT,
    )
    assert resp.status_code == 200, f"/train returned {resp.status_code}: {resp.text[:200]}"
    job_id = resp.json().get("job_id")
    assert isinstance(job_id, str) and job_id, "/train must return a job_id"
    for _ in range(max_polls):
        status = session.get(f"{base_url}/train/{job_id}", timeout=DEFAULT_TIMEOUT)
        assert status.status_code == 200, f"status endpoint gave {status.status_code}"
        payload = status.json()
        state = payload.get("state")
        assert state in ("running", "done", "failed"), f"bad state {state!r}"
        if state == "done":
            model_ref = payload.get("model_ref")
            assert isinstance(model_ref, str) and model_ref, "done jobs need a model_ref"
            return model_ref
        if state == "failed":
            raise AssertionError(f"training job failed: {payload.get('detail')}")
        (poll or (lambda: time.sleep(0.2)))()
    raise AssertionError(f"training did not finish within {max_polls} polls")


def run_contract_suite(
    base_url: str,
    *,
    session: requests.Session | None = None,
    train_hparams: dict | None = None,
    existing_model_ref: str | None = None,
) -> list[str]:
    """Run every protocol check against a live service; returns the names
    of the checks that passed. Trains a toy model unless an existing
    model_ref is supplied."""
    base_url = base_url.rstrip("/")
    session = session or requests.Session()
    passed = []

    check_health(base_url, session)
    passed.append("health")

    check_malformed_request(base_url, session)
    passed.append("malformed_request")

    if existing_model_ref is None:
        model_ref = check_train_flow(base_url, session, hparams=train_hparams)
        passed.append("train_flow")
    else:
        model_ref = existing_model_ref

    check_predict_empty(base_url, session, model_ref)
    passed.append("predict_empty")

    check_predict_alignment(base_url, session, model_ref)
    passed.append("predict_alignment")

    return passed
