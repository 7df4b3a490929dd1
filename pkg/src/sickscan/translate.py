"""Machine-translation provider layer with persistent caching and retries.

Providers implement a small contract: ``translate(text, src, tgt)`` plus a
declared batch size and requests-per-second budget. Deterministic mock
providers (identity, token-map, reversing) ship for tests and offline
dataset construction; a remote HTTP provider covers real services. Every
fetched translation is cached on disk keyed by
sha256(provider | src | tgt | NFC text), so repeated runs are reproducible
and never re-bill.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import string
import tempfile
import threading
import time
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence, runtime_checkable

import requests

from sickscan.corpus import Document

log = logging.getLogger(__name__)

DEFAULT_PARALLELISM = 4
DEFAULT_RETRIES = 3
DEFAULT_BACKOFF_SECONDS = 0.5


class TranslateError(Exception):
    pass


class ProviderError(TranslateError):
    """A single translate call failed; retryable."""


class ProviderUnavailable(TranslateError):
    """All retries exhausted while partial-failure mode is off; batch aborts."""


@dataclass(frozen=True)
class TranslationFailure:
    doc_id: str
    error: str
    attempts: int


class TranslationFailures(TranslateError):
    def __init__(self, failures: Sequence[TranslationFailure]):
        super().__init__(f"{len(failures)} documents failed to translate")
        self.failures = tuple(failures)


@dataclass(frozen=True)
class TranslationRecord:
    source_doc_id: str
    src: str
    tgt: str
    source_text: str
    translated_text: str
    provider: str
    fetched_at: float

    def __post_init__(self):
        if self.src == self.tgt:
            raise ValueError("source and target language must differ")
        if not self.translated_text:
            raise ValueError("translated text must be non-empty")


class Clock:
    """Wall-clock seconds plus sleep; swap in a fake for tests."""

    def now(self) -> float:
        return time.time()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


@runtime_checkable
class TranslationProvider(Protocol):
    name: str
    max_batch_size: int
    requests_per_second: float | None

    def translate(self, text: str, src: str, tgt: str) -> str: ...


class IdentityProvider:
    """Returns the input text untouched; the cheapest deterministic mock."""

    name = "mock-identity"
    max_batch_size = 1000
    requests_per_second = None

    def translate(self, text: str, src: str, tgt: str) -> str:
        return text


class ReversingProvider:
    """Reverses the text; an adversarial mock that destroys token overlap."""

    name = "mock-reversing"
    max_batch_size = 1000
    requests_per_second = None

    def translate(self, text: str, src: str, tgt: str) -> str:
        return text[::-1]


class TokenMapProvider:
    """Per-language-pair dictionary substitution.

    Tokens are split on whitespace; leading and trailing punctuation is
    preserved and the core token is looked up case-folded. Unknown tokens
    pass through unchanged.
    """

    name = "mock-token-map"
    max_batch_size = 1000
    requests_per_second = None

    _EDGE = string.punctuation + "¡¿。！？"

    def __init__(self, tables: Mapping[tuple[str, str], Mapping[str, str]]):
        self.tables = {pair: dict(table) for pair, table in tables.items()}

    @classmethod
    def from_tsv(cls, path: Path | str, src: str, tgt: str) -> "TokenMapProvider":
        table = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            source_token, _, target_token = line.partition("\t")
            table[source_token.casefold()] = target_token
        return cls({(src, tgt): table})

    def translate(self, text: str, src: str, tgt: str) -> str:
        if (src, tgt) not in self.tables:
            raise ProviderError(f"no token map for {src}->{tgt}")
        table = self.tables[(src, tgt)]
        out = []
        for token in text.split():
            core = token.strip(self._EDGE)
            mapped = table.get(core.casefold())
            if mapped is None or not core:
                out.append(token)
            else:
                head, tail = token.split(core, 1)
                out.append(head + mapped + tail)
        return " ".join(out)


@dataclass(frozen=True)
class ProviderProfile:
    """Connection settings for a remote HTTP translation service."""

    name: str
    endpoint: str
    api_key_env: str = ""
    query_field: str = "q"
    source_field: str = "source"
    target_field: str = "target"
    result_field: str = "translatedText"
    max_batch_size: int = 100
    requests_per_second: float | None = 10.0
    timeout_seconds: float = 30.0


class RemoteHTTPProvider:
    """POSTs JSON to a translation endpoint per its provider profile."""

    def __init__(self, profile: ProviderProfile, session: requests.Session | None = None):
        self.profile = profile
        self.name = profile.name
        self.max_batch_size = profile.max_batch_size
        self.requests_per_second = profile.requests_per_second
        self._session = session or requests.Session()

    def translate(self, text: str, src: str, tgt: str) -> str:
        body = {
            self.profile.query_field: text,
            self.profile.source_field: src,
            self.profile.target_field: tgt,
        }
        headers = {}
        if self.profile.api_key_env:
            key = os.environ.get(self.profile.api_key_env, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        try:
            resp = self._session.post(
                self.profile.endpoint,
                json=body,
                headers=headers,
                timeout=self.profile.timeout_seconds,
            )
        except requests.RequestException as exc:
            raise ProviderError(f"request failed: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            result = resp.json()[self.profile.result_field]
        except (ValueError, KeyError) as exc:
            raise ProviderError(f"bad response payload: {exc}") from exc
        if not isinstance(result, str) or not result:
            raise ProviderError("empty translation in response")
        return result


def cache_key(provider: str, src: str, tgt: str, text: str) -> str:
    normalized = unicodedata.normalize("NFC", text)
    payload = "\n".join((provider, src, tgt, normalized))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class MemoryCache:
    """Dict-backed cache for tests and throwaway runs."""

    def __init__(self):
        self._data: dict[str, str] = {}

    def get(self, key: str) -> str | None:
        return self._data.get(key)

    def put(self, key: str, value: str) -> None:
        self._data[key] = value


class DirectoryCache:
    """One file per key; atomic rename on write, concurrent reads are safe."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> str | None:
        path = self._path(key)
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        except (OSError, ValueError):
            log.warning("unreadable cache entry %s, treating as miss", path.name)
            return None
        return obj.get("translated_text")

    def put(self, key: str, value: str) -> None:
        with self._write_lock:
            fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    json.dump({"translated_text": value}, fh, ensure_ascii=False)
                os.replace(tmp, self._path(key))
            except BaseException:
                try:
                    os.unlink(tmp)
                except OSError:
                    pass
                raise


class _RateLimiter:
    """Enforces a minimum spacing of 1/rps between provider calls."""

    def __init__(self, requests_per_second: float | None, clock: Clock):
        self._interval = 1.0 / requests_per_second if requests_per_second else 0.0
        self._clock = clock
        self._lock = threading.Lock()
        self._next_allowed = 0.0

    def wait(self) -> None:
        if self._interval <= 0:
            return
        with self._lock:
            now = self._clock.now()
            delay = self._next_allowed - now
            start = max(now, self._next_allowed)
            self._next_allowed = start + self._interval
        if delay > 0:
            self._clock.sleep(delay)


@dataclass
class TranslationBatch:
    """Successful records in input order, plus what went wrong and why."""

    records: list[TranslationRecord]
    failures: list[TranslationFailure] = field(default_factory=list)
    cache_hits: int = 0
    provider_calls: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures


def translate_batch(
    provider: TranslationProvider,
    docs: Sequence[Document],
    tgt: str,
    cache=None,
    *,
    parallelism: int = DEFAULT_PARALLELISM,
    max_retries: int = DEFAULT_RETRIES,
    backoff_seconds: float = DEFAULT_BACKOFF_SECONDS,
    partial_failures: bool = True,
    clock: Clock | None = None,
) -> TranslationBatch:
    """Translate documents to ``tgt``, serving cache hits first.

    Misses are fetched with at most ``parallelism`` concurrent requests,
    each retried ``max_retries`` times with exponential backoff, and
    written to the cache before return. Output order always matches input
    order regardless of completion order. With ``partial_failures`` on,
    documents that exhaust their retries land in the failure report; off,
    the first exhausted document aborts the batch with ProviderUnavailable.
    """
    clock = clock or Clock()
    for doc in docs:
        if doc.lang == tgt:
            raise ValueError(f"document {doc.id!r} is already in {tgt!r}")

    batch = TranslationBatch(records=[])
    results: list[TranslationRecord | None] = [None] * len(docs)
    misses: list[int] = []
    keys: list[str] = []
    for i, doc in enumerate(docs):
        key = cache_key(provider.name, doc.lang, tgt, doc.text)
        keys.append(key)
        cached = cache.get(key) if cache is not None else None
        if cached is not None:
            batch.cache_hits += 1
            results[i] = TranslationRecord(
                source_doc_id=doc.id,
                src=doc.lang,
                tgt=tgt,
                source_text=doc.text,
                translated_text=cached,
                provider=provider.name,
                fetched_at=clock.now(),
            )
        else:
            misses.append(i)

    limiter = _RateLimiter(provider.requests_per_second, clock)
    calls_lock = threading.Lock()

    def fetch(i: int) -> TranslationRecord | TranslationFailure:
        doc = docs[i]
        last_error = "unknown error"
        for attempt in range(1, max_retries + 1):
            limiter.wait()
            with calls_lock:
                batch.provider_calls += 1
            try:
                translated = provider.translate(doc.text, doc.lang, tgt)
            except ProviderError as exc:
                last_error = str(exc)
                if attempt < max_retries:
                    clock.sleep(backoff_seconds * 2 ** (attempt - 1))
                continue
            if cache is not None:
                cache.put(keys[i], translated)
            return TranslationRecord(
                source_doc_id=doc.id,
                src=doc.lang,
                tgt=tgt,
                source_text=doc.text,
                translated_text=translated,
                provider=provider.name,
                fetched_at=clock.now(),
            )
        return TranslationFailure(doc_id=doc.id, error=last_error, attempts=max_retries)

    if misses:
        with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
            for i, outcome in zip(misses, pool.map(fetch, misses)):
                if isinstance(outcome, TranslationFailure):
                    if not partial_failures:
                        raise ProviderUnavailable(
                            f"document {outcome.doc_id!r} failed after "
                            f"{outcome.attempts} attempts: {outcome.error}"
                        )
                    batch.failures.append(outcome)
                else:
                    results[i] = outcome

    batch.records = [r for r in results if r is not None]
    if batch.failures:
        log.warning(
            "%d/%d documents failed to translate to %s",
            len(batch.failures),
            len(docs),
            tgt,
        )
    return batch


def write_failure_report(failures: Sequence[TranslationFailure], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = [
        {"doc_id": f.doc_id, "error": f.error, "attempts": f.attempts}
        for f in failures
    ]
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path
