"""HTTP client for per-paper yearly citation counts.

Fetches citing-paper years from a scholarly-graph API, buckets them into
per-year counts, and caches one JSON file per paper so long runs survive
interruption. A token bucket keeps the request rate at or below the
configured limit; an offline fixture mode replaces the network entirely.
"""

from __future__ import annotations

import csv
import io
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping
from urllib.parse import quote

import requests

from .corpus import YEAR_MAX, YEAR_MIN, CitationRecord, dump_citations, load_citations
from .errors import DataError, NetworkError

log = logging.getLogger(__name__)

PAGE_LIMIT = 100
BACKOFF_BASE_SECONDS = 1.0
BACKOFF_FACTOR = 2.0
REQUEST_TIMEOUT_SECONDS = 30.0

# (url, headers) -> (status code, parsed JSON body or None)
HttpGet = Callable[[str, Mapping[str, str]], tuple[int, dict | None]]


@dataclass(frozen=True)
class ClientConfig:
    """Connection, pacing, and caching knobs for the citations client."""

    base_url: str = "https://api.semanticscholar.org"
    api_key: str | None = None
    requests_per_second: float = 1.0
    max_retries: int = 3
    cache_dir: str | Path = ".fice-cache"
    offline_fixture: str | Path | None = None

    def __post_init__(self):
        if not self.requests_per_second > 0:
            raise DataError("requests_per_second must be positive")
        if not 0 <= self.max_retries <= 10:
            raise DataError("max_retries must be between 0 and 10")
        if not self.base_url:
            raise DataError("base_url must be non-empty")


class TokenBucket:
    """Capacity-one token bucket: consecutive acquires are spaced >= 1/rate.

    Clock and sleep are injectable so the pacing contract can be tested on
    a simulated clock.
    """

    def __init__(
        self,
        rate_per_second: float,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not rate_per_second > 0:
            raise DataError("rate must be positive")
        self._rate = rate_per_second
        self._clock = clock
        self._sleep = sleep
        self._tokens = 1.0
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        """Block until a token is available, then consume it."""
        with self._lock:
            now = self._clock()
            self._tokens = min(1.0, self._tokens + (now - self._last) * self._rate)
            self._last = now
            if self._tokens < 1.0:
                wait = (1.0 - self._tokens) / self._rate
                self._sleep(wait)
                self._last = self._clock()
                self._tokens = 1.0
            self._tokens -= 1.0


def _requests_get(url: str, headers: Mapping[str, str]) -> tuple[int, dict | None]:
    try:
        response = requests.get(url, headers=dict(headers), timeout=REQUEST_TIMEOUT_SECONDS)
    except requests.RequestException as exc:
        raise NetworkError(f"request failed: {exc}") from exc
    try:
        body = response.json()
    except ValueError:
        body = None
    return response.status_code, body


class _FetchFailure(Exception):
    """Internal: one id could not be fetched; the batch continues."""


class CitationsClient:
    """Fetches and caches per-paper citation-year counts.

    Per-id failures are recorded in ``failures`` rather than aborting the
    batch; citing papers without a usable year are tallied in
    ``dropped_no_year``.
    """

    def __init__(
        self,
        config: ClientConfig,
        http_get: HttpGet | None = None,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._config = config
        self._http_get = http_get or _requests_get
        self._sleep = sleep
        self._bucket = TokenBucket(config.requests_per_second, clock=clock, sleep=sleep)
        self.failures: dict[str, str] = {}
        self.dropped_no_year = 0
        self.network_calls = 0
        self._fixture: dict[str, CitationRecord] | None = None

    # -- public API ---------------------------------------------------------

    def fetch_citations(
        self, ids: Iterable[str], force_refetch: bool = False
    ) -> dict[str, CitationRecord]:
        id_list = list(ids)
        if not id_list:
            raise DataError("fetch_citations needs at least one id")
        if self._config.offline_fixture is not None:
            return {doc_id: self._from_fixture(doc_id) for doc_id in id_list}

        records: dict[str, CitationRecord] = {}
        for doc_id in id_list:
            if not force_refetch:
                cached = self._read_cache(doc_id)
                if cached is not None:
                    records[doc_id] = cached
                    continue
            try:
                record = self._fetch_one(doc_id)
            except _FetchFailure as exc:
                self.failures[doc_id] = str(exc)
                log.warning("citations fetch failed for %s: %s", doc_id, exc)
                continue
            self._write_cache(record)
            records[doc_id] = record
        return records

    # -- fixture and cache ---------------------------------------------------

    def _from_fixture(self, doc_id: str) -> CitationRecord:
        if self._fixture is None:
            path = Path(self._config.offline_fixture)
            if not path.exists():
                raise DataError(f"offline fixture {path} does not exist")
            self._fixture = load_citations(path.read_text())
        record = self._fixture.get(doc_id)
        if record is None:
            log.warning("%s absent from offline fixture; empty record", doc_id)
            return CitationRecord(doc_id, {})
        return record

    def _cache_path(self, doc_id: str) -> Path:
        return Path(self._config.cache_dir) / f"{quote(doc_id, safe='')}.json"

    def _read_cache(self, doc_id: str) -> CitationRecord | None:
        path = self._cache_path(doc_id)
        if not path.exists():
            return None
        try:
            records = load_citations(path.read_text())
            return records[doc_id]
        except (DataError, KeyError) as exc:
            log.warning("ignoring unreadable cache entry %s: %s", path, exc)
            return None

    def _write_cache(self, record: CitationRecord) -> None:
        path = self._cache_path(record.doc_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f".{path.name}.tmp")
        tmp.write_text(dump_citations({record.doc_id: record}))
        os.replace(tmp, path)

    # -- network -------------------------------------------------------------

    def _fetch_one(self, doc_id: str) -> CitationRecord:
        per_year: dict[int, int] = {}
        offset = 0
        while True:
            body = self._request_page(doc_id, offset)
            if body is None:
                log.warning("%s not found by citations API; empty record", doc_id)
                return CitationRecord(doc_id, {})
            items = body.get("data", [])
            for item in items:
                year = (item.get("citingPaper") or {}).get("year")
                if not isinstance(year, int) or not YEAR_MIN <= year <= YEAR_MAX:
                    self.dropped_no_year += 1
                    continue
                per_year[year] = per_year.get(year, 0) + 1
            if "next" in body and body["next"] is not None:
                offset = int(body["next"])
            elif len(items) == PAGE_LIMIT:
                offset += PAGE_LIMIT
            else:
                return CitationRecord(doc_id, per_year)

    def _request_page(self, doc_id: str, offset: int) -> dict | None:
        url = (
            f"{self._config.base_url}/graph/v1/paper/{quote(doc_id, safe='')}/citations"
            f"?fields=year&offset={offset}&limit={PAGE_LIMIT}"
        )
        headers = {"x-api-key": self._config.api_key} if self._config.api_key else {}
        delay = BACKOFF_BASE_SECONDS
        last_reason = "no attempts made"
        for attempt in range(self._config.max_retries + 1):
            self._bucket.acquire()
            self.network_calls += 1
            try:
                status, body = self._http_get(url, headers)
            except NetworkError as exc:
                last_reason = str(exc)
            else:
                if status == 200 and body is not None:
                    return body
                if status == 404:
                    return None
                if status == 429 or status >= 500:
                    last_reason = f"HTTP {status}"
                else:
                    raise _FetchFailure(f"HTTP {status}")
            if attempt < self._config.max_retries:
                self._sleep(delay)
                delay *= BACKOFF_FACTOR
        raise _FetchFailure(f"retries exhausted: {last_reason}")


def write_citations_file(records: Mapping[str, CitationRecord], path: str | Path) -> None:
    """Write a combined citations JSON artifact (same format as the fixture)."""
    Path(path).write_text(dump_citations(dict(records)))


def api_key_from_env(var: str = "FICE_API_KEY") -> str | None:
    value = os.environ.get(var, "").strip()
    return value or None


def load_id_mapping(text: str) -> dict[str, str]:
    """Parse a doc_id,api_id CSV mapping local ids to API ids."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ["doc_id", "api_id"]:
        raise DataError(f"id mapping CSV: unexpected header {header}")
    mapping = {}
    for row in reader:
        if len(row) != 2 or not row[0] or not row[1]:
            raise DataError(f"id mapping CSV: bad row {row}")
        if row[0] in mapping:
            raise DataError(f"id mapping CSV: duplicate doc_id {row[0]}")
        mapping[row[0]] = row[1]
    return mapping
