"""HTTP client for score protocol v1, shared by the external reranker and evaluator.

Request (POST, ``application/json``)::

    {"question": str, "reference": str | null, "candidates": [str, ...]}

Response::

    {"scores": [number, ...]}   # one per candidate, same order

Scores are clamped to [0, 1]. If ``RWS_ENDPOINT_TOKEN`` is set it is sent as
``Authorization: Bearer <token>``.
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor

import requests

log = logging.getLogger(__name__)

TOKEN_ENV = "RWS_ENDPOINT_TOKEN"
DEFAULT_BATCH_SIZE = 64
DEFAULT_MAX_IN_FLIGHT = 4
ATTEMPTS = 3
BACKOFF_SECONDS = 0.5


class ScoringError(Exception):
    pass


class ServiceUnavailableError(ScoringError):
    """Network or HTTP failure that persisted through every retry."""


class ProtocolError(ScoringError):
    """The service answered, but not with a valid score list."""


def clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def _parse_scores(body, expected: int, batch_no: int) -> list[float]:
    if not isinstance(body, dict) or not isinstance(body.get("scores"), list):
        raise ProtocolError(f"batch {batch_no}: response has no 'scores' list")
    scores = body["scores"]
    if len(scores) != expected:
        raise ProtocolError(f"batch {batch_no}: expected {expected} scores, got {len(scores)}")
    out = []
    for s in scores:
        if isinstance(s, bool) or not isinstance(s, (int, float)) or not math.isfinite(s):
            raise ProtocolError(f"batch {batch_no}: non-numeric score {s!r}")
        out.append(clamp01(float(s)))
    return out


class ScoreClient:
    def __init__(
        self,
        endpoint: str,
        batch_size: int = DEFAULT_BATCH_SIZE,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        timeout: float = 30.0,
        backoff: float | None = None,
        token: str | None = None,
    ):
        if not endpoint:
            raise ValueError("endpoint is required")
        if batch_size < 1:
            raise ValueError("batch_size must be positive")
        self.endpoint = endpoint
        self.batch_size = batch_size
        self.max_in_flight = max_in_flight
        self.timeout = timeout
        self.backoff = BACKOFF_SECONDS if backoff is None else backoff
        self.token = token if token is not None else os.environ.get(TOKEN_ENV)

    def _post(self, payload: dict, batch_no: int) -> list[float]:
        headers = {"Content-Type": "application/json; charset=utf-8"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        last_exc: Exception | None = None
        for attempt in range(ATTEMPTS):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = requests.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
                resp.raise_for_status()
            except requests.HTTPError as exc:
                status = exc.response.status_code
                if status < 500 and status != 429:
                    raise ServiceUnavailableError(f"batch {batch_no}: {self.endpoint} rejected the request ({status})") from exc
                log.warning("batch %d attempt %d failed: %s", batch_no, attempt + 1, exc)
                last_exc = exc
                continue
            except requests.RequestException as exc:
                log.warning("batch %d attempt %d failed: %s", batch_no, attempt + 1, exc)
                last_exc = exc
                continue
            try:
                body = resp.json()
            except ValueError as exc:
                raise ProtocolError(f"batch {batch_no}: response is not JSON") from exc
            return _parse_scores(body, len(payload["candidates"]), batch_no)
        raise ServiceUnavailableError(
            f"batch {batch_no}: {self.endpoint} failed after {ATTEMPTS} attempts ({last_exc})"
        ) from last_exc

    def score(self, question: str, reference: str | None, candidates: list[str]) -> list[float]:
        """Score candidates in batches; output order matches input order."""
        bs = self.batch_size
        batches = [candidates[i:i + bs] for i in range(0, len(candidates), bs)]
        payloads = [{"question": question, "reference": reference, "candidates": b} for b in batches]
        if len(payloads) <= 1 or self.max_in_flight <= 1:
            results = [self._post(p, i) for i, p in enumerate(payloads)]
        else:
            with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
                results = list(pool.map(self._post, payloads, range(len(payloads))))
        return [s for r in results for s in r]
