"""Client for an OpenAI-compatible chat-completions endpoint."""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import httpx

from ..core import pixel_to_world
from ..errors import MalformedOutputError, TransportError
from .protocol import assemble_prompt, encode_payload, load_system_prompt, parse_model_output
from .results import VLM, LocalizationResult

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = "http://localhost:8000/v1"
    model: str = ""
    token_env: str = "OPENAI_API_KEY"
    timeout: float = 120.0
    max_retries: int = 2
    max_in_flight: int = 4
    trace: bool = False

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if not self.timeout > 0:
            raise ValueError("timeout must be positive")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


class AuthError(TransportError):
    pass


class VlmClient:
    """Sends localization prompts and parses the replies.

    ``transport`` lets tests plug in an ``httpx.MockTransport``.
    """

    def __init__(self, config: EndpointConfig, system_text: str | None = None, transport=None):
        self.config = config
        self.system_text = system_text if system_text is not None else load_system_prompt()
        self._client = httpx.Client(timeout=config.timeout, transport=transport)

    def close(self):
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.token_env) if self.config.token_env else None
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, payload: dict) -> str:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        body = encode_payload(payload)
        if self.config.trace:
            log.info("POST %s headers=%s body=%s", url, _redacted(self._headers()), body.decode("utf-8")[:4000])
        try:
            resp = self._client.post(url, content=body, headers=self._headers())
        except httpx.HTTPError as exc:
            raise TransportError(f"{type(exc).__name__}: {exc}") from exc
        if self.config.trace:
            log.info("HTTP %s body=%s", resp.status_code, resp.text[:4000])
        if resp.status_code in (401, 403):
            raise AuthError(f"endpoint rejected credentials (HTTP {resp.status_code})")
        if resp.status_code >= 400:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response shape: {exc}") from exc
        if isinstance(content, list):
            content = "".join(part.get("text", "") for part in content if isinstance(part, dict))
        return content or ""

    def localize(self, bev_png: bytes | None, graph, hints, georef, query_id: str = "") -> LocalizationResult:
        """Never raises for remote misbehavior; failures become failed results."""
        try:
            payload = assemble_prompt(graph, hints, self.system_text, bev_png, self.config.model)
        except Exception as exc:  # noqa: BLE001
            return LocalizationResult.failed(query_id, VLM, exc, attempts=0)
        attempts = 0
        raw = None
        last_error: Exception | None = None
        for _ in range(self.config.max_retries + 1):
            attempts += 1
            try:
                raw = self.complete(payload)
            except AuthError as exc:
                return LocalizationResult.failed(query_id, VLM, exc, raw, attempts)
            except TransportError as exc:
                last_error = exc
                continue
            try:
                pred = parse_model_output(raw, georef.width_px, georef.height_px, n_expected=len(hints))
            except MalformedOutputError as exc:
                last_error = exc
                log.debug("query %s attempt %d: %s", query_id, attempts, exc)
                continue
            return LocalizationResult(
                query_id,
                pixel_to_world(pred.point_2d, georef),
                pred.point_2d,
                pred.assignments,
                VLM,
                raw,
                attempts=attempts,
            )
        return LocalizationResult.failed(
            query_id, VLM, f"retries exhausted: {last_error}", raw, attempts
        )


def _redacted(headers: dict) -> str:
    safe = {k: ("Bearer ***" if k.lower() == "authorization" else v) for k, v in headers.items()}
    return json.dumps(safe, sort_keys=True)


def vlm_localize(endpoint, bev_png, graph, hints, georef, query_id="", transport=None) -> LocalizationResult:
    if isinstance(endpoint, VlmClient):
        return endpoint.localize(bev_png, graph, hints, georef, query_id)
    with VlmClient(endpoint, transport=transport) as client:
        return client.localize(bev_png, graph, hints, georef, query_id)


def localize_batch(client: VlmClient, items) -> list[LocalizationResult]:
    """Run many queries with at most ``max_in_flight`` concurrent requests.

    ``items`` yields ``(query_id, bev_png, graph, hints, georef)``.  Results
    come back sorted by query id.
    """
    items = list(items)

    def run(item):
        qid, png, graph, hints, georef = item
        return client.localize(png, graph, hints, georef, qid)

    with ThreadPoolExecutor(max_workers=client.config.max_in_flight) as pool:
        results = list(pool.map(run, items))
    return sorted(results, key=lambda r: r.query_id)
