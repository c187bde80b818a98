"""Client for an external text-generation endpoint.

Wire protocol: POST a flat JSON object
``{prompt, n, max_tokens, temperature, top_p, greedy}``; the server answers
with a JSON list of ``{text, token_count, finished}``.  Generation only:
parameters of the served model are never touched.
"""
from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass

import requests

from .errors import ConnectionFailure, HTTPStatusError, SchemaMismatch

log = logging.getLogger(__name__)

URL_ENV = "TAILORED_RL_ADAPTER_URL"


@dataclass(frozen=True)
class Completion:
    text: str
    token_count: int
    finished: bool


def build_request(prompt: str, n: int, max_tokens: int, temperature: float = 0.6,
                  top_p: float = 0.95, greedy: bool = False) -> dict:
    if greedy:
        temperature, top_p = 0.0, 1.0
    return {"prompt": prompt, "n": int(n), "max_tokens": int(max_tokens),
            "temperature": float(temperature), "top_p": float(top_p),
            "greedy": bool(greedy)}


def parse_completions(payload, n: int) -> list[Completion]:
    if not isinstance(payload, list):
        raise SchemaMismatch("response body is not a list")
    if len(payload) != n:
        raise SchemaMismatch(f"expected {n} completions, got {len(payload)}")
    out = []
    for item in payload:
        try:
            text, count, finished = item["text"], item["token_count"], item["finished"]
        except (KeyError, TypeError):
            raise SchemaMismatch(f"malformed completion {item!r}") from None
        if not isinstance(text, str) or not isinstance(finished, bool) \
                or not isinstance(count, int) or isinstance(count, bool) or count < 0:
            raise SchemaMismatch(f"malformed completion {item!r}")
        out.append(Completion(text, count, finished))
    return out


class GenerationClient:
    """Retries 5xx answers and timeouts up to `max_retries` times; never 4xx."""

    def __init__(self, url: str, timeout_ms: int = 60000, max_retries: int = 2,
                 backoff_s: float = 0.5, session: requests.Session | None = None):
        self.url = url
        self.timeout_ms = timeout_ms
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self.session = session or requests.Session()

    @classmethod
    def from_config(cls, adapter_cfg: dict) -> "GenerationClient":
        url = os.environ.get(URL_ENV) or adapter_cfg.get("url")
        if not url:
            raise ValueError("adapter.url is not configured")
        return cls(url, timeout_ms=int(adapter_cfg.get("timeout_ms", 60000)),
                   max_retries=int(adapter_cfg.get("max_retries", 2)))

    def post(self, body: dict):
        last: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff_s * attempt)
            try:
                resp = self.session.post(self.url, json=body, timeout=self.timeout_ms / 1000)
            except requests.Timeout as exc:
                last = ConnectionFailure(f"timeout after {self.timeout_ms} ms: {exc}")
                continue
            except requests.ConnectionError as exc:
                last = ConnectionFailure(f"cannot reach {self.url}: {exc}")
                continue
            code = resp.status_code
            if not 200 <= code < 300:
                err = HTTPStatusError(f"HTTP {code} from {self.url}", code)
                if code < 500:
                    raise err
                log.warning("attempt %d: %s", attempt + 1, err)
                last = err
                continue
            try:
                return resp.json()
            except ValueError:
                raise SchemaMismatch("response body is not JSON") from None
        raise last

    def generate(self, prompt: str, n: int, max_tokens: int, temperature: float = 0.6,
                 top_p: float = 0.95, greedy: bool = False) -> list[Completion]:
        body = build_request(prompt, n, max_tokens, temperature, top_p, greedy)
        return parse_completions(self.post(body), n)


def adapter_generate(endpoint: str, request: dict, **client_kwargs) -> list[Completion]:
    prompt = request.get("prompt_text", request.get("prompt"))
    return GenerationClient(endpoint, **client_kwargs).generate(
        prompt, request["n"], request["max_tokens"], request.get("temperature", 0.6),
        request.get("top_p", 0.95), request.get("greedy", False))
