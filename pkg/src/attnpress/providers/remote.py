"""HTTP clients for real attention servers and chat-completion generators.

Both clients retry transport-class failures (connection errors, timeouts,
5xx) with exponential backoff, three attempts total; anything else is
treated as a caller error and surfaces immediately. The ``session``
argument accepts any object with requests' ``post`` signature, which is how
tests substitute recorded transports.
"""

from __future__ import annotations

import os
import time

import requests

from ..attention import AttentionSnapshot
from ..errors import GeneratorError, ProviderError, SnapshotError
from .base import AttentionRequest, GenerationRequest, GenerationResult

MAX_ATTEMPTS = 3
BACKOFF_BASE = 0.5  # seconds; attempt n sleeps BACKOFF_BASE * 2**n

_TRANSPORT_ERRORS = (requests.ConnectionError, requests.Timeout)


def _auth_headers(auth_env: str | None) -> dict[str, str]:
    if not auth_env:
        return {}
    secret = os.environ.get(auth_env)
    if not secret:
        raise ProviderError(f"auth environment variable {auth_env} is not set")
    return {"Authorization": f"Bearer {secret}"}


def _post_with_retries(session, url, payload, headers, timeout, sleep, error_cls):
    last = None
    for attempt in range(MAX_ATTEMPTS):
        if attempt:
            sleep(BACKOFF_BASE * 2 ** (attempt - 1))
        try:
            resp = session.post(url, json=payload, headers=headers, timeout=timeout)
        except _TRANSPORT_ERRORS as exc:
            last = error_cls(f"transport failure calling {url}: {exc}", retriable=True)
            continue
        if resp.status_code >= 500:
            last = error_cls(f"{url} returned {resp.status_code}", retriable=True)
            continue
        if resp.status_code != 200:
            raise error_cls(f"{url} returned {resp.status_code}: {resp.text[:200]}")
        return resp.json()
    raise last


class RemoteAttentionClient:
    """Speaks POST {base_url}/v1/attention."""

    def __init__(self, base_url, *, session=None, timeout=60.0, auth_env=None,
                 sleep=time.sleep):
        self.url = base_url.rstrip("/") + "/v1/attention"
        self.session = session or requests.Session()
        self.timeout = timeout
        self.auth_env = auth_env
        self._sleep = sleep

    def fetch(self, req: AttentionRequest) -> AttentionSnapshot:
        payload = {"text": req.document, "task": req.task, "layer": req.layer}
        body = _post_with_retries(
            self.session, self.url, payload, _auth_headers(self.auth_env),
            self.timeout, self._sleep, ProviderError,
        )
        try:
            return AttentionSnapshot(
                layer=int(body["layer"]),
                heads=body["heads"],
                token_offsets=tuple((int(s), int(e)) for s, e in body["token_offsets"]),
                task_token_count=int(body["task_token_count"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderError(f"malformed attention response: {exc}") from exc
        except SnapshotError as exc:
            raise ProviderError(f"invalid attention response: {exc}") from exc


class RemoteGenerator:
    """Speaks a chat-completions-style endpoint returning {text, usage, finish_reason}."""

    def __init__(self, endpoint, *, model="", session=None, timeout=120.0,
                 auth_env=None, sleep=time.sleep):
        self.endpoint = endpoint
        self.model = model
        self.session = session or requests.Session()
        self.timeout = timeout
        self.auth_env = auth_env
        self._sleep = sleep

    def generate(self, req: GenerationRequest) -> GenerationResult:
        messages = []
        if req.system is not None:
            messages.append({"role": "system", "content": req.system})
        messages.append({"role": "user", "content": req.user})
        payload = {
            "model": req.model or self.model,
            "messages": messages,
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
        }
        body = _post_with_retries(
            self.session, self.endpoint, payload, _auth_headers(self.auth_env),
            self.timeout, self._sleep, GeneratorError,
        )
        try:
            finish = str(body.get("finish_reason", "stop"))
            if finish == "content_filter":
                raise GeneratorError("generation refused by content policy", payload=body)
            text = str(body["text"])
            usage = body.get("usage") or {}
            result = GenerationResult(
                text=text,
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
                finish_reason=finish,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise GeneratorError(f"malformed generation response: {exc}") from exc
        if not result.text:
            raise GeneratorError("generator returned empty text", payload=body)
        return result
