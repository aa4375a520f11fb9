"""Record/replay transports so remote-client behavior is testable offline.

A recording session wraps a live one and appends each exchange to a JSONL
golden file; a replay session serves those exchanges back in order,
checking that the request matches what was recorded. Records look like
``{"request": {"url","json"}, "response": {"status","json"}}``; a record
may instead carry ``{"error": "connection"|"timeout"}`` to simulate a
transport failure (used to exercise the retry path).
"""

from __future__ import annotations

import json
from pathlib import Path

import requests

from ..errors import ProviderError


class _CannedResponse:
    def __init__(self, status_code: int, body):
        self.status_code = status_code
        self._body = body
        self.text = json.dumps(body)

    def json(self):
        return self._body


class RecordingSession:
    def __init__(self, inner, path):
        self.inner = inner
        self.path = Path(path)

    def post(self, url, json=None, headers=None, timeout=None):
        resp = self.inner.post(url, json=json, headers=headers, timeout=timeout)
        record = {
            "request": {"url": url, "json": json},
            "response": {"status": resp.status_code, "json": resp.json()},
        }
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(_dumps(record) + "\n")
        return resp


class ReplaySession:
    """Serves recorded exchanges in order; mismatched requests fail loudly."""

    def __init__(self, path):
        self.path = Path(path)
        with open(self.path, encoding="utf-8") as fh:
            self.records = [json.loads(line) for line in fh if line.strip()]
        self.cursor = 0

    def post(self, url, json=None, headers=None, timeout=None):
        if self.cursor >= len(self.records):
            raise ProviderError(f"replay exhausted after {len(self.records)} exchanges")
        record = self.records[self.cursor]
        self.cursor += 1
        if "error" in record:
            kind = record["error"]
            if kind == "timeout":
                raise requests.Timeout(f"recorded timeout for {url}")
            raise requests.ConnectionError(f"recorded connection error for {url}")
        want = record["request"]
        if want["url"] != url or want["json"] != json:
            raise ProviderError(
                f"replay mismatch at exchange {self.cursor}: "
                f"expected {want['url']}, got {url}"
            )
        return _CannedResponse(record["response"]["status"], record["response"]["json"])


def _dumps(record) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


def write_fixture(path, records) -> None:
    """Write a replay fixture directly (for fixtures authored in tests)."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(_dumps(record) + "\n")
