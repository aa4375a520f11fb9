"""The HTTP surface: status codes, schema, and primary-client interoperability."""

import json
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from attnpress.providers import (
    AttentionRequest,
    RemoteAttentionClient,
    ReplaySession,
    render_prompt,
    write_fixture,
)

from attnshim import create_app

FIXTURES = Path(__file__).parent / "fixtures"

DOC = "Alpha beta. Gamma delta."
TASK = "Pick one."


@pytest.fixture()
def client(service):
    with TestClient(create_app(service)) as c:
        yield c


def test_attention_endpoint_happy_path(client):
    resp = client.post("/v1/attention", json={"text": DOC, "task": TASK, "layer": 1})
    assert resp.status_code == 200
    body = resp.json()
    assert set(body) == {
        "layer", "num_heads", "heads", "token_offsets", "task_token_count"
    }
    assert body["layer"] == 1
    heads = np.array(body["heads"])
    np.testing.assert_allclose(heads.sum(axis=1), 1.0, atol=1e-4)
    prompt = render_prompt(DOC, TASK)
    assert "".join(prompt[s:e] for s, e in body["token_offsets"]) == prompt


def test_healthz_reports_ready(client):
    resp = client.get("/healthz")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["layers"] == 3


def test_not_loaded_yet_is_503():
    bare = TestClient(create_app())  # no service, and startup never runs
    assert bare.get("/healthz").status_code == 503
    resp = bare.post("/v1/attention", json={"text": DOC, "task": TASK, "layer": 0})
    assert resp.status_code == 503


def test_loader_runs_at_startup(service):
    app = create_app(loader=lambda: service)
    with TestClient(app) as loaded:
        assert loaded.get("/healthz").status_code == 200


def test_layer_out_of_range_is_400(client):
    resp = client.post("/v1/attention", json={"text": DOC, "task": TASK, "layer": 99})
    assert resp.status_code == 400
    assert "layer" in resp.json()["detail"]


def test_overlong_input_is_413(client):
    text = " ".join(f"w{i}" for i in range(64))
    resp = client.post("/v1/attention", json={"text": text, "task": TASK, "layer": 0})
    assert resp.status_code == 413


def test_live_response_parses_in_the_remote_client(client, tmp_path):
    payload = {"text": DOC, "task": TASK, "layer": 1}
    resp = client.post("/v1/attention", json=payload)
    assert resp.status_code == 200
    body = resp.json()

    fixture = tmp_path / "exchange.jsonl"
    write_fixture(fixture, [{
        "request": {"url": "http://shim.test/v1/attention", "json": payload},
        "response": {"status": 200, "json": body},
    }])
    remote = RemoteAttentionClient("http://shim.test", session=ReplaySession(fixture))
    snap = remote.fetch(AttentionRequest(DOC, TASK, layer=1))
    assert snap.layer == 1
    assert snap.num_heads == body["num_heads"]
    np.testing.assert_array_equal(snap.heads, np.array(body["heads"]))
    assert list(snap.token_offsets) == [tuple(o) for o in body["token_offsets"]]
    assert snap.task_token_count == body["task_token_count"]


def test_committed_golden_matches_the_live_service(client):
    record = json.loads(
        (FIXTURES / "attention_exchange.jsonl").read_text(encoding="utf-8")
    )
    payload = record["request"]["json"]
    live = client.post("/v1/attention", json=payload).json()
    golden = record["response"]["json"]
    assert live["layer"] == golden["layer"]
    assert live["num_heads"] == golden["num_heads"]
    assert live["token_offsets"] == golden["token_offsets"]
    assert live["task_token_count"] == golden["task_token_count"]
    np.testing.assert_allclose(
        np.array(live["heads"]), np.array(golden["heads"]), atol=1e-6,
    )


def test_committed_golden_parses_in_the_remote_client():
    path = FIXTURES / "attention_exchange.jsonl"
    record = json.loads(path.read_text(encoding="utf-8"))
    req = record["request"]["json"]
    golden = record["response"]["json"]

    remote = RemoteAttentionClient("http://shim.test", session=ReplaySession(path))
    snap = remote.fetch(AttentionRequest(req["text"], req["task"], req["layer"]))
    # every response field survives the trip into the client's snapshot type
    assert snap.layer == golden["layer"]
    assert snap.num_heads == golden["num_heads"]
    assert snap.task_token_count == golden["task_token_count"]
    assert [list(pair) for pair in snap.token_offsets] == golden["token_offsets"]
    np.testing.assert_array_equal(snap.heads, np.array(golden["heads"]))
    prompt = render_prompt(req["text"], req["task"])
    assert "".join(prompt[s:e] for s, e in snap.token_offsets) == prompt
