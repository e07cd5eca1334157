import pytest
from fastapi.testclient import TestClient

from commonsense_adapter.app import create_app


@pytest.fixture(scope="module")
def client(scorer):
    return TestClient(create_app(scorer))


def test_word_prob_schema_and_range(client):
    resp = client.post("/", json={"op": "word_prob", "event": "Tom won the race .",
                                  "dimension": "xReact", "word": "happy"})
    assert resp.status_code == 200
    body = resp.json()
    assert set(body) == {"prob"}
    assert 0.0 <= body["prob"] <= 1.0
    assert "@" in resp.headers["X-Model-Identity"]


def test_generate_schema(client):
    resp = client.post("/", json={"op": "generate", "event": "Tom won the race .",
                                  "dimension": "xIntent"})
    assert resp.status_code == 200
    body = resp.json()
    assert set(body) == {"generated_text"}
    assert body["generated_text"].strip()


def test_identical_requests_get_identical_responses(client):
    payload = {"op": "word_prob", "event": "Mary lost her keys .",
               "dimension": "oReact", "word": "sad"}
    first = client.post("/", json=payload).json()
    second = client.post("/", json=payload).json()
    assert first == second


def test_unknown_op_is_bad_request(client):
    resp = client.post("/", json={"op": "sample", "event": "x", "dimension": "xReact"})
    assert resp.status_code == 400
    body = resp.json()
    assert body["error"] == "bad_request"
    assert "op" in body["detail"]


def test_word_prob_without_word_is_bad_request(client):
    resp = client.post("/", json={"op": "word_prob", "event": "x", "dimension": "xReact"})
    assert resp.status_code == 400
    assert resp.json()["error"] == "bad_request"


def test_unknown_dimension_is_bad_request(client):
    resp = client.post("/", json={"op": "generate", "event": "x", "dimension": "zReact"})
    assert resp.status_code == 400


def test_empty_event_is_bad_request(client):
    resp = client.post("/", json={"op": "generate", "event": "  ", "dimension": "xReact"})
    assert resp.status_code == 400


def test_non_json_body_is_bad_request(client):
    resp = client.post("/", content=b"not json", headers={"Content-Type": "application/json"})
    assert resp.status_code == 400
    assert resp.json()["error"] == "bad_request"


def test_health_reports_model_identity(client, scorer):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok", "model": scorer.identity}
    assert resp.headers["X-Model-Identity"] == scorer.identity
