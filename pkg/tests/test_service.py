"""HTTP service tests, driven in-process through FastAPI's TestClient.

Covers the endpoint matrix, the status-code mapping (201/400/404/409), the
one-audit-record-per-mutation property, context rebuilding after a process
restart, and registry files.
"""

import json

import pytest
from fastapi.testclient import TestClient

from reflect_machine.service import (
    create_app,
    fixture_registry,
    load_registry_file,
)
from reflect_machine.errors import ParseError

EXPECTED_BASE_QUESTIONS = [
    "h-q2-feature-effect",
    "h-q5-similar-profiles",
    "h-q10-older",
    "h-q3-missing-factor",
    "h-q4-follows",
]


@pytest.fixture()
def client(tmp_path):
    return TestClient(create_app(data_dir=tmp_path / "data"))


def make_session(client, model="health", case_name="base", **payload):
    resp = client.post("/sessions",
                       json={"model": model, "case_name": case_name, **payload})
    assert resp.status_code == 201, resp.text
    return resp.json()


def test_healthz(client):
    resp = client.get("/healthz")
    assert (resp.status_code, resp.json()) == (200, {"status": "ok"})


def test_models_lists_fixture_registry(client):
    body = client.get("/models").json()
    names = [m["name"] for m in body["models"]]
    assert names == ["education", "health"]
    health = body["models"][1]
    assert health["outcome_labels"] == ["treatment-indicated", "no-treatment"]
    assert [f["name"] for f in health["schema"]] == ["age", "resting_heart_rate"]
    assert set(health["sample_cases"]) == {"base", "incomplete", "outlier"}
    assert health["config"]["cf_grid_steps"] == 121
    assert health["packs"] == ["health", "generic"]


def test_create_session_from_sample_case(client):
    session = make_session(client)
    assert session["status"] == "open"
    assert session["model_name"] == "health"
    assert session["recommendation"]["predicted"] == "no-treatment"
    assert [q["template_id"] for q in session["questions"]] == EXPECTED_BASE_QUESTIONS


def test_create_session_from_inline_case(client):
    case = {"values": {"age": 48, "resting_heart_rate": 72}}
    resp = client.post("/sessions", json={"model": "health", "case": case})
    assert resp.status_code == 201
    assert resp.json()["recommendation"]["predicted"] == "no-treatment"


def test_create_with_overrides(client):
    session = make_session(client, overrides={
        "config": {"cf_grid_steps": 61},
        "policy": {"budget": 3},
    })
    assert session["config"]["cf_grid_steps"] == 61
    assert session["config"]["as_of"] == "2026-01-15"  # untouched entry value
    assert len(session["questions"]) == 3


def test_create_rejections(client):
    no_model = client.post("/sessions", json={"case_name": "base"})
    assert no_model.status_code == 404
    assert no_model.json()["error"] == "unknown_model"

    unknown = client.post("/sessions", json={"model": "finance", "case_name": "base"})
    assert unknown.status_code == 404
    assert "finance" in unknown.json()["message"]

    bad_case_name = client.post("/sessions",
                                json={"model": "health", "case_name": "typo"})
    assert bad_case_name.status_code == 400
    assert bad_case_name.json()["error"] == "schema_error"

    caseless = client.post("/sessions", json={"model": "health"})
    assert caseless.status_code == 400
    assert "case or a case_name" in caseless.json()["message"]

    bad_overrides = client.post("/sessions", json={
        "model": "health", "case_name": "base", "overrides": ["nope"]})
    assert bad_overrides.status_code == 400


def test_non_object_body_is_bad_request(client):
    resp = client.post("/sessions", json=[1, 2, 3])
    assert resp.status_code == 400
    assert resp.json()["error"] == "bad_request"


def test_show_session(client):
    sid = make_session(client)["session_id"]
    resp = client.get(f"/sessions/{sid}")
    assert resp.status_code == 200
    assert resp.json()["session_id"] == sid

    missing = client.get("/sessions/feedcafe")
    assert missing.status_code == 404
    assert missing.json()["error"] == "unknown_session"


def test_answer_endpoint(client):
    sid = make_session(client)["session_id"]
    resp = client.post(f"/sessions/{sid}/answers",
                       json={"question_index": 2, "text": "asked the patient"})
    assert resp.status_code == 200
    assert resp.json()["responses"] == {"2": "asked the patient"}

    out_of_range = client.post(f"/sessions/{sid}/answers",
                               json={"question_index": 99, "text": "x"})
    assert out_of_range.status_code == 400
    assert out_of_range.json()["error"] == "schema_error"

    missing_field = client.post(f"/sessions/{sid}/answers", json={"text": "x"})
    assert missing_field.status_code == 400
    assert "question_index" in missing_field.json()["message"]

    not_an_int = client.post(f"/sessions/{sid}/answers",
                             json={"question_index": "two", "text": "x"})
    assert not_an_int.status_code == 400
    assert "integer" in not_an_int.json()["message"]


def test_whatif_endpoint(client):
    sid = make_session(client)["session_id"]
    resp = client.post(f"/sessions/{sid}/whatif", json={"changes": {"age": 53}})
    assert resp.status_code == 200
    body = resp.json()
    assert body["result"]["predicted"] == "treatment-indicated"
    assert [q["template_id"] for q in body["extra_questions"]] == ["g-q10-boundary"]
    assert set(body["evidence"]) == {"proximity:age"}

    empty = client.post(f"/sessions/{sid}/whatif", json={"changes": {}})
    assert empty.status_code == 400
    assert "non-empty changes" in empty.json()["message"]

    invalid = client.post(f"/sessions/{sid}/whatif",
                          json={"changes": {"age": 500}})
    assert invalid.status_code == 400
    assert "invalid what-if changes" in invalid.json()["message"]


def test_decision_endpoint_and_409_after(client):
    sid = make_session(client)["session_id"]

    bad_label = client.post(f"/sessions/{sid}/decision",
                            json={"chosen": "maybe", "rationale": "hmm"})
    assert bad_label.status_code == 400

    resp = client.post(f"/sessions/{sid}/decision",
                       json={"chosen": "no-treatment",
                             "rationale": "watchful waiting"})
    assert resp.status_code == 200
    assert resp.json()["status"] == "finalized"

    for follow_up in (
        client.post(f"/sessions/{sid}/answers",
                    json={"question_index": 0, "text": "late"}),
        client.post(f"/sessions/{sid}/whatif", json={"changes": {"age": 53}}),
        client.post(f"/sessions/{sid}/decision",
                    json={"chosen": "no-treatment", "rationale": "again"}),
    ):
        assert follow_up.status_code == 409
        assert follow_up.json()["error"] == "session_finalized"


def test_audit_is_one_record_per_successful_mutation(client):
    sid = make_session(client)["session_id"]
    client.post(f"/sessions/{sid}/answers",
                json={"question_index": 0, "text": "first"})
    # a refused mutation must leave no trace
    client.post(f"/sessions/{sid}/answers", json={"question_index": 99, "text": "x"})
    client.post(f"/sessions/{sid}/whatif", json={"changes": {"age": 53}})
    client.post(f"/sessions/{sid}/decision",
                json={"chosen": "no-treatment", "rationale": "ok"})

    resp = client.get(f"/sessions/{sid}/audit")
    assert resp.status_code == 200
    assert resp.headers["content-type"].startswith("application/x-ndjson")
    records = [json.loads(line) for line in resp.text.splitlines()]
    assert [r["kind"] for r in records] == [
        "created", "questions_attached", "answered", "whatif", "finalized"]
    assert [r["seq"] for r in records] == [0, 1, 2, 3, 4]
    assert all(r["session_id"] == sid for r in records)


def test_audit_unknown_session(client):
    resp = client.get("/sessions/feedcafe/audit")
    assert resp.status_code == 404


def test_whatif_works_after_restart(tmp_path):
    data = tmp_path / "data"
    first = TestClient(create_app(data_dir=data))
    sid = make_session(first)["session_id"]

    # a fresh app over the same data dir has no in-memory context; the
    # registry is enough to rebuild it on demand
    second = TestClient(create_app(data_dir=data))
    resp = second.post(f"/sessions/{sid}/whatif", json={"changes": {"age": 53}})
    assert resp.status_code == 200
    assert resp.json()["result"]["predicted"] == "treatment-indicated"

    # ... but a service that does not carry the session's model cannot
    education_only = {"education": fixture_registry()["education"]}
    third = TestClient(create_app(registry=education_only, data_dir=data))
    refused = third.post(f"/sessions/{sid}/whatif", json={"changes": {"age": 53}})
    assert refused.status_code == 400
    assert "does not serve" in refused.json()["message"]


def test_registry_file(tmp_path):
    (tmp_path / "model.json").write_text(json.dumps({
        "schema": [{"name": "age", "kind": "numeric", "range": [0, 120],
                    "unit": "years"}],
        "outcome_labels": ["positive", "negative"],
        "form": {"type": "linear", "weights": {"age": 1.0}, "threshold": 50.0},
    }))
    (tmp_path / "case.json").write_text(json.dumps({"values": {"age": 48}}))
    registry_path = tmp_path / "registry.json"
    registry_path.write_text(json.dumps({
        "screening": {
            "model": "model.json",
            "packs": ["generic"],
            "description": "age screening",
            "sample_cases": {"base": "case.json"},
            "policy": {"budget": 4},
        },
    }))

    registry = load_registry_file(registry_path)
    assert set(registry) == {"screening"}
    client = TestClient(create_app(registry=registry, data_dir=tmp_path / "d"))

    listed = client.get("/models").json()["models"]
    assert [m["name"] for m in listed] == ["screening"]
    assert listed[0]["description"] == "age screening"

    session = make_session(client, model="screening")
    assert session["recommendation"]["predicted"] == "negative"


@pytest.mark.parametrize("raw, match", [
    ("[]", "map model names"),
    (json.dumps({"m": {"packs": ["generic"]}}), "needs model and packs"),
    ("{not json", "not valid JSON"),
])
def test_registry_file_rejections(tmp_path, raw, match):
    path = tmp_path / "registry.json"
    path.write_text(raw)
    with pytest.raises(ParseError, match=match):
        load_registry_file(path)


def test_registry_file_missing(tmp_path):
    with pytest.raises(ParseError, match="cannot read registry"):
        load_registry_file(tmp_path / "nope.json")


def test_cors_headers_when_configured(tmp_path):
    app = create_app(data_dir=tmp_path / "d",
                     cors_origins=("http://localhost:5173",))
    client = TestClient(app)
    resp = client.get("/healthz", headers={"Origin": "http://localhost:5173"})
    assert resp.headers["access-control-allow-origin"] == "http://localhost:5173"

    plain = TestClient(create_app(data_dir=tmp_path / "d2"))
    resp = plain.get("/healthz", headers={"Origin": "http://localhost:5173"})
    assert "access-control-allow-origin" not in resp.headers
