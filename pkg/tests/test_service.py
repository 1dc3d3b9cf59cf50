"""HTTP API surface of the registry and procurement front end."""

import pytest
from fastapi.testclient import TestClient

from clic.service import create_app


def descriptor(id="cam-1", price=2.0, **kw):
    base = {
        "id": id,
        "kind": "sensing",
        "nature": "machine",
        "capability": "sense.vision.camera",
        "posted_terms": {
            "price": price, "max_latency": 100, "min_quality": 0.8,
            "capacity": 5.0, "term": [0, 10_000],
        },
        "endpoint": f"sim://{id}",
        "output_type": "image",
    }
    base.update(kw)
    return base


def blueprint_doc(max_price=5.0):
    return {
        "$schema": "clic-blueprint/1",
        "system_id": "sys-1",
        "slots": [{"slot_id": "cam", "query": {
            "kind": "sensing", "nature": "any", "capability": "sense.vision",
            "max_price": max_price, "min_quality": 0.5, "max_latency": 500,
            "term": [0, 5000],
        }}],
        "edges": [],
        "start_time": 0,
        "end_time": 5000,
    }


@pytest.fixture()
def client():
    return TestClient(create_app())


class TestComponents:
    def test_register_and_list(self, client):
        r = client.post("/components", json=descriptor())
        assert r.status_code == 200
        assert r.json() == {"registered": "cam-1", "status": "available"}
        listed = client.get("/components").json()["components"]
        assert [e["descriptor"]["id"] for e in listed] == ["cam-1"]

    def test_invalid_descriptor_400_with_codes(self, client):
        r = client.post("/components", json=descriptor(input_type="image"))
        assert r.status_code == 400
        assert "sensing-has-input" in r.json()["codes"]

    def test_malformed_body_400(self, client):
        r = client.post("/components", json={"id": "x"})
        assert r.status_code == 400
        assert r.json()["error"] == "malformed-descriptor"

    def test_duplicate_conflict_409(self, client):
        client.post("/components", json=descriptor())
        r = client.post("/components", json=descriptor(price=9.0))
        assert r.status_code == 409
        assert r.json()["error"] == "duplicate-id"

    def test_deregister(self, client):
        client.post("/components", json=descriptor())
        assert client.delete("/components/cam-1").status_code == 200
        assert client.delete("/components/cam-1").json()["deregistered"] == "cam-1"
        assert client.delete("/components/ghost").status_code == 404

    def test_query_filter(self, client):
        client.post("/components", json=descriptor("cam-1", price=2.0))
        client.post("/components", json=descriptor("cam-2", price=9.0))
        q = ('{"kind": "sensing", "nature": "any", "capability": "sense.vision",'
             ' "max_price": 5.0, "min_quality": 0.5, "max_latency": 500,'
             ' "term": [0, 5000]}')
        hits = client.get("/components", params={"query": q}).json()["components"]
        assert [e["descriptor"]["id"] for e in hits] == ["cam-1"]

    def test_bad_query_400(self, client):
        assert client.get("/components", params={"query": "{oops"}).status_code == 400

    def test_availability_patch(self, client):
        client.post("/components", json=descriptor())
        r = client.patch("/components/cam-1/availability",
                         json={"capacity": 9.0, "window": [0, 500]})
        assert r.status_code == 200
        assert r.json()["descriptor"]["posted_terms"]["capacity"] == 9.0

    def test_heartbeat(self, client):
        client.post("/components", json=descriptor())
        assert client.post("/components/cam-1/heartbeat").json() == {"ok": True}
        assert client.post("/components/ghost/heartbeat").status_code == 404


class TestSystems:
    def test_procure_blueprint(self, client):
        client.post("/components", json=descriptor())
        r = client.post("/systems", json={"blueprint": blueprint_doc()})
        assert r.status_code == 200
        body = r.json()
        assert body["system_id"] == "sys-1"
        assert body["contracts"]["cam"]["state"] == "reserved"
        status = client.get("/systems/sys-1")
        assert status.status_code == 200

    def test_empty_pool_escalates_409(self, client):
        r = client.post("/systems", json={"blueprint": blueprint_doc()})
        assert r.status_code == 409
        assert r.json()["error"] == "insufficiency-escalation"
        assert r.json()["failed_slots"] == ["cam"]

    def test_syntax_error_400(self, client):
        r = client.post("/systems", json={"blueprint": {"system_id": "x"}})
        assert r.status_code == 400
        assert r.json()["error"] == "invalid-blueprint"

    def test_teleological_submission(self, client):
        # No matching components: translation succeeds, procurement
        # escalates, proving the translation path is wired through.
        r = client.post("/systems", json={"teleological": {
            "goal": "alert",
            "args": {"person": "kim", "location": "lobby", "sink": "lobby"},
        }})
        assert r.status_code == 409
        assert set(r.json()["failed_slots"]) == {"detect", "recognize", "alarm"}

    def test_unknown_goal_400(self, client):
        r = client.post("/systems", json={"teleological": {
            "goal": "teleport", "args": {},
        }})
        assert r.status_code == 400

    def test_unknown_system_404(self, client):
        assert client.get("/systems/nope").status_code == 404
