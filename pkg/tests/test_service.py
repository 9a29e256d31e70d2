from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from crowdstates.service.app import create_app
from crowdstates.trace import GOLDEN_TEXT


@pytest.fixture
def client() -> TestClient:
    return TestClient(create_app())


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_model_states(client):
    response = client.get("/model/states")
    assert response.status_code == 200
    states = response.json()
    assert len(states) == 18
    assert {"name": "terminal", "phase": "terminal"} in states


def test_model_transitions(client):
    response = client.get("/model/transitions/dispersal.escaping")
    assert response.status_code == 200
    body = response.json()
    assert len(body["targets"]) == 14
    assert "terminal" in body["targets"]

    assert client.get("/model/transitions/not.a.state").status_code == 404


def test_model_dot(client):
    response = client.get("/model/dot")
    assert response.status_code == 200
    assert response.text.startswith("digraph crowd_model {")
    assert response.text.count('";') >= 18


def test_validate_golden(client):
    response = client.post("/validate", json={"text": GOLDEN_TEXT})
    assert response.status_code == 200
    body = response.json()
    assert body["ok"] is True
    assert body["report"]["threads"] == 3
    assert body["report"]["final_states"] == {
        "1": "terminal", "2": "terminal", "3": "terminal",
    }


def test_validate_reports_error_position(client):
    response = client.post("/validate", json={"text": "thread 1 goto mode.bogus"})
    assert response.status_code == 200
    body = response.json()
    assert body["ok"] is False
    assert body["error"]["line"] == 1
    assert "unknown state name" in body["error"]["reason"]


def test_simulate_deterministic(client):
    payload = {"seed": 7, "steps": 20}
    first = client.post("/simulate", json=payload).json()
    second = client.post("/simulate", json=payload).json()
    assert first == second
    assert first["states"][0] == "assembly.planned"
    # simulated trace revalidates through the service
    check = client.post("/validate", json={"text": first["trace"]}).json()
    assert check["ok"] is True


def test_simulate_rejects_terminal_start(client):
    response = client.post("/simulate", json={"seed": 1, "steps": 5, "start": "terminal"})
    assert response.status_code == 422


def test_classify_ramp(client):
    samples = [
        {"timestamp": "0", "density": 1.0, "speed": 0.0, "order": 0.0},
        {"timestamp": "1", "density": 3.0, "speed": 0.0, "order": 0.0},
        {"timestamp": "2", "density": 5.0, "speed": 0.0, "order": 0.0},
    ]
    response = client.post("/classify", json={"samples": samples})
    assert response.status_code == 200
    assert [t["state"] for t in response.json()["transitions"]] == [
        "structure.static.sparse",
        "structure.static.solid",
        "structure.static.crush",
    ]


def test_world_session_flow(client):
    world_id = client.post("/worlds", json={}).json()["world_id"]

    spawned = client.post(
        f"/worlds/{world_id}/threads",
        json={"assembly_state": "assembly.planned", "timestamp": "t0"},
    )
    assert spawned.status_code == 201
    assert spawned.json()["id"] == 1
    assert spawned.json()["tags"]["assembly"] == "assembly.planned"

    moved = client.post(
        f"/worlds/{world_id}/threads/1/transition", json={"to": "mode.spectator"}
    )
    assert moved.status_code == 200
    assert moved.json()["thread"]["current"] == "mode.spectator"

    forked = client.post(
        f"/worlds/{world_id}/threads/1/fork",
        json={"assembly_state": "assembly.spontaneous", "initial": "mode.expressive"},
    )
    assert forked.status_code == 201
    assert forked.json()["id"] == 2
    assert forked.json()["tags"]["mode"] == "mode.expressive"

    rule = client.post(
        f"/worlds/{world_id}/rules/reaction",
        json={"watched_state": "mode.conflict", "affected_selector": "1",
              "target": "dispersal.escaping"},
    )
    assert rule.status_code == 201

    event_rule = client.post(
        f"/worlds/{world_id}/rules/event",
        json={"event": "police_cordon", "selector": "2", "target": "mode.conflict"},
    )
    assert event_rule.status_code == 201

    dispatched = client.post(f"/worlds/{world_id}/events", json={"name": "police_cordon"})
    assert dispatched.status_code == 200
    report = dispatched.json()
    assert [f["thread"] for f in report["forced"]] == [2, 1]
    assert report["forced"][1]["cause"] == {"thread": 2, "state": "mode.conflict"}

    world_state = client.get(f"/worlds/{world_id}").json()
    assert len(world_state["threads"]) == 2
    assert world_state["events"] == [{"name": "police_cordon", "timestamp": None}]

    thread1 = client.get(f"/worlds/{world_id}/threads/1").json()
    assert thread1["current"] == "dispersal.escaping"
    assert thread1["history"][-1]["kind"] == "forced_by_reaction"


def test_world_domain_errors_are_http_statuses(client):
    world_id = client.post("/worlds", json={}).json()["world_id"]
    client.post(f"/worlds/{world_id}/threads", json={"assembly_state": "assembly.planned"})

    illegal = client.post(
        f"/worlds/{world_id}/threads/1/transition", json={"to": "terminal"}
    )
    assert illegal.status_code == 409
    assert "illegal transition" in illegal.json()["detail"]

    missing_thread = client.get(f"/worlds/{world_id}/threads/9")
    assert missing_thread.status_code == 404

    missing_world = client.get("/worlds/deadbeef")
    assert missing_world.status_code == 404

    bad_spawn = client.post(
        f"/worlds/{world_id}/threads", json={"assembly_state": "mode.conflict"}
    )
    assert bad_spawn.status_code == 409


def test_world_options_affect_schema(client):
    body = {"options": {"structure_internal": False}}
    world_id = client.post("/worlds", json=body).json()["world_id"]
    client.post(f"/worlds/{world_id}/threads", json={"assembly_state": "assembly.planned"})
    client.post(f"/worlds/{world_id}/threads/1/transition", json={"to": "structure.static.sparse"})
    blocked = client.post(
        f"/worlds/{world_id}/threads/1/transition", json={"to": "structure.static.solid"}
    )
    assert blocked.status_code == 409


def test_world_from_trace(client):
    response = client.post("/worlds/from-trace", json={"text": GOLDEN_TEXT})
    assert response.status_code == 201
    body = response.json()
    assert body["report"]["threads"] == 3
    world_id = body["world_id"]
    thread3 = client.get(f"/worlds/{world_id}/threads/3").json()
    assert thread3["current"] == "terminal"
    assert thread3["alive"] is False

    bad = client.post("/worlds/from-trace", json={"text": "thread 1 goto mode.conflict"})
    assert bad.status_code == 422


def test_worlds_are_isolated(client):
    a = client.post("/worlds", json={}).json()["world_id"]
    b = client.post("/worlds", json={}).json()["world_id"]
    client.post(f"/worlds/{a}/threads", json={"assembly_state": "assembly.planned"})
    assert len(client.get(f"/worlds/{a}").json()["threads"]) == 1
    assert len(client.get(f"/worlds/{b}").json()["threads"]) == 0
