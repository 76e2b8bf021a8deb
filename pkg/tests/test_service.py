"""HTTP surface: authoring flow, error envelope, live sessions, persistence."""

import dataclasses
import json

import pytest
from fastapi.testclient import TestClient

from vignette.harness.bundle import DINNER_CONFIG, dinner_gateway, dinner_story
from vignette.llm.gateway import Gateway
from vignette.llm.providers import ScriptedMockProvider
from vignette.service.app import create_app

API = "/api/v1"

# short cap so no-input sessions end in tens of milliseconds at tick_ms=2
SERVICE_CONFIG = dataclasses.replace(DINNER_CONFIG, max_ticks=40)


@pytest.fixture()
def svc(tmp_path):
    app = create_app(
        store_dir=tmp_path / "store",
        gateway=dinner_gateway(),
        runtime_config=SERVICE_CONFIG,
        tick_ms=2,
    )
    with TestClient(app) as client:
        yield client, tmp_path / "store"


def _create(client, **overrides):
    payload = {"story_text": dinner_story(), "seed": 7}
    payload.update(overrides)
    resp = client.post(f"{API}/vignettes", json=payload)
    assert resp.status_code == 201, resp.text
    return resp.json()


def _author_to_complete(client):
    """Drive one vignette through every stage; returns its id."""
    vid = _create(client)["id"]
    view = client.post(f"{API}/vignettes/{vid}/confirm_rooms", json={}).json()
    assert view["stage"] == "objects_pending"

    view = client.post(
        f"{API}/vignettes/{vid}/environment",
        json={"op": "add", "name": "dining chair", "room_id": "room_a"},
    ).json()
    chair = next(o for o in view["environment"]["objects"] if o["name"] == "dining chair")

    client.post(f"{API}/vignettes/{vid}/confirm_objects")
    client.post(f"{API}/vignettes/{vid}/confirm_characters")
    for cid in ("pc_me", "npc_julie"):
        resp = client.post(
            f"{API}/vignettes/{vid}/events",
            json={"op": "bind", "event_index": 1, "character_id": cid,
                  "object_id": chair["id"]},
        )
        assert resp.status_code == 200, resp.text
    resp = client.post(f"{API}/vignettes/{vid}/confirm_events")
    assert resp.status_code == 200, resp.text
    view = resp.json()
    assert view["stage"] == "complete"
    assert view["spec"]["spec_version"] == 1
    return vid


def test_health(svc):
    client, _ = svc
    resp = client.get(f"{API}/health")
    assert resp.status_code == 200
    assert resp.json()["status"] == "ok"


def test_create_returns_draft_view(svc):
    client, _ = svc
    view = _create(client)
    assert view["stage"] == "rooms_pending"
    assert view["story_text"] == dinner_story()
    names = {c["name"] for c in view["characters"]}
    assert names == {"me", "Julie", "Jack"}
    assert view["environment"] is None  # no rooms confirmed yet
    assert view["id"].startswith("vig_")


def test_full_authoring_flow(svc):
    client, _ = svc
    vid = _author_to_complete(client)
    view = client.get(f"{API}/vignettes/{vid}").json()
    assert view["stage"] == "complete"
    assert len(view["key_events"]) == 3
    assert vid in client.get(f"{API}/vignettes").json()["vignettes"]


def test_needs_object_flags_surface_in_view(svc):
    client, _ = svc
    vid = _create(client)["id"]
    view = client.post(f"{API}/vignettes/{vid}/confirm_rooms", json={}).json()
    assert {f["character_id"] for f in view["needs_object"]} == {"pc_me", "npc_julie"}


def test_stage_violation_envelope(svc):
    client, _ = svc
    vid = _create(client)["id"]
    resp = client.post(f"{API}/vignettes/{vid}/confirm_events")
    assert resp.status_code == 409
    body = resp.json()
    assert body["code"] == "STAGE_VIOLATION"
    assert body["details"]["current"] == "rooms_pending"
    assert body["message"]


def test_unknown_vignette_is_404(svc):
    client, _ = svc
    resp = client.get(f"{API}/vignettes/vig_nope")
    assert resp.status_code == 404
    assert resp.json()["code"] == "NOT_FOUND"


def test_empty_story_is_400(svc):
    client, _ = svc
    resp = client.post(f"{API}/vignettes", json={"story_text": "   "})
    assert resp.status_code == 400
    assert resp.json()["code"] == "EMPTY_STORY"


def test_character_cap_envelope_and_keep_retry(tmp_path):
    cast = [
        {"name": n, "is_pc": n == "me", "age": None, "personality": None,
         "social_role": None, "mood": None, "language_style": None}
        for n in ("me", "Ann", "Ben", "Cal", "Dee")
    ]
    script = {
        "version": 1,
        "entries": [{
            "template_id": "EXTRACT_CHARACTERS", "match": {},
            "response": {"characters": cast},
        }],
    }
    app = create_app(
        store_dir=tmp_path / "store",
        gateway=Gateway(ScriptedMockProvider(script)),
        runtime_config=SERVICE_CONFIG,
        tick_ms=2,
    )
    with TestClient(app) as client:
        resp = client.post(f"{API}/vignettes", json={"story_text": "a crowd"})
        assert resp.status_code == 422
        body = resp.json()
        assert body["code"] == "CHAR_CAP_EXCEEDED"
        assert body["details"]["cap"] == 3
        assert body["details"]["detected"] == ["me", "Ann", "Ben", "Cal", "Dee"]

        retry = client.post(
            f"{API}/vignettes",
            json={"story_text": "a crowd", "keep_characters": ["me", "Ann", "Ben"]},
        )
        assert retry.status_code == 201
        assert {c["name"] for c in retry.json()["characters"]} == {"me", "Ann", "Ben"}


def test_draft_invalid_envelope_carries_violations(svc):
    client, _ = svc
    vid = _create(client)["id"]
    view = client.post(f"{API}/vignettes/{vid}/confirm_rooms", json={}).json()
    objs = [o for o in view["environment"]["objects"] if o["room_id"] == "room_a"]
    resp = client.post(
        f"{API}/vignettes/{vid}/environment",
        json={"op": "move", "object_id": objs[0]["id"], "position": objs[1]["position"]},
    )
    assert resp.status_code == 422
    body = resp.json()
    assert body["code"] == "DRAFT_INVALID"
    assert any(v["code"] == "OBJECT_OVERLAP" for v in body["details"]["violations"])


def test_unknown_environment_op_is_422(svc):
    client, _ = svc
    vid = _create(client)["id"]
    client.post(f"{API}/vignettes/{vid}/confirm_rooms", json={})
    resp = client.post(f"{API}/vignettes/{vid}/environment", json={"op": "frobnicate"})
    assert resp.status_code == 422
    assert resp.json()["code"] == "BAD_REQUEST"


def test_chat_and_suggest_round_trip(svc):
    client, _ = svc
    vid = _create(client)["id"]
    client.post(f"{API}/vignettes/{vid}/confirm_rooms", json={})
    client.post(f"{API}/vignettes/{vid}/confirm_objects")
    reply = client.post(
        f"{API}/vignettes/{vid}/characters/npc_jack/chat",
        json={"message": "I had a rough week."},
    ).json()["reply"]
    assert reply == "Hey, don't stress about it. We'll sort it out together."
    suggestions = client.post(
        f"{API}/vignettes/{vid}/characters/npc_jack/suggest"
    ).json()["suggestions"]
    assert suggestions.get("personality") == "supportive"
    view = client.post(
        f"{API}/vignettes/{vid}/characters/npc_jack",
        json={"personality": suggestions["personality"]},
    ).json()
    jack = next(c for c in view["characters"] if c["id"] == "npc_jack")
    assert jack["personality"] == "supportive"


def test_session_requires_complete_vignette(svc):
    client, _ = svc
    vid = _create(client)["id"]
    resp = client.post(f"{API}/sessions", json={"vignette_id": vid})
    assert resp.status_code == 409
    assert resp.json()["code"] == "EXTRACTION_INCOMPLETE"


def test_session_rejects_unknown_mode(svc):
    client, _ = svc
    vid = _author_to_complete(client)
    resp = client.post(f"{API}/sessions", json={"vignette_id": vid, "mode": "zz"})
    assert resp.status_code == 422
    assert resp.json()["code"] == "BAD_REQUEST"


def test_session_lifecycle_and_gap_free_deltas(svc):
    client, store_dir = svc
    vid = _author_to_complete(client)
    created = client.post(
        f"{API}/sessions", json={"vignette_id": vid, "mode": "cd", "seed": 3}
    )
    assert created.status_code == 201
    body = created.json()
    sid = body["session_id"]
    assert body["caption"] == dinner_story()
    assert body["mode"] == "cd"

    ack = client.post(
        f"{API}/sessions/{sid}/commands", json={"kind": "move", "direction": "E"}
    ).json()
    assert ack["accepted_at_tick"] == ack["tick"] + 1

    # drain deltas until the run ends; cursors must never skip a record
    seen = []
    cursor = -1
    for _ in range(300):
        delta = client.get(
            f"{API}/sessions/{sid}/state",
            params={"since_tick": cursor, "timeout_ms": 500},
        ).json()
        assert all(r["tick"] > cursor for r in delta["records"])
        seen.extend(delta["records"])
        cursor = delta["tick"]
        if delta["status"] == "ended":
            break
    assert delta["status"] == "ended"
    assert delta["state"]["status"] == "ended"

    # no duplicates, no gaps: the drained stream is exactly the stored log
    stored = [
        json.loads(line)
        for line in (store_dir / "sessions" / f"{sid}.jsonl").read_text().splitlines()
    ]
    assert seen == stored
    assert seen[-1]["kind"] == "run_ended"
    assert seen[-1]["payload"]["reason"] == "tick_cap"

    meta = json.loads((store_dir / "sessions" / f"{sid}.json").read_text())
    assert meta["status"] == "ended"
    assert meta["vignette_id"] == vid

    # an ended session refuses further commands
    resp = client.post(f"{API}/sessions/{sid}/commands", json={"kind": "wait"})
    assert resp.status_code == 410
    assert resp.json()["code"] == "SESSION_ENDED"


def test_bad_commands_are_422(svc):
    client, _ = svc
    vid = _author_to_complete(client)
    sid = client.post(f"{API}/sessions", json={"vignette_id": vid}).json()["session_id"]
    for payload in (
        {"kind": "juggle"},
        {"kind": "move", "direction": "Q"},
        {"kind": "interact"},
        {"kind": "chat", "npc_id": "npc_jack"},
    ):
        resp = client.post(f"{API}/sessions/{sid}/commands", json=payload)
        assert resp.status_code == 422, payload
        assert resp.json()["code"] == "BAD_COMMAND"
    client.delete(f"{API}/sessions/{sid}")


def test_delete_abandons_session(svc):
    client, store_dir = svc
    vid = _author_to_complete(client)
    sid = client.post(f"{API}/sessions", json={"vignette_id": vid}).json()["session_id"]
    resp = client.delete(f"{API}/sessions/{sid}")
    assert resp.status_code == 200
    assert resp.json()["status"] == "ended"
    records = [
        json.loads(line)
        for line in (store_dir / "sessions" / f"{sid}.jsonl").read_text().splitlines()
    ]
    assert records[-1]["kind"] == "run_ended"
    assert records[-1]["payload"]["reason"] == "abandoned"
    # the draft survives the viewer bailing out
    assert client.get(f"{API}/vignettes/{vid}").json()["stage"] == "complete"


def test_unknown_session_is_404(svc):
    client, _ = svc
    resp = client.get(f"{API}/sessions/session_nope/state", params={"since_tick": -1})
    assert resp.status_code == 404


def test_draft_survives_restart(tmp_path):
    store = tmp_path / "store"
    app = create_app(
        store_dir=store, gateway=dinner_gateway(),
        runtime_config=SERVICE_CONFIG, tick_ms=2,
    )
    with TestClient(app) as client:
        vid = _create(client)["id"]
        client.post(f"{API}/vignettes/{vid}/confirm_rooms", json={})
        before = client.get(f"{API}/vignettes/{vid}").json()

    # a fresh app over the same store dir must serve the same draft
    app2 = create_app(
        store_dir=store, gateway=dinner_gateway(),
        runtime_config=SERVICE_CONFIG, tick_ms=2,
    )
    with TestClient(app2) as client:
        after = client.get(f"{API}/vignettes/{vid}").json()
        assert after == before
        # and the reloaded session still edits normally
        resp = client.post(
            f"{API}/vignettes/{vid}/environment",
            json={"op": "add", "name": "dining chair", "room_id": "room_a"},
        )
        assert resp.status_code == 200
