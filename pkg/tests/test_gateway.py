"""HTTP surface: endpoint behavior, error mapping, email ingest, durability."""

from __future__ import annotations

import json
from datetime import timedelta

import pytest
from fastapi.testclient import TestClient

from stringer.engine import Newsroom, VirtualClock
from stringer.gateway import IngestedEmail, create_app, route_email
from stringer.model import ts_to_wire
from stringer.recruiting import PaidMarketplace, RosterEntry, Sources, VolunteerRoster

from conftest import T0


def make_client(tmp_path=None, clock=None):
    clock = clock or VirtualClock(T0)
    newsroom = Newsroom(clock=clock, data_dir=tmp_path)
    sources = Sources(
        marketplace=PaidMarketplace(supply=100),
        roster=VolunteerRoster(
            [RosterEntry(f"Vol {i}", f"vol{i}@town.example") for i in range(40)]
        ),
    )
    app = create_app(newsroom, sources)
    return TestClient(app), newsroom, clock


def auth(worker_id: str) -> dict:
    return {"Authorization": f"Bearer {worker_id}"}


def create_event_payload(**overrides):
    payload = {
        "name": "Spring Fair",
        "location": "Civic Park",
        "start_time": ts_to_wire(T0 + timedelta(minutes=15)),
        "end_time": ts_to_wire(T0 + timedelta(minutes=105)),
        "event_type": "festival",
    }
    payload.update(overrides)
    return payload


def stage_live_event(client):
    event = client.post("/api/events", json=create_event_payload()).json()
    workers = client.post(
        f"/api/events/{event['id']}/workers",
        json={"source": "paid_marketplace", "role": "field_reporter", "count": 2},
    ).json()["workers"]
    missions = client.post(
        f"/api/events/{event['id']}/start",
        json={"reporter_ids": [w["id"] for w in workers]},
    ).json()["missions"]
    return event, workers, missions


class TestBasics:
    def test_health_reports_version(self):
        client, _, _ = make_client()
        body = client.get("/api/health").json()
        assert body["status"] == "ok"
        assert body["version"]

    def test_empty_data_dir_lists_zero_events(self, tmp_path):
        client, _, _ = make_client(tmp_path)
        assert client.get("/api/events").json() == {"events": []}

    def test_create_event_applies_defaults(self):
        client, _, _ = make_client()
        body = client.post("/api/events", json=create_event_payload())
        assert body.status_code == 201
        event = body.json()
        assert event["budget_cap_cents"] == 15_000
        assert event["report_deadline"] == ts_to_wire(T0 + timedelta(minutes=165))

    def test_validation_maps_to_400(self):
        client, _, _ = make_client()
        bad = create_event_payload(end_time=ts_to_wire(T0 + timedelta(minutes=15)))
        response = client.post("/api/events", json=bad)
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "validation"

    def test_not_found_maps_to_404(self):
        client, _, _ = make_client()
        assert client.get("/api/events/evt-404").status_code == 404

    def test_conflict_maps_to_409(self):
        client, _, _ = make_client()
        event, workers, _ = stage_live_event(client)
        response = client.post(
            f"/api/events/{event['id']}/start",
            json={"reporter_ids": [w["id"] for w in workers]},
        )
        assert response.status_code == 409


class TestWorkflowOverHttp:
    def test_full_cycle(self, tmp_path):
        client, newsroom, clock = make_client(tmp_path)
        event, workers, missions = stage_live_event(client)
        reporter = workers[0]
        mission = client.get(f"/api/workers/{reporter['id']}/mission").json()
        assert mission["id"] == missions[0]["id"]

        task_id = mission["tasks"][0]["id"]
        submission = client.post(
            f"/api/tasks/{task_id}/submissions",
            json={"content": {"media": "photo", "payload_ref": "https://x/1.jpg",
                              "caption": "stage"}},
            headers=auth(reporter["id"]),
        )
        assert submission.status_code == 201
        assert submission.json()["seq"] == 1

        decided = client.post(
            f"/api/submissions/{submission.json()['id']}/decision",
            json={"decision": "approve"},
        )
        assert decided.json()["state"] == "approved"

        feed = client.get(f"/api/events/{event['id']}/feed").json()
        assert feed["approved_count"] == 1

        clock.set(ts_to_wire_inverse(event["end_time"]))
        closed = client.post(f"/api/events/{event['id']}/close")
        assert closed.json()["status"] == "closed"

        report = client.get(f"/api/events/{event['id']}/report").json()
        assert report["status"] == "draft"
        assert report["item_count"] == 1

        edited = client.post(
            f"/api/reports/{report['id']}/blocks",
            json={"action": "insert_text",
                  "params": {"section_id": "impressions", "text": "A fine day out."}},
        )
        assert edited.status_code == 200

        final = client.post(f"/api/reports/{report['id']}/finalize")
        assert final.json()["status"] == "final"

        stats = client.get(f"/api/events/{event['id']}/stats").json()
        assert stats["submitted_items"] == 1
        assert stats["n_workers"] == 1

        markdown = client.get(f"/api/events/{event['id']}/report", params={"format": "md"})
        assert markdown.text.startswith("# Spring Fair")

    def test_submission_without_identity_is_403(self):
        client, _, _ = make_client()
        _, _, missions = stage_live_event(client)
        task_id = missions[0]["tasks"][0]["id"]
        response = client.post(
            f"/api/tasks/{task_id}/submissions",
            json={"content": {"media": "text", "payload_ref": "hello crowd"}},
        )
        assert response.status_code == 403

    def test_wrong_worker_is_403(self):
        client, _, _ = make_client()
        _, workers, missions = stage_live_event(client)
        task_id = missions[0]["tasks"][0]["id"]
        response = client.post(
            f"/api/tasks/{task_id}/submissions",
            json={"content": {"media": "text", "payload_ref": "hello"}},
            headers=auth(workers[1]["id"]),
        )
        assert response.status_code == 403

    def test_bonus_task_endpoint(self):
        client, _, _ = make_client()
        _, workers, missions = stage_live_event(client)
        response = client.post(
            f"/api/missions/{missions[0]['id']}/bonus-tasks",
            json={"kind": "photo", "instructions": "Closing act",
                  "target_section": "photos"},
        )
        assert response.status_code == 201
        assert response.json()["spec"]["origin"] == "curator_bonus"
        mission = client.get(f"/api/workers/{workers[0]['id']}/mission").json()
        assert len(mission["tasks"]) == len(missions[0]["tasks"]) + 1

    def test_feed_stream_replays_full_log_of_reported_event(self, tmp_path):
        client, newsroom, clock = make_client(tmp_path)
        event, workers, missions = stage_live_event(client)
        clock.set(ts_to_wire_inverse(event["end_time"]))
        client.post(f"/api/events/{event['id']}/close")
        report = client.get(f"/api/events/{event['id']}/report").json()
        client.post(f"/api/reports/{report['id']}/finalize")

        with client.stream("GET", f"/api/events/{event['id']}/feed/stream") as response:
            lines = [json.loads(l) for l in response.iter_lines() if l.strip()]
        expected = [e.to_wire() for e in newsroom.event_log(event["id"])]
        assert lines == expected

    def test_stream_from_seq_skips_prefix(self, tmp_path):
        client, newsroom, clock = make_client(tmp_path)
        event, workers, missions = stage_live_event(client)
        clock.set(ts_to_wire_inverse(event["end_time"]))
        client.post(f"/api/events/{event['id']}/close")
        report = client.get(f"/api/events/{event['id']}/report").json()
        client.post(f"/api/reports/{report['id']}/finalize")

        with client.stream(
            "GET", f"/api/events/{event['id']}/feed/stream", params={"from_seq": 4}
        ) as response:
            seqs = [json.loads(l)["seq"] for l in response.iter_lines() if l.strip()]
        last = newsroom.event_log(event["id"])[-1].seq
        assert seqs == list(range(5, last + 1))

    def test_restart_after_crash_resumes_identical_state(self, tmp_path):
        client, newsroom, clock = make_client(tmp_path)
        event, workers, missions = stage_live_event(client)
        task_id = missions[0]["tasks"][0]["id"]
        client.post(
            f"/api/tasks/{task_id}/submissions",
            json={"content": {"media": "text", "payload_ref": "big crowd tonight"}},
            headers=auth(workers[0]["id"]),
        )
        before = newsroom.state_snapshot(event["id"])
        # no graceful shutdown: a fresh service must replay to the same state
        second = Newsroom(clock=VirtualClock(T0), data_dir=tmp_path)
        assert second.state_snapshot(event["id"]) == before


class TestEmailIngest:
    def test_text_email_becomes_submission(self):
        client, newsroom, _ = make_client()
        event, workers, missions = stage_live_event(client)
        task_id = missions[0]["tasks"][0]["id"]
        response = client.post(
            "/api/ingest/email",
            json={
                "from": workers[0]["contact_handle"],
                "subject": f"Re: TASK-{task_id}",
                "body": "Crowd loved the band",
            },
        )
        assert response.status_code == 201
        submission = response.json()
        assert submission["task_id"] == task_id
        assert submission["content"]["media"] == "text"
        assert submission["content"]["payload_ref"] == "Crowd loved the band"

    def test_attachment_extension_infers_photo(self):
        client, _, _ = make_client()
        _, workers, missions = stage_live_event(client)
        task_id = missions[0]["tasks"][0]["id"]
        response = client.post(
            "/api/ingest/email",
            json={
                "from": workers[0]["contact_handle"],
                "subject": f"TASK-{task_id}",
                "body": "the stage",
                "attachments": [{"filename": "stage.jpg",
                                 "payload_ref": "https://mail.example/att/1"}],
            },
        )
        assert response.json()["content"]["media"] == "photo"
        assert response.json()["content"]["caption"] == "the stage"

    def test_tokenless_email_dead_letters_with_zero_state_change(self, tmp_path):
        client, newsroom, _ = make_client(tmp_path)
        event, workers, _ = stage_live_event(client)
        before = newsroom.state_snapshot(event["id"])
        log_bytes = newsroom.log_path(event["id"]).read_bytes()
        response = client.post(
            "/api/ingest/email",
            json={"from": workers[0]["contact_handle"],
                  "subject": "great event!", "body": "hello"},
        )
        assert response.status_code == 422
        assert newsroom.state_snapshot(event["id"]) == before
        assert newsroom.log_path(event["id"]).read_bytes() == log_bytes
        letters = client.get("/api/ingest/dead-letters").json()["dead_letters"]
        assert len(letters) == 1
        assert letters[0]["subject"] == "great event!"

    def test_unknown_sender_is_403(self):
        client, _, _ = make_client()
        _, _, missions = stage_live_event(client)
        task_id = missions[0]["tasks"][0]["id"]
        response = client.post(
            "/api/ingest/email",
            json={"from": "stranger@example.net", "subject": f"TASK-{task_id}",
                  "body": "let me in"},
        )
        assert response.status_code == 403

    def test_route_email_function_maps_video_extension(self):
        client, newsroom, _ = make_client()
        _, workers, missions = stage_live_event(client)
        task_id = missions[0]["tasks"][0]["id"]
        submission = route_email(
            newsroom,
            IngestedEmail(
                from_handle=workers[0]["contact_handle"],
                subject=f"fwd: TASK-{task_id} clip",
                body="",
                attachments=(("clip.mp4", "https://mail.example/att/9"),),
            ),
        )
        assert submission.content.media.value == "video"


def ts_to_wire_inverse(wire: str):
    from stringer.model import wire_to_ts
    return wire_to_ts(wire)
