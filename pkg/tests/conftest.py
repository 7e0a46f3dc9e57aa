"""Shared fixtures: a virtual clock and pre-staged newsrooms."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from stringer.engine import Newsroom, VirtualClock
from stringer.model import Role, WorkerSource

T0 = datetime(2024, 5, 1, 17, 0, tzinfo=timezone.utc)


@pytest.fixture
def clock():
    return VirtualClock(T0)


@pytest.fixture
def newsroom(clock):
    return Newsroom(clock=clock)


@pytest.fixture
def live_event(newsroom, clock):
    """An event with two paid reporters, started and live."""
    event = newsroom.create_event(
        "Spring Fair",
        "Civic Park",
        T0 + timedelta(minutes=15),
        T0 + timedelta(minutes=105),
        "festival",
    )
    reporters = newsroom.register_workers(
        event.id,
        [("Ana", "ana@example.net"), ("Bo", "bo@example.net")],
        role=Role.FIELD_REPORTER,
        source=WorkerSource.PAID,
    )
    missions = newsroom.start_event(event.id, [w.id for w in reporters])
    return {
        "event": newsroom.get_event(event.id),
        "reporters": reporters,
        "missions": missions,
    }


def photo_content(n: int = 1) -> dict:
    return {"media": "photo", "payload_ref": f"https://media.example/{n}.jpg", "caption": f"shot {n}"}


def text_content(text: str = "Crowd loved the band") -> dict:
    return {"media": "text", "payload_ref": text, "caption": None}
