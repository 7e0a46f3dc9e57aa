"""Worker recruitment: a pluggable source seam with two built-in sources.

The paid marketplace is an in-process stand-in for a locative gig platform;
a real client would plug in behind the same interface.  The volunteer roster
is a reviewable JSON file of willing locals.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

from .engine import Newsroom
from .model import (
    PartialFillError,
    Role,
    ValidationError,
    Worker,
    WorkerSource,
)

PAID_MARKETPLACE = "paid_marketplace"
VOLUNTEER_ROSTER = "volunteer_roster"
SOURCE_KINDS = (PAID_MARKETPLACE, VOLUNTEER_ROSTER)


@dataclass(frozen=True)
class RecruitmentRequest:
    event_id: str
    role: Role
    count: int
    offer_cents: int = 0  # recruitment fee per worker; 0 for volunteers
    location_hint: str = ""

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        if self.count < 1:
            raise ValidationError("recruitment count must be >= 1")
        if self.offer_cents < 0:
            raise ValidationError("recruitment offer must be >= 0")


@dataclass(frozen=True)
class RosterEntry:
    display_name: str
    contact_handle: str


class VolunteerRoster:
    """Finite pool of volunteers; each person joins a given event once."""

    def __init__(self, entries: list[RosterEntry] | None = None):
        self.entries = list(entries or [])

    @classmethod
    def from_file(cls, path: str | Path) -> "VolunteerRoster":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, list):
            raise ValidationError("roster file must be a JSON array")
        return cls(
            [RosterEntry(item["display_name"], item["contact_handle"]) for item in raw]
        )

    def candidates(self, count: int, exclude_handles: set[str]) -> list[RosterEntry]:
        available = [e for e in self.entries if e.contact_handle not in exclude_handles]
        if len(available) < count:
            raise PartialFillError(requested=count, found=len(available), source=VOLUNTEER_ROSTER)
        return available[:count]


class PaidMarketplace:
    """Simulated gig marketplace with a configurable supply of workers."""

    def __init__(self, supply: int = 10_000):
        self._supply = supply
        self._drawn = 0
        self._lock = threading.Lock()

    @property
    def remaining(self) -> int:
        with self._lock:
            return self._supply - self._drawn

    def candidates(self, count: int, location_hint: str = "") -> list[RosterEntry]:
        with self._lock:
            if self._supply - self._drawn < count:
                raise PartialFillError(
                    requested=count, found=self._supply - self._drawn, source=PAID_MARKETPLACE
                )
            start = self._drawn
        return [
            RosterEntry(f"Field worker {start + i + 1}", f"fw-{start + i + 1}@market.example")
            for i in range(count)
        ]

    def commit(self, count: int) -> None:
        with self._lock:
            self._drawn += count


@dataclass
class Sources:
    marketplace: PaidMarketplace
    roster: VolunteerRoster

    @classmethod
    def default(cls) -> "Sources":
        return cls(marketplace=PaidMarketplace(), roster=VolunteerRoster())


def recruit(
    newsroom: Newsroom, sources: Sources, source_kind: str, request: RecruitmentRequest
) -> list[Worker]:
    """Register exactly ``request.count`` workers from one source, atomically.

    Either every worker is registered (with any recruitment fees on the
    ledger) or none is: budget and supply shortfalls raise before the first
    registration.
    """
    if source_kind not in SOURCE_KINDS:
        raise ValidationError(f"unknown worker source {source_kind!r}")

    if source_kind == VOLUNTEER_ROSTER:
        if request.offer_cents:
            raise ValidationError("volunteers are unpaid; the offer must be 0")
        taken = {w.contact_handle for w in newsroom.workers_for_event(request.event_id)}
        entries = sources.roster.candidates(request.count, exclude_handles=taken)
        return newsroom.register_workers(
            request.event_id,
            [(e.display_name, e.contact_handle) for e in entries],
            role=request.role,
            source=WorkerSource.VOLUNTEER,
            fee_cents=0,
        )

    entries = sources.marketplace.candidates(request.count, request.location_hint)
    workers = newsroom.register_workers(
        request.event_id,
        [(e.display_name, e.contact_handle) for e in entries],
        role=request.role,
        source=WorkerSource.PAID,
        fee_cents=request.offer_cents,
    )
    sources.marketplace.commit(request.count)
    return workers
