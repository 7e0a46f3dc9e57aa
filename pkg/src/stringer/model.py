"""Domain types and state machines shared by every part of the newsroom."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any

DEFAULT_BUDGET_CAP_CENTS = 15_000
DEFAULT_REPORT_GRACE_MINUTES = 60

_EVENT_TYPE_RE = re.compile(r"^[a-z][a-z0-9_]*$")

KNOWN_EVENT_TYPES = (
    "town_hall",
    "festival",
    "sports_game",
    "art_show",
    "public_talk",
    "hackathon",
)

GENERIC_EVENT_TYPE = "generic"


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class NewsroomError(Exception):
    """Base class for all domain errors; ``code`` drives HTTP status mapping."""

    code = "error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details


class ValidationError(NewsroomError):
    code = "validation"


class NotFoundError(NewsroomError):
    code = "not_found"


class ConflictError(NewsroomError):
    code = "conflict"


class AuthorizationError(NewsroomError):
    code = "authorization"


class UnderstaffedError(NewsroomError):
    code = "understaffed"

    def __init__(self, needed: int, available: int):
        super().__init__(
            f"understaffed: need {needed} field reporters, got {available}"
            f" (short by {needed - available})",
            needed=needed,
            available=available,
        )


class BudgetExceededError(NewsroomError):
    code = "budget_exceeded"

    def __init__(self, message: str, shortfall_cents: int):
        super().__init__(message, shortfall_cents=shortfall_cents)
        self.shortfall_cents = shortfall_cents


class DeadlinePassedError(NewsroomError):
    code = "deadline_passed"


class PartialFillError(NewsroomError):
    code = "partial_fill"

    def __init__(self, requested: int, found: int, source: str):
        super().__init__(
            f"only {found} of {requested} workers available in {source}",
            requested=requested,
            found=found,
            source=source,
        )
        self.found = found


class CorruptLogError(NewsroomError):
    code = "corrupt_log"

    def __init__(self, message: str, seq: int):
        super().__init__(message, seq=seq)
        self.seq = seq


class UnroutableError(NewsroomError):
    code = "unroutable"


# ---------------------------------------------------------------------------
# Enums
# ---------------------------------------------------------------------------


class Role(str, Enum):
    FIELD_REPORTER = "field_reporter"
    CURATOR = "curator"
    WRITER = "writer"


class WorkerSource(str, Enum):
    PAID = "paid"
    VOLUNTEER = "volunteer"


class TaskKind(str, Enum):
    PHOTO = "photo"
    VIDEO = "video"
    AUDIO = "audio"
    INTERVIEW = "interview"
    TEXT_UPDATE = "text_update"
    QUESTION = "question"


class Media(str, Enum):
    PHOTO = "photo"
    VIDEO = "video"
    AUDIO = "audio"
    TEXT = "text"


class TaskState(str, Enum):
    TO_DO = "to_do"
    DONE = "done"


class TaskOrigin(str, Enum):
    TEMPLATE = "template"
    CURATOR_BONUS = "curator_bonus"


class SubmissionState(str, Enum):
    PENDING = "pending"
    APPROVED = "approved"
    REJECTED = "rejected"


class EventStatus(str, Enum):
    CREATED = "created"
    STAFFED = "staffed"
    LIVE = "live"
    CLOSED = "closed"
    REPORTED = "reported"


class Decision(str, Enum):
    APPROVE = "approve"
    REJECT = "reject"


class LedgerReason(str, Enum):
    TASK_APPROVED = "task_approved"
    RECRUITMENT_FEE = "recruitment_fee"


class FeedKind(str, Enum):
    EVENT_CREATED = "event_created"
    WORKER_REGISTERED = "worker_registered"
    MISSION_ASSIGNED = "mission_assigned"
    SUBMISSION_ADDED = "submission_added"
    SUBMISSION_DECIDED = "submission_decided"
    FEEDBACK_SENT = "feedback_sent"
    BONUS_TASK_CREATED = "bonus_task_created"
    EVENT_CLOSED = "event_closed"
    REPORT_DRAFTED = "report_drafted"
    REPORT_BLOCK_EDITED = "report_block_edited"
    REPORT_FINALIZED = "report_finalized"


class ReportStatus(str, Enum):
    DRAFT = "draft"
    FINAL = "final"


# Sentinel identity for the person who commissioned the coverage.  The
# requester may curate and write without being a registered worker, matching
# events where the organizer moderates content themselves.
REQUESTER = "requester"
SYSTEM = "system"


# ---------------------------------------------------------------------------
# State machines
# ---------------------------------------------------------------------------

_TASK_TRANSITIONS = {
    (TaskState.TO_DO.value, TaskState.DONE.value),
    (TaskState.DONE.value, TaskState.TO_DO.value),
}

_SUBMISSION_TRANSITIONS = {
    (SubmissionState.PENDING.value, SubmissionState.APPROVED.value),
    (SubmissionState.PENDING.value, SubmissionState.REJECTED.value),
}

_EVENT_CHAIN = [s.value for s in EventStatus]
_EVENT_TRANSITIONS = set(zip(_EVENT_CHAIN, _EVENT_CHAIN[1:]))

_STATE_SETS = {
    "task": {s.value for s in TaskState},
    "submission": {s.value for s in SubmissionState},
    "event": {s.value for s in EventStatus},
}

_TRANSITION_TABLES = {
    "task": _TASK_TRANSITIONS,
    "submission": _SUBMISSION_TRANSITIONS,
    "event": _EVENT_TRANSITIONS,
}


def validate_transition(entity_kind: str, from_state: str, to_state: str) -> bool:
    """True iff ``from_state -> to_state`` is an allowed transition.

    Pure: consults the fixed transition tables and never touches live state.
    Unknown entity kinds or state tokens raise ``ValidationError``.
    """
    if entity_kind not in _STATE_SETS:
        raise ValidationError(f"unknown entity kind: {entity_kind!r}")
    states = _STATE_SETS[entity_kind]
    for token in (from_state, to_state):
        if token not in states:
            raise ValidationError(f"unknown {entity_kind} state: {token!r}")
    return (from_state, to_state) in _TRANSITION_TABLES[entity_kind]


def count_words(text: str) -> int:
    """Number of maximal whitespace-delimited tokens in ``text``."""
    return len(text.split())


def validate_event_type(key: str) -> str:
    if not key or not _EVENT_TYPE_RE.match(key):
        raise ValidationError(
            f"event type must be a lowercase underscore token, got {key!r}"
        )
    return key


# ---------------------------------------------------------------------------
# Serialization helpers
# ---------------------------------------------------------------------------


def ts_to_wire(at: datetime) -> str:
    """Fixed-width UTC timestamp that round-trips byte-for-byte."""
    if at.tzinfo is None:
        raise ValidationError("timestamps must be timezone-aware")
    return at.astimezone(timezone.utc).isoformat(timespec="microseconds")


def wire_to_ts(raw: str) -> datetime:
    return datetime.fromisoformat(raw).astimezone(timezone.utc)


def canonical_json(value: Any) -> str:
    """Key-sorted, separator-stable JSON so equal states are equal bytes."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


# ---------------------------------------------------------------------------
# Value records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContentDescriptor:
    """One piece of submitted content; payloads are opaque, never decoded.

    For text media the payload_ref holds the inline text itself and
    ``word_count`` is computed from it; other media carry a reference and
    count zero words.
    """

    media: Media
    payload_ref: str
    caption: str | None = None
    word_count: int = field(default=0)

    def __post_init__(self):
        object.__setattr__(self, "media", Media(self.media))
        if not self.payload_ref:
            raise ValidationError(
                "text content needs inline text"
                if self.media == Media.TEXT
                else "non-text content needs a payload reference"
            )
        computed = count_words(self.payload_ref) if self.media == Media.TEXT else 0
        object.__setattr__(self, "word_count", computed)

    def to_wire(self) -> dict:
        return {
            "media": self.media.value,
            "payload_ref": self.payload_ref,
            "caption": self.caption,
            "word_count": self.word_count,
        }

    @classmethod
    def from_wire(cls, raw: dict) -> "ContentDescriptor":
        return cls(
            media=Media(raw["media"]),
            payload_ref=raw["payload_ref"],
            caption=raw.get("caption"),
        )


@dataclass(frozen=True)
class TaskSpec:
    id: str
    kind: TaskKind
    instructions: str
    target_section: str
    pay_rate_cents: int = 0
    origin: TaskOrigin = TaskOrigin.TEMPLATE

    def __post_init__(self):
        object.__setattr__(self, "kind", TaskKind(self.kind))
        object.__setattr__(self, "origin", TaskOrigin(self.origin))
        if not self.instructions:
            raise ValidationError(f"task spec {self.id}: instructions must be non-empty")
        if self.pay_rate_cents < 0:
            raise ValidationError(f"task spec {self.id}: pay rate must be >= 0")

    def to_wire(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "instructions": self.instructions,
            "target_section": self.target_section,
            "pay_rate_cents": self.pay_rate_cents,
            "origin": self.origin.value,
        }

    @classmethod
    def from_wire(cls, raw: dict) -> "TaskSpec":
        return cls(
            id=raw["id"],
            kind=TaskKind(raw["kind"]),
            instructions=raw["instructions"],
            target_section=raw["target_section"],
            pay_rate_cents=raw.get("pay_rate_cents", 0),
            origin=TaskOrigin(raw.get("origin", "template")),
        )


@dataclass(frozen=True)
class FeedbackNote:
    at: datetime
    curator_id: str
    text: str

    def to_wire(self) -> dict:
        return {"at": ts_to_wire(self.at), "curator_id": self.curator_id, "text": self.text}

    @classmethod
    def from_wire(cls, raw: dict) -> "FeedbackNote":
        return cls(at=wire_to_ts(raw["at"]), curator_id=raw["curator_id"], text=raw["text"])


@dataclass(frozen=True)
class Task:
    id: str
    spec: TaskSpec
    mission_id: str
    state: TaskState = TaskState.TO_DO
    feedback_log: tuple[FeedbackNote, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "state", TaskState(self.state))
        stamps = [n.at for n in self.feedback_log]
        if any(a > b for a, b in zip(stamps, stamps[1:])):
            raise ValidationError(f"task {self.id}: feedback timestamps must not decrease")

    def to_wire(self) -> dict:
        return {
            "id": self.id,
            "spec": self.spec.to_wire(),
            "mission_id": self.mission_id,
            "state": self.state.value,
            "feedback_log": [n.to_wire() for n in self.feedback_log],
        }

    @classmethod
    def from_wire(cls, raw: dict) -> "Task":
        return cls(
            id=raw["id"],
            spec=TaskSpec.from_wire(raw["spec"]),
            mission_id=raw["mission_id"],
            state=TaskState(raw.get("state", "to_do")),
            feedback_log=tuple(FeedbackNote.from_wire(n) for n in raw.get("feedback_log", [])),
        )


@dataclass(frozen=True)
class Worker:
    id: str
    display_name: str
    role: Role
    source: WorkerSource
    contact_handle: str

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        object.__setattr__(self, "source", WorkerSource(self.source))

    def to_wire(self) -> dict:
        return {
            "id": self.id,
            "display_name": self.display_name,
            "role": self.role.value,
            "source": self.source.value,
            "contact_handle": self.contact_handle,
        }

    @classmethod
    def from_wire(cls, raw: dict) -> "Worker":
        return cls(
            id=raw["id"],
            display_name=raw["display_name"],
            role=Role(raw["role"]),
            source=WorkerSource(raw["source"]),
            contact_handle=raw["contact_handle"],
        )


@dataclass(frozen=True)
class Submission:
    id: str
    task_id: str
    worker_id: str
    content: ContentDescriptor
    seq: int
    submitted_at: datetime
    state: SubmissionState = SubmissionState.PENDING
    curator_feedback: str | None = None
    decided_at: datetime | None = None

    def __post_init__(self):
        object.__setattr__(self, "state", SubmissionState(self.state))
        if self.seq < 1:
            raise ValidationError(f"submission {self.id}: seq must be positive")

    def to_wire(self) -> dict:
        return {
            "id": self.id,
            "task_id": self.task_id,
            "worker_id": self.worker_id,
            "content": self.content.to_wire(),
            "seq": self.seq,
            "submitted_at": ts_to_wire(self.submitted_at),
            "state": self.state.value,
            "curator_feedback": self.curator_feedback,
            "decided_at": ts_to_wire(self.decided_at) if self.decided_at else None,
        }

    @classmethod
    def from_wire(cls, raw: dict) -> "Submission":
        return cls(
            id=raw["id"],
            task_id=raw["task_id"],
            worker_id=raw["worker_id"],
            content=ContentDescriptor.from_wire(raw["content"]),
            seq=raw["seq"],
            submitted_at=wire_to_ts(raw["submitted_at"]),
            state=SubmissionState(raw.get("state", "pending")),
            curator_feedback=raw.get("curator_feedback"),
            decided_at=wire_to_ts(raw["decided_at"]) if raw.get("decided_at") else None,
        )


@dataclass(frozen=True)
class Event:
    id: str
    name: str
    location: str
    start_time: datetime
    end_time: datetime
    event_type: str
    budget_cap_cents: int = DEFAULT_BUDGET_CAP_CENTS
    report_deadline: datetime | None = None
    status: EventStatus = EventStatus.CREATED

    def __post_init__(self):
        object.__setattr__(self, "status", EventStatus(self.status))
        validate_event_type(self.event_type)
        if self.start_time >= self.end_time:
            raise ValidationError("event must start before it ends")
        if self.report_deadline is not None and self.end_time >= self.report_deadline:
            raise ValidationError("report deadline must fall after the event ends")
        if self.budget_cap_cents < 0:
            raise ValidationError("budget cap must be >= 0")

    def to_wire(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "location": self.location,
            "start_time": ts_to_wire(self.start_time),
            "end_time": ts_to_wire(self.end_time),
            "event_type": self.event_type,
            "budget_cap_cents": self.budget_cap_cents,
            "report_deadline": ts_to_wire(self.report_deadline) if self.report_deadline else None,
            "status": self.status.value,
        }

    @classmethod
    def from_wire(cls, raw: dict) -> "Event":
        return cls(
            id=raw["id"],
            name=raw["name"],
            location=raw["location"],
            start_time=wire_to_ts(raw["start_time"]),
            end_time=wire_to_ts(raw["end_time"]),
            event_type=raw["event_type"],
            budget_cap_cents=raw["budget_cap_cents"],
            report_deadline=wire_to_ts(raw["report_deadline"]) if raw.get("report_deadline") else None,
            status=EventStatus(raw.get("status", "created")),
        )


@dataclass(frozen=True)
class LedgerEntry:
    worker_id: str
    task_id: str | None
    amount_cents: int
    reason: LedgerReason
    at: datetime

    def __post_init__(self):
        object.__setattr__(self, "reason", LedgerReason(self.reason))
        if self.amount_cents < 0:
            raise ValidationError("ledger amounts must be >= 0")

    def to_wire(self) -> dict:
        return {
            "worker_id": self.worker_id,
            "task_id": self.task_id,
            "amount_cents": self.amount_cents,
            "reason": self.reason.value,
            "at": ts_to_wire(self.at),
        }

    @classmethod
    def from_wire(cls, raw: dict) -> "LedgerEntry":
        return cls(
            worker_id=raw["worker_id"],
            task_id=raw.get("task_id"),
            amount_cents=raw["amount_cents"],
            reason=LedgerReason(raw["reason"]),
            at=wire_to_ts(raw["at"]),
        )


@dataclass(frozen=True)
class FeedEvent:
    """One committed state change; the append-only log is the source of truth."""

    seq: int
    at: datetime
    kind: FeedKind
    payload: dict

    def to_wire(self) -> dict:
        return {
            "seq": self.seq,
            "at": ts_to_wire(self.at),
            "kind": self.kind.value,
            "payload": self.payload,
        }

    def to_line(self) -> str:
        return canonical_json(self.to_wire())

    @classmethod
    def from_wire(cls, raw: dict) -> "FeedEvent":
        try:
            kind = FeedKind(raw["kind"])
        except ValueError:
            raise CorruptLogError(
                f"unknown feed event kind {raw.get('kind')!r}", seq=raw.get("seq", -1)
            )
        return cls(seq=raw["seq"], at=wire_to_ts(raw["at"]), kind=kind, payload=raw["payload"])

    @classmethod
    def from_line(cls, line: str) -> "FeedEvent":
        return cls.from_wire(json.loads(line))


# ---------------------------------------------------------------------------
# Report records
# ---------------------------------------------------------------------------

WRITER_SOURCE = "writer"


@dataclass(frozen=True)
class Block:
    id: str
    source: str  # submission id, or "writer" for blocks typed by the writer
    kind: str  # "text" | "media_ref"
    body: str  # inline text, or the payload reference for media blocks
    caption: str | None = None

    def to_wire(self) -> dict:
        return {
            "id": self.id,
            "source": self.source,
            "kind": self.kind,
            "body": self.body,
            "caption": self.caption,
        }

    @classmethod
    def from_wire(cls, raw: dict) -> "Block":
        return cls(
            id=raw["id"],
            source=raw["source"],
            kind=raw["kind"],
            body=raw["body"],
            caption=raw.get("caption"),
        )


@dataclass(frozen=True)
class ReportSection:
    section_id: str
    title: str
    blocks: tuple[Block, ...] = ()

    def to_wire(self) -> dict:
        return {
            "section_id": self.section_id,
            "title": self.title,
            "blocks": [b.to_wire() for b in self.blocks],
        }

    @classmethod
    def from_wire(cls, raw: dict) -> "ReportSection":
        return cls(
            section_id=raw["section_id"],
            title=raw["title"],
            blocks=tuple(Block.from_wire(b) for b in raw.get("blocks", [])),
        )


@dataclass(frozen=True)
class Report:
    id: str
    event_id: str
    status: ReportStatus
    sections: tuple[ReportSection, ...]
    byline: tuple[str, ...]
    word_count: int
    item_count: int
    block_seq: int  # high-water mark for block id allocation
    editor: str | None = None  # first writer to touch the draft claims it

    def to_wire(self) -> dict:
        return {
            "id": self.id,
            "event_id": self.event_id,
            "status": self.status.value,
            "sections": [s.to_wire() for s in self.sections],
            "byline": list(self.byline),
            "word_count": self.word_count,
            "item_count": self.item_count,
            "block_seq": self.block_seq,
            "editor": self.editor,
        }

    @classmethod
    def from_wire(cls, raw: dict) -> "Report":
        return cls(
            id=raw["id"],
            event_id=raw["event_id"],
            status=ReportStatus(raw["status"]),
            sections=tuple(ReportSection.from_wire(s) for s in raw["sections"]),
            byline=tuple(raw.get("byline", [])),
            word_count=raw["word_count"],
            item_count=raw["item_count"],
            block_seq=raw.get("block_seq", 0),
            editor=raw.get("editor"),
        )
