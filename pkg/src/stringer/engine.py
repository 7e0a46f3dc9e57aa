"""Event-sourced workflow engine.

Every mutation is a command that resolves all nondeterminism (ids, clock
reads, pay amounts) into one or more immutable feed events; applying those
events is a pure function of prior state.  Live execution and replay share
the same apply path, so replaying a persisted log always reconstructs the
exact live state.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import report as report_ops
from .feed import Subscription, build_snapshot
from .model import (
    AuthorizationError,
    BudgetExceededError,
    ConflictError,
    ContentDescriptor,
    CorruptLogError,
    DEFAULT_BUDGET_CAP_CENTS,
    DEFAULT_REPORT_GRACE_MINUTES,
    DeadlinePassedError,
    Decision,
    Event,
    EventStatus,
    FeedEvent,
    FeedKind,
    FeedbackNote,
    LedgerEntry,
    LedgerReason,
    NotFoundError,
    REQUESTER,
    Report,
    ReportStatus,
    Role,
    SYSTEM,
    Submission,
    SubmissionState,
    Task,
    TaskOrigin,
    TaskSpec,
    TaskState,
    ValidationError,
    Worker,
    WorkerSource,
    canonical_json,
    ts_to_wire,
)
from .templates import Mission, MissionTemplate, Section, TemplateRegistry, instantiate_missions

_ID_RE = re.compile(r"^([a-z]+)-(\d+)$")


# ---------------------------------------------------------------------------
# Clocks
# ---------------------------------------------------------------------------


class WallClock:
    def now(self) -> datetime:
        return datetime.now(timezone.utc)


class VirtualClock:
    """Settable clock for simulations and tests; only ever moves forward."""

    def __init__(self, start: datetime):
        if start.tzinfo is None:
            raise ValidationError("virtual clock start must be timezone-aware")
        self._now = start.astimezone(timezone.utc)

    def now(self) -> datetime:
        return self._now

    def set(self, at: datetime) -> None:
        at = at.astimezone(timezone.utc)
        if at < self._now:
            raise ValidationError(f"virtual clock cannot move back from {self._now} to {at}")
        self._now = at

    def advance(self, **delta) -> datetime:
        self._now = self._now + timedelta(**delta)
        return self._now


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


class CommandKind(str, Enum):
    CREATE_EVENT = "create_event"
    REGISTER_WORKER = "register_worker"
    START_EVENT = "start_event"
    SUBMIT_CONTENT = "submit_content"
    DECIDE_SUBMISSION = "decide_submission"
    SEND_FEEDBACK = "send_feedback"
    CREATE_BONUS_TASK = "create_bonus_task"
    CLOSE_EVENT = "close_event"
    DRAFT_REPORT = "draft_report"
    EDIT_REPORT_BLOCK = "edit_report_block"
    FINALIZE_REPORT = "finalize_report"


@dataclass(frozen=True)
class Command:
    kind: CommandKind
    issued_by: str  # worker id, "requester", or "system"
    at: datetime
    payload: dict


# ---------------------------------------------------------------------------
# Per-event state
# ---------------------------------------------------------------------------


class EventState:
    """All state for one covered event, owned by a single serialized applier."""

    def __init__(self, event: Event):
        self.event = event
        self.template_id: str | None = None
        self.sections: tuple[Section, ...] = ()
        self.workers: dict[str, Worker] = {}
        self.missions: dict[str, Mission] = {}
        self.tasks: dict[str, Task] = {}
        self.submissions: dict[str, Submission] = {}
        self.submission_order: list[str] = []
        self.ledger: list[LedgerEntry] = []
        self.report: Report | None = None
        self.unfulfilled_task_ids: tuple[str, ...] = ()
        self.actors: set[str] = set()
        self.log: list[FeedEvent] = []
        self.lock = threading.RLock()
        self.subscriptions: list[Subscription] = []

    @property
    def last_seq(self) -> int:
        return self.log[-1].seq if self.log else 0

    def mission_view(self, mission_id: str) -> Mission:
        """The mission with its tasks at their current states."""
        mission = self.missions[mission_id]
        return replace(mission, tasks=tuple(self.tasks[t.id] for t in mission.tasks))

    def replace_task(self, task: Task) -> None:
        self.tasks[task.id] = task
        mission = self.missions[task.mission_id]
        self.missions[task.mission_id] = replace(
            mission,
            tasks=tuple(task if t.id == task.id else t for t in mission.tasks),
        )

    def ledger_total(self) -> int:
        return sum(entry.amount_cents for entry in self.ledger)

    def note_actor(self, actor: str) -> None:
        if actor in self.workers:
            self.actors.add(actor)

    def snapshot(self) -> dict:
        """Canonical wire view of the full domain state (log excluded)."""
        return {
            "event": self.event.to_wire(),
            "template_id": self.template_id,
            "sections": [s.to_wire() for s in self.sections],
            "workers": [w.to_wire() for w in self.workers.values()],
            "missions": [self.missions[mid].to_wire() for mid in self.missions],
            "submissions": [self.submissions[sid].to_wire() for sid in self.submission_order],
            "ledger": [entry.to_wire() for entry in self.ledger],
            "report": self.report.to_wire() if self.report else None,
            "unfulfilled_task_ids": list(self.unfulfilled_task_ids),
            "actors": sorted(self.actors),
            "last_seq": self.last_seq,
        }

    def snapshot_bytes(self) -> bytes:
        return canonical_json(self.snapshot()).encode("utf-8")


# ---------------------------------------------------------------------------
# Apply functions: the one true mutation path (live commit and replay)
# ---------------------------------------------------------------------------


def _apply_event_created(state: EventState, ev: FeedEvent) -> None:
    state.event = Event.from_wire(ev.payload["event"])


def _apply_worker_registered(state: EventState, ev: FeedEvent) -> None:
    worker = Worker.from_wire(ev.payload["worker"])
    state.workers[worker.id] = worker
    fee = ev.payload.get("recruitment_fee_cents", 0)
    if fee:
        state.ledger.append(
            LedgerEntry(
                worker_id=worker.id,
                task_id=None,
                amount_cents=fee,
                reason=LedgerReason.RECRUITMENT_FEE,
                at=ev.at,
            )
        )
    if state.event.status == EventStatus.CREATED:
        state.event = replace(state.event, status=EventStatus.STAFFED)


def _apply_mission_assigned(state: EventState, ev: FeedEvent) -> None:
    template = ev.payload["template"]
    state.template_id = template["id"]
    state.sections = tuple(Section.from_wire(s) for s in template["sections"])
    raw = ev.payload["mission"]
    tasks = tuple(Task.from_wire(t) for t in raw["tasks"])
    mission = Mission(
        id=raw["id"], event_id=raw["event_id"], worker_id=raw["worker_id"], tasks=tasks
    )
    state.missions[mission.id] = mission
    for task in tasks:
        state.tasks[task.id] = task
    if state.event.status == EventStatus.STAFFED:
        state.event = replace(state.event, status=EventStatus.LIVE)


def _apply_submission_added(state: EventState, ev: FeedEvent) -> None:
    submission = Submission.from_wire(ev.payload["submission"])
    state.submissions[submission.id] = submission
    state.submission_order.append(submission.id)
    task = state.tasks[submission.task_id]
    state.replace_task(replace(task, state=TaskState.DONE))
    state.note_actor(submission.worker_id)


def _apply_submission_decided(state: EventState, ev: FeedEvent) -> None:
    payload = ev.payload
    submission = state.submissions[payload["submission_id"]]
    decision = Decision(payload["decision"])
    new_state = (
        SubmissionState.APPROVED if decision == Decision.APPROVE else SubmissionState.REJECTED
    )
    state.submissions[submission.id] = replace(
        submission,
        state=new_state,
        curator_feedback=payload.get("feedback"),
        decided_at=ev.at,
    )
    entry = payload.get("ledger_entry")
    if entry:
        state.ledger.append(LedgerEntry.from_wire(entry))
    if payload.get("task_reopened"):
        task = state.tasks[submission.task_id]
        notes = task.feedback_log
        if payload.get("feedback"):
            notes = notes + (
                FeedbackNote(at=ev.at, curator_id=payload["curator_id"], text=payload["feedback"]),
            )
        state.replace_task(replace(task, state=TaskState.TO_DO, feedback_log=notes))
    state.note_actor(payload["curator_id"])


def _apply_feedback_sent(state: EventState, ev: FeedEvent) -> None:
    task = state.tasks[ev.payload["task_id"]]
    note = FeedbackNote(at=ev.at, curator_id=ev.payload["curator_id"], text=ev.payload["text"])
    state.replace_task(replace(task, feedback_log=task.feedback_log + (note,)))
    state.note_actor(ev.payload["curator_id"])


def _apply_bonus_task_created(state: EventState, ev: FeedEvent) -> None:
    task = Task.from_wire(ev.payload["task"])
    mission = state.missions[task.mission_id]
    state.missions[mission.id] = replace(mission, tasks=mission.tasks + (task,))
    state.tasks[task.id] = task
    state.note_actor(ev.payload["curator_id"])


def _apply_event_closed(state: EventState, ev: FeedEvent) -> None:
    state.event = replace(state.event, status=EventStatus.CLOSED)
    state.unfulfilled_task_ids = tuple(ev.payload.get("unfulfilled_task_ids", []))


def _apply_report_drafted(state: EventState, ev: FeedEvent) -> None:
    state.report = report_ops.build_draft(state, ev.payload["report_id"], ev.payload["actor"])
    state.note_actor(ev.payload["actor"])


def _apply_report_block_edited(state: EventState, ev: FeedEvent) -> None:
    state.report = report_ops.apply_edit(
        state.report, ev.payload["writer_id"], ev.payload["action"], ev.payload["params"]
    )
    state.note_actor(ev.payload["writer_id"])


def _apply_report_finalized(state: EventState, ev: FeedEvent) -> None:
    writer_id = ev.payload["writer_id"]
    state.note_actor(writer_id)
    report = replace(state.report, status=ReportStatus.FINAL)
    writer = state.workers.get(writer_id)
    if writer is not None and writer.display_name not in report.byline:
        report = replace(report, byline=report.byline + (writer.display_name,))
    state.report = report
    state.event = replace(state.event, status=EventStatus.REPORTED)


_APPLY: dict[FeedKind, Callable[[EventState, FeedEvent], None]] = {
    FeedKind.EVENT_CREATED: _apply_event_created,
    FeedKind.WORKER_REGISTERED: _apply_worker_registered,
    FeedKind.MISSION_ASSIGNED: _apply_mission_assigned,
    FeedKind.SUBMISSION_ADDED: _apply_submission_added,
    FeedKind.SUBMISSION_DECIDED: _apply_submission_decided,
    FeedKind.FEEDBACK_SENT: _apply_feedback_sent,
    FeedKind.BONUS_TASK_CREATED: _apply_bonus_task_created,
    FeedKind.EVENT_CLOSED: _apply_event_closed,
    FeedKind.REPORT_DRAFTED: _apply_report_drafted,
    FeedKind.REPORT_BLOCK_EDITED: _apply_report_block_edited,
    FeedKind.REPORT_FINALIZED: _apply_report_finalized,
}


def replay_events(events: Iterable[FeedEvent]) -> EventState | None:
    """Rebuild per-event state from an ordered, gap-free log.

    Returns None for an empty log.  Raises CorruptLogError naming the seq on
    the first gap or unknown event kind.
    """
    state: EventState | None = None
    expected = 1
    for event in events:
        if event.seq != expected:
            raise CorruptLogError(
                f"log gap: expected seq {expected}, found {event.seq}", seq=event.seq
            )
        if event.kind not in _APPLY:
            raise CorruptLogError(f"unknown event kind {event.kind}", seq=event.seq)
        if state is None:
            if event.kind != FeedKind.EVENT_CREATED:
                raise CorruptLogError("log must begin with event_created", seq=event.seq)
            state = EventState(Event.from_wire(event.payload["event"]))
        _APPLY[event.kind](state, event)
        state.log.append(event)
        expected += 1
    return state


def replay_lines(lines: Iterable[str]) -> EventState | None:
    return replay_events(FeedEvent.from_line(line) for line in lines if line.strip())


# ---------------------------------------------------------------------------
# The engine
# ---------------------------------------------------------------------------


class Newsroom:
    """Serialized command applier over all covered events.

    Commands may arrive concurrently from many connections; a per-event lock
    imposes one total order of effects per event, and reads assemble
    immutable records so they never observe torn state.
    """

    def __init__(
        self,
        templates: TemplateRegistry | None = None,
        *,
        clock: WallClock | VirtualClock | None = None,
        data_dir: str | Path | None = None,
    ):
        self.templates = templates if templates is not None else TemplateRegistry()
        self.clock = clock or WallClock()
        self.data_dir = Path(data_dir) if data_dir else None
        self._states: dict[str, EventState] = {}
        self._owner: dict[str, str] = {}  # task/mission/submission/report/worker id -> event id
        self._counters: dict[str, int] = {}
        self._files: dict[str, object] = {}
        self._global_lock = threading.RLock()
        self._commit_hooks: list[Callable[[EventState, list[FeedEvent]], None]] = []
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            self._load_data_dir()

    # -- id allocation ----------------------------------------------------

    def _note_id(self, entity_id: str) -> None:
        match = _ID_RE.match(entity_id)
        if match:
            prefix, number = match.group(1), int(match.group(2))
            if number > self._counters.get(prefix, 0):
                self._counters[prefix] = number

    def _alloc(self, prefix: str) -> str:
        with self._global_lock:
            self._counters[prefix] = self._counters.get(prefix, 0) + 1
            return f"{prefix}-{self._counters[prefix]}"

    # -- persistence and replay -------------------------------------------

    def _load_data_dir(self) -> None:
        for path in sorted(self.data_dir.glob("*.ndjson")):
            with open(path, encoding="utf-8") as fh:
                state = replay_lines(fh)
            if state is None:
                continue
            self._adopt(state)

    def _adopt(self, state: EventState) -> None:
        """Index a replayed event state and restore id high-water marks."""
        self._states[state.event.id] = state
        self._note_id(state.event.id)
        for worker_id in state.workers:
            self._owner[worker_id] = state.event.id
            self._note_id(worker_id)
        for mission_id in state.missions:
            self._owner[mission_id] = state.event.id
            self._note_id(mission_id)
        for task_id in state.tasks:
            self._owner[task_id] = state.event.id
            self._note_id(task_id)
        for submission_id in state.submissions:
            self._owner[submission_id] = state.event.id
            self._note_id(submission_id)
        if state.report is not None:
            self._owner[state.report.id] = state.event.id

    def _persist(self, state: EventState, events: list[FeedEvent]) -> None:
        if self.data_dir is None:
            return
        fh = self._files.get(state.event.id)
        if fh is None:
            fh = open(self.data_dir / f"{state.event.id}.ndjson", "a", encoding="utf-8")
            self._files[state.event.id] = fh
        for event in events:
            fh.write(event.to_line() + "\n")
        fh.flush()

    def close(self) -> None:
        """Flush and release all log files."""
        with self._global_lock:
            for fh in self._files.values():
                fh.close()
            self._files.clear()

    def log_path(self, event_id: str) -> Path | None:
        return self.data_dir / f"{event_id}.ndjson" if self.data_dir else None

    # -- commit machinery ---------------------------------------------------

    def add_commit_hook(self, hook: Callable[[EventState, list[FeedEvent]], None]) -> None:
        self._commit_hooks.append(hook)

    def _stamp(self, state: EventState | None, at: datetime | None) -> datetime:
        now = at or self.clock.now()
        if now.tzinfo is None:
            raise ValidationError("timestamps must be timezone-aware")
        now = now.astimezone(timezone.utc)
        if state is not None and state.log and now < state.log[-1].at:
            now = state.log[-1].at  # per-event time never runs backwards
        return now

    def _commit(
        self, state: EventState, at: datetime, batch: list[tuple[FeedKind, dict]]
    ) -> list[FeedEvent]:
        seq = state.last_seq
        events = [
            FeedEvent(seq=seq + offset + 1, at=at, kind=kind, payload=payload)
            for offset, (kind, payload) in enumerate(batch)
        ]
        self._persist(state, events)
        for event in events:
            _APPLY[event.kind](state, event)
            state.log.append(event)
        complete = state.event.status == EventStatus.REPORTED
        for subscription in state.subscriptions:
            subscription.push(events, complete=complete)
        for hook in self._commit_hooks:
            hook(state, events)
        return events

    # -- lookups ------------------------------------------------------------

    def _state(self, event_id: str) -> EventState:
        try:
            return self._states[event_id]
        except KeyError:
            raise NotFoundError(f"no event {event_id}")

    def _state_owning(self, entity_id: str, what: str) -> EventState:
        event_id = self._owner.get(entity_id)
        if event_id is None:
            raise NotFoundError(f"no {what} {entity_id}")
        return self._states[event_id]

    def get_event(self, event_id: str) -> Event:
        return self._state(event_id).event

    def list_events(self) -> list[Event]:
        return [state.event for state in self._states.values()]

    def get_task(self, task_id: str) -> Task:
        state = self._state_owning(task_id, "task")
        return state.tasks[task_id]

    def get_submission(self, submission_id: str) -> Submission:
        state = self._state_owning(submission_id, "submission")
        return state.submissions[submission_id]

    def get_worker(self, worker_id: str) -> Worker:
        state = self._state_owning(worker_id, "worker")
        return state.workers[worker_id]

    def workers_for_event(self, event_id: str) -> list[Worker]:
        state = self._state(event_id)
        with state.lock:
            return list(state.workers.values())

    def get_report(self, report_id: str) -> Report:
        state = self._state_owning(report_id, "report")
        return state.report

    def report_for_event(self, event_id: str) -> Report | None:
        return self._state(event_id).report

    def mission_for_worker(self, worker_id: str) -> Mission:
        state = self._state_owning(worker_id, "worker")
        with state.lock:
            for mission in state.missions.values():
                if mission.worker_id == worker_id:
                    return state.mission_view(mission.id)
        raise NotFoundError(f"worker {worker_id} has no mission")

    def get_mission(self, mission_id: str) -> Mission:
        state = self._state_owning(mission_id, "mission")
        with state.lock:
            return state.mission_view(mission_id)

    def event_log(self, event_id: str) -> list[FeedEvent]:
        state = self._state(event_id)
        with state.lock:
            return list(state.log)

    def ledger_total(self, event_id: str) -> int:
        state = self._state(event_id)
        with state.lock:
            return state.ledger_total()

    def ledger_entries(self, event_id: str) -> list[LedgerEntry]:
        state = self._state(event_id)
        with state.lock:
            return list(state.ledger)

    def state_snapshot(self, event_id: str) -> dict:
        state = self._state(event_id)
        with state.lock:
            return state.snapshot()

    def feed_snapshot(self, event_id: str) -> dict:
        state = self._state(event_id)
        with state.lock:
            return build_snapshot(state)

    def subscribe(self, event_id: str, from_seq: int = 0) -> Subscription:
        if from_seq < 0:
            raise ValidationError("from_seq must be >= 0")
        state = self._state(event_id)
        with state.lock:
            subscription = Subscription(event_id, from_seq)
            backlog = state.log[from_seq:]
            done = state.event.status == EventStatus.REPORTED
            if backlog or done:
                subscription.push(backlog, complete=done)
            if not done:
                state.subscriptions.append(subscription)
            return subscription

    # -- authorization helpers ---------------------------------------------

    def _require_curator(self, state: EventState, actor: str) -> None:
        # The requester always holds curation rights over their own event.
        if actor == REQUESTER:
            return
        worker = state.workers.get(actor)
        if worker is None or worker.role != Role.CURATOR:
            raise AuthorizationError(f"{actor} is not a curator for this event")

    def _require_writer(self, state: EventState, actor: str) -> None:
        if actor == REQUESTER:
            return
        worker = state.workers.get(actor)
        if worker is None or worker.role != Role.WRITER:
            raise AuthorizationError(f"{actor} is not a writer for this event")

    # -- commands -----------------------------------------------------------

    def create_event(
        self,
        name: str,
        location: str,
        start_time: datetime,
        end_time: datetime,
        event_type: str,
        budget_cap_cents: int | None = None,
        report_deadline: datetime | None = None,
        at: datetime | None = None,
    ) -> Event:
        if start_time >= end_time:
            raise ValidationError("event must start before it ends")
        if report_deadline is None:
            report_deadline = end_time + timedelta(minutes=DEFAULT_REPORT_GRACE_MINUTES)
        if budget_cap_cents is None:
            budget_cap_cents = DEFAULT_BUDGET_CAP_CENTS
        event = Event(
            id="pending",
            name=name,
            location=location,
            start_time=start_time,
            end_time=end_time,
            event_type=event_type,
            budget_cap_cents=budget_cap_cents,
            report_deadline=report_deadline,
        )
        with self._global_lock:
            event = replace(event, id=self._alloc("evt"))
            state = EventState(event)
            self._states[event.id] = state
        with state.lock:
            stamp = self._stamp(None, at)
            self._commit(state, stamp, [(FeedKind.EVENT_CREATED, {"event": event.to_wire()})])
            return state.event

    def register_workers(
        self,
        event_id: str,
        entries: Sequence[tuple[str, str]],
        *,
        role: Role,
        source: WorkerSource,
        fee_cents: int = 0,
        issued_by: str = REQUESTER,
    ) -> list[Worker]:
        """Register a batch of workers atomically; paid fees hit the ledger."""
        if not entries:
            raise ValidationError("no workers to register")
        if fee_cents < 0:
            raise ValidationError("recruitment fee must be >= 0")
        role = Role(role)
        source = WorkerSource(source)
        state = self._state(event_id)
        with state.lock:
            if state.event.status not in (EventStatus.CREATED, EventStatus.STAFFED):
                raise ConflictError(
                    f"workers can only join before the event goes live "
                    f"(status is {state.event.status.value})"
                )
            total_fees = fee_cents * len(entries)
            if total_fees and state.ledger_total() + total_fees > state.event.budget_cap_cents:
                shortfall = state.ledger_total() + total_fees - state.event.budget_cap_cents
                raise BudgetExceededError(
                    f"recruiting {len(entries)} workers at {fee_cents} cents "
                    f"exceeds the budget cap by {shortfall} cents",
                    shortfall_cents=shortfall,
                )
            batch = []
            for display_name, contact_handle in entries:
                worker = Worker(
                    id=self._alloc("w"),
                    display_name=display_name,
                    role=role,
                    source=source,
                    contact_handle=contact_handle,
                )
                batch.append(
                    (
                        FeedKind.WORKER_REGISTERED,
                        {"worker": worker.to_wire(), "recruitment_fee_cents": fee_cents},
                    )
                )
                self._owner[worker.id] = event_id
            stamp = self._stamp(state, None)
            events = self._commit(state, stamp, batch)
            return [state.workers[e.payload["worker"]["id"]] for e in events]

    def start_event(
        self, event_id: str, reporter_ids: Sequence[str], issued_by: str = REQUESTER
    ) -> list[Mission]:
        state = self._state(event_id)
        with state.lock:
            if state.event.status not in (EventStatus.CREATED, EventStatus.STAFFED):
                raise ConflictError(f"event {event_id} already started or finished")
            if not reporter_ids:
                raise ValidationError("at least one field reporter is required")
            reporters = []
            for worker_id in reporter_ids:
                worker = state.workers.get(worker_id)
                if worker is None:
                    raise NotFoundError(f"no registered worker {worker_id} on this event")
                if worker.role != Role.FIELD_REPORTER:
                    raise ValidationError(f"worker {worker_id} is not a field reporter")
                reporters.append(worker)
            template = self.templates.select_template(state.event.event_type)
            missions = instantiate_missions(
                template,
                state.event,
                reporters,
                next_mission_id=lambda: self._alloc("m"),
                next_task_id=lambda: self._alloc("t"),
            )
            template_info = {
                "id": template.id,
                "sections": [s.to_wire() for s in template.sections],
            }
            batch = [
                (FeedKind.MISSION_ASSIGNED, {"mission": m.to_wire(), "template": template_info})
                for m in missions
            ]
            for mission in missions:
                self._owner[mission.id] = event_id
                for task in mission.tasks:
                    self._owner[task.id] = event_id
            stamp = self._stamp(state, None)
            self._commit(state, stamp, batch)
            return [state.mission_view(m.id) for m in missions]

    def submit_content(
        self,
        task_id: str,
        worker_id: str,
        content: ContentDescriptor | dict,
        at: datetime | None = None,
    ) -> Submission:
        if isinstance(content, dict):
            content = ContentDescriptor.from_wire(content)
        state = self._state_owning(task_id, "task")
        with state.lock:
            status = state.event.status
            if status in (EventStatus.CLOSED, EventStatus.REPORTED):
                raise DeadlinePassedError("the event is closed; submissions are over")
            if status != EventStatus.LIVE:
                raise ConflictError("the event is not live yet")
            task = state.tasks[task_id]
            if task.state != TaskState.TO_DO:
                raise ConflictError(
                    f"task {task_id} is awaiting curation or approved; nothing to submit"
                )
            mission = state.missions[task.mission_id]
            if mission.worker_id != worker_id:
                raise AuthorizationError(f"task {task_id} belongs to another reporter")
            stamp = self._stamp(state, at)
            submission = Submission(
                id=self._alloc("s"),
                task_id=task_id,
                worker_id=worker_id,
                content=content,
                seq=len(state.submission_order) + 1,
                submitted_at=stamp,
            )
            self._owner[submission.id] = state.event.id
            self._commit(
                state, stamp, [(FeedKind.SUBMISSION_ADDED, {"submission": submission.to_wire()})]
            )
            return state.submissions[submission.id]

    def decide_submission(
        self,
        submission_id: str,
        curator_id: str,
        decision: Decision | str,
        feedback: str | None = None,
        at: datetime | None = None,
    ) -> Submission:
        decision = Decision(decision)
        state = self._state_owning(submission_id, "submission")
        with state.lock:
            self._require_curator(state, curator_id)
            submission = state.submissions[submission_id]
            if submission.state != SubmissionState.PENDING:
                raise ConflictError(
                    f"submission {submission_id} already {submission.state.value}"
                )
            task = state.tasks[submission.task_id]
            ledger_entry = None
            task_reopened = False
            stamp = self._stamp(state, at)
            if decision == Decision.APPROVE:
                worker = state.workers[submission.worker_id]
                if worker.source == WorkerSource.PAID:
                    amount = task.spec.pay_rate_cents
                    if state.ledger_total() + amount > state.event.budget_cap_cents:
                        shortfall = (
                            state.ledger_total() + amount - state.event.budget_cap_cents
                        )
                        raise BudgetExceededError(
                            f"approving task {task.id} at {amount} cents exceeds "
                            f"the budget cap by {shortfall} cents",
                            shortfall_cents=shortfall,
                        )
                    ledger_entry = LedgerEntry(
                        worker_id=worker.id,
                        task_id=task.id,
                        amount_cents=amount,
                        reason=LedgerReason.TASK_APPROVED,
                        at=stamp,
                    ).to_wire()
            else:
                task_reopened = True  # rejection hands the task back for a retry
            payload = {
                "submission_id": submission_id,
                "decision": decision.value,
                "curator_id": curator_id,
                "feedback": feedback,
                "task_reopened": task_reopened,
                "ledger_entry": ledger_entry,
            }
            self._commit(state, stamp, [(FeedKind.SUBMISSION_DECIDED, payload)])
            return state.submissions[submission_id]

    def send_feedback(
        self, task_id: str, curator_id: str, text: str, at: datetime | None = None
    ) -> Task:
        state = self._state_owning(task_id, "task")
        with state.lock:
            self._require_curator(state, curator_id)
            if not text:
                raise ValidationError("feedback text must be non-empty")
            status = state.event.status
            if status in (EventStatus.CLOSED, EventStatus.REPORTED):
                raise DeadlinePassedError("the event is closed; feedback window is over")
            payload = {"task_id": task_id, "curator_id": curator_id, "text": text}
            stamp = self._stamp(state, at)
            self._commit(state, stamp, [(FeedKind.FEEDBACK_SENT, payload)])
            return state.tasks[task_id]

    def create_bonus_task(
        self,
        mission_id: str,
        curator_id: str,
        spec: TaskSpec | dict,
        at: datetime | None = None,
    ) -> Task:
        state = self._state_owning(mission_id, "mission")
        with state.lock:
            self._require_curator(state, curator_id)
            status = state.event.status
            if status in (EventStatus.CLOSED, EventStatus.REPORTED):
                raise DeadlinePassedError("the event is closed; no more bonus tasks")
            if status != EventStatus.LIVE:
                raise ConflictError("the event is not live yet")
            if isinstance(spec, dict):
                spec = TaskSpec.from_wire(spec)
            if spec.origin != TaskOrigin.CURATOR_BONUS:
                raise ValidationError("bonus tasks must have origin curator_bonus")
            if spec.target_section not in {s.id for s in state.sections}:
                raise ValidationError(
                    f"bonus task targets unknown section {spec.target_section!r}"
                )
            task = Task(id=self._alloc("t"), spec=spec, mission_id=mission_id)
            self._owner[task.id] = state.event.id
            payload = {"mission_id": mission_id, "curator_id": curator_id, "task": task.to_wire()}
            stamp = self._stamp(state, at)
            self._commit(state, stamp, [(FeedKind.BONUS_TASK_CREATED, payload)])
            return state.tasks[task.id]

    def close_event(
        self, event_id: str, at: datetime | None = None, issued_by: str = SYSTEM
    ) -> Event:
        state = self._state(event_id)
        with state.lock:
            if state.event.status != EventStatus.LIVE:
                raise ConflictError(f"event {event_id} is not live")
            stamp = self._stamp(state, at)
            if stamp < state.event.end_time:
                raise ValidationError("cannot close before the event ends")
            batch: list[tuple[FeedKind, dict]] = []
            unfulfilled = []
            for submission_id in state.submission_order:
                submission = state.submissions[submission_id]
                if submission.state != SubmissionState.PENDING:
                    continue
                unfulfilled.append(submission.task_id)
                batch.append(
                    (
                        FeedKind.SUBMISSION_DECIDED,
                        {
                            "submission_id": submission_id,
                            "decision": Decision.REJECT.value,
                            "curator_id": SYSTEM,
                            "feedback": "event closed",
                            # the event is over: the task stays done but unfulfilled
                            "task_reopened": False,
                            "ledger_entry": None,
                        },
                    )
                )
            batch.append((FeedKind.EVENT_CLOSED, {"unfulfilled_task_ids": unfulfilled}))
            self._commit(state, stamp, batch)
            return state.event

    def draft_report(
        self, event_id: str, actor: str = REQUESTER, at: datetime | None = None
    ) -> Report:
        state = self._state(event_id)
        with state.lock:
            if state.event.status == EventStatus.REPORTED:
                raise ConflictError(f"event {event_id} is already reported")
            if state.event.status != EventStatus.CLOSED:
                raise ConflictError(f"event {event_id} is not closed yet")
            self._require_writer(state, actor)
            report_id = f"rpt-{state.event.id}"
            self._owner[report_id] = event_id
            stamp = self._stamp(state, at)
            self._commit(
                state, stamp, [(FeedKind.REPORT_DRAFTED, {"report_id": report_id, "actor": actor})]
            )
            return state.report

    def edit_report_block(
        self,
        report_id: str,
        writer_id: str,
        action: str,
        params: dict,
        at: datetime | None = None,
    ) -> Report:
        state = self._state_owning(report_id, "report")
        with state.lock:
            report = state.report
            if report is None or report.id != report_id:
                raise NotFoundError(f"no report {report_id}")
            if report.status != ReportStatus.DRAFT:
                raise ConflictError("the report is final; no further edits")
            self._require_writer(state, writer_id)
            if report.editor is not None and report.editor != writer_id:
                raise ConflictError(f"report is being edited by {report.editor}")
            # Validate the edit before committing anything.
            report_ops.apply_edit(report, writer_id, action, params)
            payload = {
                "report_id": report_id,
                "writer_id": writer_id,
                "action": action,
                "params": params,
            }
            stamp = self._stamp(state, at)
            self._commit(state, stamp, [(FeedKind.REPORT_BLOCK_EDITED, payload)])
            return state.report

    def finalize_report(
        self, report_id: str, writer_id: str, at: datetime | None = None
    ) -> Report:
        state = self._state_owning(report_id, "report")
        with state.lock:
            report = state.report
            if report is None or report.id != report_id:
                raise NotFoundError(f"no report {report_id}")
            if report.status != ReportStatus.DRAFT:
                raise ConflictError("the report is already final")
            self._require_writer(state, writer_id)
            if report.editor is not None and report.editor != writer_id:
                raise ConflictError(f"report is being edited by {report.editor}")
            stats = report_ops.compute_stats(state)
            if writer_id in state.workers and writer_id not in state.actors:
                stats["n_workers"] += 1  # the finalizing writer counts as an actor
            payload = {"report_id": report_id, "writer_id": writer_id, "stats": stats}
            stamp = self._stamp(state, at)
            self._commit(state, stamp, [(FeedKind.REPORT_FINALIZED, payload)])
            return state.report

    def report_stats(self, event_id: str) -> dict:
        state = self._state(event_id)
        with state.lock:
            if state.event.status != EventStatus.REPORTED:
                raise ConflictError(f"event {event_id} has no finalized report yet")
            return report_ops.compute_stats(state)

    # -- generic command dispatch -------------------------------------------

    def execute(self, command: Command):
        """Apply one command record; payload keys mirror the method kwargs."""
        payload = dict(command.payload)
        kind = command.kind
        if kind == CommandKind.CREATE_EVENT:
            return self.create_event(at=command.at, **payload)
        if kind == CommandKind.REGISTER_WORKER:
            entries = [(payload["display_name"], payload["contact_handle"])]
            return self.register_workers(
                payload["event_id"],
                entries,
                role=payload["role"],
                source=payload["source"],
                fee_cents=payload.get("fee_cents", 0),
                issued_by=command.issued_by,
            )[0]
        if kind == CommandKind.START_EVENT:
            return self.start_event(
                payload["event_id"], payload["reporter_ids"], issued_by=command.issued_by
            )
        if kind == CommandKind.SUBMIT_CONTENT:
            return self.submit_content(
                payload["task_id"], command.issued_by, payload["content"], at=command.at
            )
        if kind == CommandKind.DECIDE_SUBMISSION:
            return self.decide_submission(
                payload["submission_id"],
                command.issued_by,
                payload["decision"],
                payload.get("feedback"),
                at=command.at,
            )
        if kind == CommandKind.SEND_FEEDBACK:
            return self.send_feedback(
                payload["task_id"], command.issued_by, payload["text"], at=command.at
            )
        if kind == CommandKind.CREATE_BONUS_TASK:
            return self.create_bonus_task(
                payload["mission_id"], command.issued_by, payload["spec"], at=command.at
            )
        if kind == CommandKind.CLOSE_EVENT:
            return self.close_event(payload["event_id"], at=command.at, issued_by=command.issued_by)
        if kind == CommandKind.DRAFT_REPORT:
            return self.draft_report(payload["event_id"], command.issued_by, at=command.at)
        if kind == CommandKind.EDIT_REPORT_BLOCK:
            return self.edit_report_block(
                payload["report_id"],
                command.issued_by,
                payload["action"],
                payload["params"],
                at=command.at,
            )
        if kind == CommandKind.FINALIZE_REPORT:
            return self.finalize_report(payload["report_id"], command.issued_by, at=command.at)
        raise ValidationError(f"unknown command kind {kind!r}")
