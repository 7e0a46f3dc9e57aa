"""Deterministic scripted crowd driving the service under virtual time.

Reporter, curator, and writer bots act through a discrete-event scheduler:
virtual time advances only between actions, ties break by scheduling order,
and every random draw comes from a named stream seeded from the scenario
seed (Mersenne Twister via ``random.Random``, stable across platforms).
The same config and seed therefore produce byte-identical event logs.
"""

from __future__ import annotations

import heapq
import json
import random
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable

from .engine import EventState, Newsroom, VirtualClock, replay_lines
from .feed import build_snapshot
from .gateway import create_app
from .model import FeedEvent, NewsroomError, SubmissionState, TaskState, ValidationError
from .recruiting import PaidMarketplace, RosterEntry, Sources, VolunteerRoster
from .templates import TemplateRegistry

BASE_TIME = datetime(2024, 5, 1, 17, 0, tzinfo=timezone.utc)
SETUP_LEAD_MINUTES = 15

_WORDS = (
    "crowd stage music local council vendor street light cheer banner booth "
    "neighbors question answer winner team project mural coffee rain sun "
    "line applause speech corner kids dance drums poster volunteers"
).split()

_FEEDBACK_LINES = (
    "next time focus on this specific aspect of a photo",
    "get closer to the subject",
    "add names and spellings",
    "one more angle please",
    "shorter and more concrete",
)


# ---------------------------------------------------------------------------
# Scenario configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatencySpec:
    """Discrete uniform over whole minutes, inclusive on both ends."""

    low: int = 2
    high: int = 5

    def __post_init__(self):
        if self.low < 0 or self.high < self.low:
            raise ValidationError(f"bad latency range [{self.low}, {self.high}]")

    def sample(self, rng: random.Random) -> int:
        return rng.randint(self.low, self.high)

    @classmethod
    def from_wire(cls, raw: dict | None) -> "LatencySpec":
        raw = raw or {}
        return cls(low=raw.get("low", 2), high=raw.get("high", 5))


@dataclass(frozen=True)
class ReporterBehavior:
    response_latency_minutes: LatencySpec = LatencySpec()
    completion_probability: float = 1.0
    submissions_target: tuple[int, ...] | int = 3

    def __post_init__(self):
        if not 0.0 <= self.completion_probability <= 1.0:
            raise ValidationError("completion_probability must be in [0, 1]")

    def targets(self, n_reporters: int) -> list[int]:
        if isinstance(self.submissions_target, int):
            return [self.submissions_target] * n_reporters
        if len(self.submissions_target) != n_reporters:
            raise ValidationError(
                f"submissions_target lists {len(self.submissions_target)} reporters, "
                f"scenario has {n_reporters}"
            )
        return list(self.submissions_target)


@dataclass(frozen=True)
class CuratorBehavior:
    approve_probability: float = 0.8
    feedback_probability: float = 0.5
    bonus_rate: int = 0  # scripted extra bonus tasks per event
    review_latency_minutes: LatencySpec = LatencySpec(1, 3)
    manual: bool = False  # True pauses the curator bot (a human takes over)

    def __post_init__(self):
        for name in ("approve_probability", "feedback_probability"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1]")
        if self.bonus_rate < 0:
            raise ValidationError("bonus_rate must be >= 0")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    event_type: str
    n_reporters: int
    reporter_source: str  # "paid" | "volunteer"
    reporter: ReporterBehavior = ReporterBehavior()
    curator: CuratorBehavior = CuratorBehavior()
    budget_cap_cents: int = 15_000
    seed: int = 0
    event_duration_minutes: int = 120
    recruitment_fee_cents: int = 0
    writer: str = "requester"  # "requester" | "paid_worker"
    expected: dict | None = None  # optional structural assertions for suites

    def __post_init__(self):
        if self.n_reporters < 0:
            raise ValidationError("n_reporters must be >= 0")
        if self.reporter_source not in ("paid", "volunteer"):
            raise ValidationError(f"unknown reporter source {self.reporter_source!r}")
        if self.writer not in ("requester", "paid_worker"):
            raise ValidationError(f"unknown writer kind {self.writer!r}")
        if self.event_duration_minutes < 2:
            raise ValidationError("events must run at least 2 minutes")
        if self.n_reporters:
            self.reporter.targets(self.n_reporters)  # validates list length

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        reporter_raw = dict(raw.get("reporter", {}))
        target = reporter_raw.get("submissions_target", 3)
        reporter = ReporterBehavior(
            response_latency_minutes=LatencySpec.from_wire(
                reporter_raw.get("response_latency_minutes")
            ),
            completion_probability=reporter_raw.get("completion_probability", 1.0),
            submissions_target=tuple(target) if isinstance(target, list) else target,
        )
        curator_raw = dict(raw.get("curator", {}))
        curator = CuratorBehavior(
            approve_probability=curator_raw.get("approve_probability", 0.8),
            feedback_probability=curator_raw.get("feedback_probability", 0.5),
            bonus_rate=curator_raw.get("bonus_rate", 0),
            review_latency_minutes=LatencySpec.from_wire(
                curator_raw.get("review_latency_minutes") or {"low": 1, "high": 3}
            ),
            manual=curator_raw.get("manual", False),
        )
        return cls(
            name=raw["name"],
            event_type=raw["event_type"],
            n_reporters=raw["n_reporters"],
            reporter_source=raw["reporter_source"],
            reporter=reporter,
            curator=curator,
            budget_cap_cents=raw.get("budget_cap_cents", 15_000),
            seed=raw.get("seed", 0),
            event_duration_minutes=raw.get("event_duration_minutes", 120),
            recruitment_fee_cents=raw.get("recruitment_fee_cents", 0),
            writer=raw.get("writer", "requester"),
            expected=raw.get("expected"),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ScenarioConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class ScenarioResult:
    name: str
    event_id: str | None
    cost_cents: int
    n_workers: int
    submitted_items: int
    approved_items: int
    report_word_count: int
    virtual_minutes_to_report: float
    invariant_violations: list[str] = field(default_factory=list)
    log_bytes: bytes = b""
    snapshot_bytes: bytes = b""
    commands_issued: int = 0

    @property
    def ok(self) -> bool:
        return not self.invariant_violations

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "event_id": self.event_id,
            "cost_cents": self.cost_cents,
            "n_workers": self.n_workers,
            "submitted_items": self.submitted_items,
            "approved_items": self.approved_items,
            "report_word_count": self.report_word_count,
            "virtual_minutes_to_report": self.virtual_minutes_to_report,
            "commands_issued": self.commands_issued,
            "invariant_violations": list(self.invariant_violations),
        }


# ---------------------------------------------------------------------------
# API client seam: bots speak the gateway's request shapes either over the
# in-process HTTP surface (the default) or directly against the engine.
# ---------------------------------------------------------------------------


class ApiError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


class HttpTransport:
    """Loopback HTTP client over the real gateway routes."""

    def __init__(self, newsroom: Newsroom, sources: Sources):
        from fastapi.testclient import TestClient

        self.newsroom = newsroom
        self.commands_issued = 0
        self._client = TestClient(create_app(newsroom, sources))

    def close(self):
        self._client.close()

    def _call(self, method: str, url: str, actor: str | None = None, body: dict | None = None,
              params: dict | None = None):
        if method != "GET":
            self.commands_issued += 1
        headers = {"Authorization": f"Bearer {actor}"} if actor else None
        response = self._client.request(method, url, json=body, headers=headers, params=params)
        if response.status_code >= 400:
            error = response.json().get("error", {})
            raise ApiError(error.get("code", "error"), error.get("message", response.text))
        if response.status_code == 204 or not response.content:
            return None
        return response.json()

    def create_event(self, body: dict) -> dict:
        return self._call("POST", "/api/events", body=body)

    def recruit(self, event_id: str, body: dict) -> list[dict]:
        return self._call("POST", f"/api/events/{event_id}/workers", body=body)["workers"]

    def start(self, event_id: str, reporter_ids: list[str]) -> list[dict]:
        return self._call(
            "POST", f"/api/events/{event_id}/start", body={"reporter_ids": reporter_ids}
        )["missions"]

    def mission_for(self, worker_id: str) -> dict | None:
        try:
            return self._call("GET", f"/api/workers/{worker_id}/mission")
        except ApiError as exc:
            if exc.code == "not_found":
                return None
            raise

    def submit(self, task_id: str, worker_id: str, content: dict) -> dict:
        return self._call(
            "POST", f"/api/tasks/{task_id}/submissions", actor=worker_id,
            body={"content": content},
        )

    def decide(self, submission_id: str, curator: str, decision: str,
               feedback: str | None = None) -> dict:
        return self._call(
            "POST", f"/api/submissions/{submission_id}/decision", actor=curator,
            body={"decision": decision, "feedback": feedback},
        )

    def send_feedback(self, task_id: str, curator: str, text: str) -> dict:
        return self._call(
            "POST", f"/api/tasks/{task_id}/feedback", actor=curator, body={"text": text}
        )

    def bonus(self, mission_id: str, curator: str, body: dict) -> dict:
        return self._call(
            "POST", f"/api/missions/{mission_id}/bonus-tasks", actor=curator, body=body
        )

    def close_event(self, event_id: str) -> dict:
        return self._call("POST", f"/api/events/{event_id}/close", actor="system")

    def feed(self, event_id: str) -> dict:
        return self._call("GET", f"/api/events/{event_id}/feed")

    def draft(self, event_id: str, actor: str) -> dict:
        return self._call("POST", f"/api/events/{event_id}/report/draft", actor=actor)

    def edit(self, report_id: str, actor: str, action: str, params: dict) -> dict:
        return self._call(
            "POST", f"/api/reports/{report_id}/blocks", actor=actor,
            body={"action": action, "params": params},
        )

    def finalize(self, report_id: str, actor: str) -> dict:
        return self._call("POST", f"/api/reports/{report_id}/finalize", actor=actor)

    def stats(self, event_id: str) -> dict:
        return self._call("GET", f"/api/events/{event_id}/stats")


class DirectTransport:
    """Same surface, bound straight to the engine; used for large fuzz sweeps."""

    def __init__(self, newsroom: Newsroom, sources: Sources):
        self.newsroom = newsroom
        self.sources = sources
        self.commands_issued = 0

    def close(self):
        pass

    def _wrap(self, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NewsroomError as exc:
            raise ApiError(exc.code, exc.message)

    def _mutate(self, fn, *args, **kwargs):
        self.commands_issued += 1
        return self._wrap(fn, *args, **kwargs)

    def create_event(self, body: dict) -> dict:
        from .model import wire_to_ts

        event = self._mutate(
            self.newsroom.create_event,
            name=body["name"],
            location=body["location"],
            start_time=wire_to_ts(body["start_time"]),
            end_time=wire_to_ts(body["end_time"]),
            event_type=body["event_type"],
            budget_cap_cents=body.get("budget_cap_cents"),
        )
        return event.to_wire()

    def recruit(self, event_id: str, body: dict) -> list[dict]:
        from .recruiting import RecruitmentRequest, recruit

        workers = self._mutate(
            recruit,
            self.newsroom,
            self.sources,
            body["source"],
            RecruitmentRequest(
                event_id=event_id,
                role=body["role"],
                count=body["count"],
                offer_cents=body.get("offer_cents", 0),
                location_hint=body.get("location_hint", ""),
            ),
        )
        return [w.to_wire() for w in workers]

    def start(self, event_id: str, reporter_ids: list[str]) -> list[dict]:
        missions = self._mutate(self.newsroom.start_event, event_id, reporter_ids)
        return [m.to_wire() for m in missions]

    def mission_for(self, worker_id: str) -> dict | None:
        try:
            return self.newsroom.mission_for_worker(worker_id).to_wire()
        except NewsroomError:
            return None

    def submit(self, task_id: str, worker_id: str, content: dict) -> dict:
        return self._mutate(self.newsroom.submit_content, task_id, worker_id, content).to_wire()

    def decide(self, submission_id: str, curator: str, decision: str,
               feedback: str | None = None) -> dict:
        return self._mutate(
            self.newsroom.decide_submission, submission_id, curator, decision, feedback
        ).to_wire()

    def send_feedback(self, task_id: str, curator: str, text: str) -> dict:
        return self._mutate(self.newsroom.send_feedback, task_id, curator, text).to_wire()

    def bonus(self, mission_id: str, curator: str, body: dict) -> dict:
        mission = self.newsroom.get_mission(mission_id)
        spec = {
            "id": f"bonus-{mission_id}-{len(mission.tasks) + 1}",
            "kind": body["kind"],
            "instructions": body["instructions"],
            "target_section": body["target_section"],
            "pay_rate_cents": body.get("pay_rate_cents", 0),
            "origin": "curator_bonus",
        }
        return self._mutate(self.newsroom.create_bonus_task, mission_id, curator, spec).to_wire()

    def close_event(self, event_id: str) -> dict:
        return self._mutate(self.newsroom.close_event, event_id).to_wire()

    def feed(self, event_id: str) -> dict:
        return self._wrap(self.newsroom.feed_snapshot, event_id)

    def draft(self, event_id: str, actor: str) -> dict:
        return self._mutate(self.newsroom.draft_report, event_id, actor).to_wire()

    def edit(self, report_id: str, actor: str, action: str, params: dict) -> dict:
        return self._mutate(
            self.newsroom.edit_report_block, report_id, actor, action, params
        ).to_wire()

    def finalize(self, report_id: str, actor: str) -> dict:
        return self._mutate(self.newsroom.finalize_report, report_id, actor).to_wire()

    def stats(self, event_id: str) -> dict:
        return self._wrap(self.newsroom.report_stats, event_id)


# ---------------------------------------------------------------------------
# Discrete-event scheduler
# ---------------------------------------------------------------------------


class Scheduler:
    """Min-heap of (virtual time, insertion order) actions."""

    def __init__(self, clock: VirtualClock):
        self.clock = clock
        self._heap: list[tuple[datetime, int, Callable[[], None]]] = []
        self._order = 0

    def call_at(self, at: datetime, action: Callable[[], None]) -> None:
        self._order += 1
        heapq.heappush(self._heap, (at, self._order, action))

    def call_in(self, minutes: float, action: Callable[[], None]) -> None:
        self.call_at(self.clock.now() + timedelta(minutes=minutes), action)

    def run(self) -> None:
        while self._heap:
            at, _, action = heapq.heappop(self._heap)
            if at > self.clock.now():
                self.clock.set(at)
            action()


# ---------------------------------------------------------------------------
# Invariant checking (engine hook + log recount)
# ---------------------------------------------------------------------------


class InvariantChecker:
    """Re-derives the core invariants after every commit batch."""

    def __init__(self):
        self.violations: list[str] = []

    def hook(self, state: EventState, events: list[FeedEvent]) -> None:
        log = state.log
        head = len(log) - len(events)
        for offset, event in enumerate(events):
            expected = head + offset + 1
            if event.seq != expected:
                self.violations.append(
                    f"{state.event.id}: seq {event.seq} where {expected} expected"
                )
        by_state = {s: 0 for s in SubmissionState}
        for submission_id in state.submission_order:
            by_state[state.submissions[submission_id].state] += 1
        if sum(by_state.values()) != len(state.submission_order):
            self.violations.append(f"{state.event.id}: submission conservation broken")
        seqs = sorted(state.submissions[s].seq for s in state.submission_order)
        if seqs != list(range(1, len(seqs) + 1)):
            self.violations.append(f"{state.event.id}: submission seqs not dense: {seqs}")
        if state.ledger_total() > state.event.budget_cap_cents:
            self.violations.append(
                f"{state.event.id}: ledger {state.ledger_total()} over cap "
                f"{state.event.budget_cap_cents}"
            )
        if state.event.status.value == "live":
            open_work = {}  # task id -> has pending or approved submission
            for submission_id in state.submission_order:
                submission = state.submissions[submission_id]
                if submission.state in (SubmissionState.PENDING, SubmissionState.APPROVED):
                    open_work[submission.task_id] = True
            for task_id, task in state.tasks.items():
                should_be_done = open_work.get(task_id, False)
                is_done = task.state == TaskState.DONE
                if should_be_done != is_done:
                    self.violations.append(
                        f"{state.event.id}: task {task_id} liveness broken "
                        f"(state={task.state.value}, open_submission={should_be_done})"
                    )


def recount_log(lines: list[str]) -> dict:
    """Independent fold over a persisted log: totals by plain counting."""
    submitted = approved = 0
    cost = 0
    finalized_at = None
    closed_at = None
    for line in lines:
        record = json.loads(line)
        kind = record["kind"]
        payload = record["payload"]
        if kind == "submission_added":
            submitted += 1
        elif kind == "submission_decided":
            if payload["decision"] == "approve":
                approved += 1
            if payload.get("ledger_entry"):
                cost += payload["ledger_entry"]["amount_cents"]
        elif kind == "worker_registered":
            cost += payload.get("recruitment_fee_cents", 0)
        elif kind == "event_closed":
            closed_at = record["at"]
        elif kind == "report_finalized":
            finalized_at = record["at"]
    return {
        "submitted": submitted,
        "approved": approved,
        "cost": cost,
        "closed_at": closed_at,
        "finalized_at": finalized_at,
    }


# ---------------------------------------------------------------------------
# The bots
# ---------------------------------------------------------------------------


_BONUS_CYCLE = (
    ("text_update", "impressions", "Send a quick impression of the scene right now."),
    ("photo", "photos", "Grab one more photo of whatever is happening now."),
    ("interview", "interviews", "Ask one more attendee a quick question."),
)


class ScenarioRun:
    def __init__(self, config: ScenarioConfig, transport, clock: VirtualClock,
                 scheduler: Scheduler):
        self.config = config
        self.api = transport
        self.clock = clock
        self.scheduler = scheduler
        self.curator_id = "requester"
        self.writer_id = "requester"
        self.event: dict | None = None
        self.reporters: list[dict] = []
        self.missions_by_worker: dict[str, str] = {}
        self.made: dict[str, int] = {}
        self.targets: dict[str, int] = {}
        self.dropped: set[str] = set()
        self.closed = False
        self.bonus_counter = 0
        self.report_id: str | None = None
        self.finalized_at: datetime | None = None
        self.rng_reporters: dict[str, random.Random] = {}
        self.rng_curator = random.Random(f"{config.seed}:curator")
        self.rng_writer = random.Random(f"{config.seed}:writer")
        self.rng_bonus = random.Random(f"{config.seed}:bonus")

    # -- setup --

    def stage(self) -> None:
        config = self.config
        start = BASE_TIME + timedelta(minutes=SETUP_LEAD_MINUTES)
        end = start + timedelta(minutes=config.event_duration_minutes)
        self.end_time = end
        self.event = self.api.create_event(
            {
                "name": f"{config.name} pilot",
                "location": "Maple District",
                "start_time": start.isoformat(timespec="microseconds"),
                "end_time": end.isoformat(timespec="microseconds"),
                "event_type": config.event_type,
                "budget_cap_cents": config.budget_cap_cents,
            }
        )
        if config.n_reporters == 0:
            return
        source = "volunteer_roster" if config.reporter_source == "volunteer" else "paid_marketplace"
        try:
            self.reporters = self.api.recruit(
                self.event["id"],
                {
                    "source": source,
                    "role": "field_reporter",
                    "count": config.n_reporters,
                    "offer_cents": config.recruitment_fee_cents,
                    "location_hint": "Maple District",
                },
            )
        except ApiError:
            return  # budget or supply shortfall: the event is never staffed
        if config.writer == "paid_worker":
            try:
                writer = self.api.recruit(
                    self.event["id"],
                    {"source": "paid_marketplace", "role": "writer", "count": 1},
                )[0]
                self.writer_id = writer["id"]
            except ApiError:
                pass  # the requester writes instead
        try:
            missions = self.api.start(self.event["id"], [w["id"] for w in self.reporters])
        except ApiError:
            return  # understaffed template: leave the event unstarted
        for mission in missions:
            self.missions_by_worker[mission["worker_id"]] = mission["id"]

        targets = self.config.reporter.targets(config.n_reporters)
        for index, reporter in enumerate(self.reporters):
            worker_id = reporter["id"]
            self.targets[worker_id] = targets[index]
            self.made[worker_id] = 0
            self.rng_reporters[worker_id] = random.Random(f"{config.seed}:reporter:{index}")
            if self.targets[worker_id] > 0 and worker_id in self.missions_by_worker:
                rng = self.rng_reporters[worker_id]
                first = start + timedelta(
                    minutes=config.reporter.response_latency_minutes.sample(rng)
                )
                self.scheduler.call_at(first, lambda w=worker_id: self.reporter_turn(w))

        for k in range(config.curator.bonus_rate):
            offset = config.event_duration_minutes * (k + 1) / (config.curator.bonus_rate + 1)
            self.scheduler.call_at(
                start + timedelta(minutes=offset), self.scripted_bonus
            )

        self.scheduler.call_at(end, self.close_turn)

    # -- reporter bot --

    def reporter_turn(self, worker_id: str) -> None:
        config = self.config
        if self.closed or worker_id in self.dropped:
            return
        if self.made[worker_id] >= self.targets[worker_id]:
            return
        if self.clock.now() >= self.end_time:
            return
        rng = self.rng_reporters[worker_id]
        if rng.random() > config.reporter.completion_probability:
            self.dropped.add(worker_id)
            return
        mission = self.api.mission_for(worker_id)
        if mission is None:
            return
        task = next((t for t in mission["tasks"] if t["state"] == "to_do"), None)
        if task is None:
            task = self.request_bonus(mission["id"])
            if task is None:
                return
        content = self.compose(task, rng)
        try:
            submission = self.api.submit(task["id"], worker_id, content)
        except ApiError:
            return  # deadline raced us; the close turn owns the rest
        self.made[worker_id] += 1
        if not config.curator.manual:
            review_in = config.curator.review_latency_minutes.sample(self.rng_curator)
            self.scheduler.call_in(review_in, self.curator_turn)
        if self.made[worker_id] < self.targets[worker_id]:
            wait = config.reporter.response_latency_minutes.sample(rng)
            next_at = self.clock.now() + timedelta(minutes=wait)
            cutoff = self.end_time - timedelta(minutes=1)
            if next_at > cutoff:
                next_at = max(self.clock.now(), cutoff)
            self.scheduler.call_at(next_at, lambda w=worker_id: self.reporter_turn(w))

    def compose(self, task: dict, rng: random.Random) -> dict:
        kind = task["spec"]["kind"]
        number = sum(self.made.values()) + 1
        if kind in ("photo", "video", "audio"):
            extension = {"photo": "jpg", "video": "mp4", "audio": "m4a"}[kind]
            return {
                "media": kind,
                "payload_ref": f"https://media.example/{self.event['id']}/{number}.{extension}",
                "caption": " ".join(rng.choices(_WORDS, k=rng.randint(3, 6))),
            }
        words = rng.randint(8, 20)
        return {
            "media": "text",
            "payload_ref": " ".join(rng.choices(_WORDS, k=words)),
            "caption": None,
        }

    def request_bonus(self, mission_id: str) -> dict | None:
        kind, section, instructions = _BONUS_CYCLE[self.bonus_counter % len(_BONUS_CYCLE)]
        self.bonus_counter += 1
        try:
            return self.api.bonus(
                mission_id,
                self.curator_id,
                {"kind": kind, "instructions": instructions, "target_section": section,
                 "pay_rate_cents": 200},
            )
        except ApiError:
            return None

    # -- curator bot --

    def curator_turn(self) -> None:
        if self.closed:
            return
        feed = self.api.feed(self.event["id"])
        pending = sorted(
            (
                item
                for section in feed["sections"]
                for item in section["items"]
                if item["state"] == "pending"
            ),
            key=lambda item: item["seq"],
        )
        if not pending:
            return
        item = pending[0]
        approve = self.rng_curator.random() < self.config.curator.approve_probability
        if approve:
            try:
                self.api.decide(item["id"], self.curator_id, "approve")
                if self.rng_curator.random() < self.config.curator.feedback_probability / 3:
                    self.api.send_feedback(
                        item["task_id"], self.curator_id, "good one, keep them coming"
                    )
                return
            except ApiError as exc:
                if exc.code != "budget_exceeded":
                    return
                feedback = "budget exhausted"
                try:
                    self.api.decide(item["id"], self.curator_id, "reject", feedback)
                except ApiError:
                    pass
                return
        feedback = None
        if self.rng_curator.random() < self.config.curator.feedback_probability:
            feedback = _FEEDBACK_LINES[self.rng_curator.randrange(len(_FEEDBACK_LINES))]
        try:
            self.api.decide(item["id"], self.curator_id, "reject", feedback)
        except ApiError:
            pass

    def scripted_bonus(self) -> None:
        if self.closed or not self.missions_by_worker:
            return
        mission_ids = sorted(self.missions_by_worker.values())
        mission_id = mission_ids[self.rng_bonus.randrange(len(mission_ids))]
        self.request_bonus(mission_id)

    # -- close and writer bot --

    def close_turn(self) -> None:
        if self.closed:
            return
        try:
            self.api.close_event(self.event["id"])
        except ApiError:
            return
        self.closed = True
        self.scheduler.call_in(2, self.writer_draft_turn)

    def writer_draft_turn(self) -> None:
        report = self.api.draft(self.event["id"], self.writer_id)
        self.report_id = report["id"]
        self.scheduler.call_in(2, self.writer_edit_turn)

    def writer_edit_turn(self) -> None:
        words = self.rng_writer.randint(15, 30)
        intro = " ".join(self.rng_writer.choices(_WORDS, k=words)).capitalize() + "."
        try:
            self.api.edit(
                self.report_id, self.writer_id, "insert_text",
                {"section_id": "impressions", "text": intro, "position": 0},
            )
        except ApiError:
            pass
        self.scheduler.call_in(2, self.writer_finalize_turn)

    def writer_finalize_turn(self) -> None:
        self.api.finalize(self.report_id, self.writer_id)
        self.finalized_at = self.clock.now()


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def _make_sources(config: ScenarioConfig) -> Sources:
    roster_size = config.n_reporters + 4
    roster = VolunteerRoster(
        [RosterEntry(f"Vol {i + 1}", f"vol{i + 1}@town.example") for i in range(roster_size)]
    )
    return Sources(marketplace=PaidMarketplace(supply=config.n_reporters + 4), roster=roster)


def run_scenario(
    config: ScenarioConfig,
    *,
    data_dir: str | Path | None = None,
    transport: str = "http",
) -> ScenarioResult:
    """Run one scripted crowd scenario under virtual time.

    Stands up an in-process service on a fresh data directory, drives the
    bots to a finalized report, then validates the persisted log by replay
    and by independent recount.
    """
    own_dir = None
    if data_dir is None:
        own_dir = tempfile.TemporaryDirectory(prefix="stringer-sim-")
        data_dir = own_dir.name
    try:
        clock = VirtualClock(BASE_TIME)
        newsroom = Newsroom(TemplateRegistry(), clock=clock, data_dir=data_dir)
        checker = InvariantChecker()
        newsroom.add_commit_hook(checker.hook)
        sources = _make_sources(config)
        api = (HttpTransport if transport == "http" else DirectTransport)(newsroom, sources)
        scheduler = Scheduler(clock)
        run = ScenarioRun(config, api, clock, scheduler)
        run.stage()
        scheduler.run()
        result = _collect(config, run, newsroom, checker)
        api.close()
        newsroom.close()
        return result
    finally:
        if own_dir is not None:
            own_dir.cleanup()


def _collect(
    config: ScenarioConfig, run: ScenarioRun, newsroom: Newsroom, checker: InvariantChecker
) -> ScenarioResult:
    violations = list(checker.violations)
    event_id = run.event["id"] if run.event else None
    commands = getattr(run.api, "commands_issued", 0)
    if event_id is None or not run.missions_by_worker:
        # with no staffed crowd the event never legally reaches "closed";
        # the run reports zeros and the log still has to replay cleanly
        log_bytes = b""
        live_snapshot = b""
        if event_id is not None:
            log_bytes = newsroom.log_path(event_id).read_bytes()
            live_snapshot = newsroom._states[event_id].snapshot_bytes()
            replayed = replay_lines(log_bytes.decode("utf-8").splitlines())
            if replayed is None or replayed.snapshot_bytes() != live_snapshot:
                violations.append(f"{event_id}: replayed state differs from live state")
        return ScenarioResult(
            name=config.name,
            event_id=event_id,
            cost_cents=newsroom.ledger_total(event_id) if event_id else 0,
            n_workers=0,
            submitted_items=0,
            approved_items=0,
            report_word_count=0,
            virtual_minutes_to_report=0.0,
            invariant_violations=violations,
            log_bytes=log_bytes,
            snapshot_bytes=live_snapshot,
            commands_issued=commands,
        )

    log_path = newsroom.log_path(event_id)
    log_bytes = log_path.read_bytes()
    lines = log_bytes.decode("utf-8").splitlines()

    # replay the persisted log and compare snapshots byte for byte
    replayed = replay_lines(lines)
    live_snapshot = newsroom._states[event_id].snapshot_bytes()
    if replayed is None or replayed.snapshot_bytes() != live_snapshot:
        violations.append(f"{event_id}: replayed state differs from live state")

    recount = recount_log(lines)
    try:
        stats = newsroom.report_stats(event_id)
    except NewsroomError as exc:
        violations.append(f"{event_id}: no final report ({exc.message})")
        stats = {
            "cost_cents": recount["cost"],
            "n_workers": 0,
            "report_word_count": 0,
            "submitted_items": recount["submitted"],
        }
    else:
        if stats["submitted_items"] != recount["submitted"]:
            violations.append(
                f"{event_id}: stats submitted_items {stats['submitted_items']} "
                f"!= log recount {recount['submitted']}"
            )
        if stats["cost_cents"] != recount["cost"]:
            violations.append(
                f"{event_id}: stats cost {stats['cost_cents']} != log recount {recount['cost']}"
            )

    minutes = 0.0
    if recount["finalized_at"] and run.finalized_at:
        from .model import wire_to_ts

        end = wire_to_ts(run.event["end_time"])
        minutes = (wire_to_ts(recount["finalized_at"]) - end).total_seconds() / 60.0

    return ScenarioResult(
        name=config.name,
        event_id=event_id,
        cost_cents=stats["cost_cents"],
        n_workers=stats["n_workers"],
        submitted_items=stats["submitted_items"],
        approved_items=recount["approved"],
        report_word_count=stats["report_word_count"],
        virtual_minutes_to_report=minutes,
        invariant_violations=violations,
        log_bytes=log_bytes,
        snapshot_bytes=live_snapshot,
        commands_issued=commands,
    )


TABLE1_SCENARIOS = (
    "festival",
    "art_show",
    "public_talk",
    "town_hall_1",
    "town_hall_2",
    "hackathon",
)


class SuiteFailure(Exception):
    def __init__(self, row: str, problems: list[str]):
        super().__init__(f"scenario {row!r} failed: " + "; ".join(problems))
        self.row = row
        self.problems = problems


def run_table1_suite(
    scenario_dir: str | Path, *, transport: str = "http"
) -> list[ScenarioResult]:
    """Run the six shipped scenarios and hold them to their expected structure."""
    scenario_dir = Path(scenario_dir)
    results = []
    for name in TABLE1_SCENARIOS:
        path = scenario_dir / f"{name}.json"
        if not path.exists():
            raise SuiteFailure(name, [f"missing scenario file {path}"])
        config = ScenarioConfig.from_file(path)
        result = run_scenario(config, transport=transport)
        problems = list(result.invariant_violations)
        expected = config.expected or {}
        if "n_workers" in expected and result.n_workers != expected["n_workers"]:
            problems.append(
                f"n_workers {result.n_workers} != expected {expected['n_workers']}"
            )
        if (
            "submitted_items" in expected
            and result.submitted_items != expected["submitted_items"]
        ):
            problems.append(
                f"submitted_items {result.submitted_items} != expected "
                f"{expected['submitted_items']}"
            )
        if result.virtual_minutes_to_report > 60:
            problems.append(
                f"report took {result.virtual_minutes_to_report} virtual minutes"
            )
        if result.cost_cents > 15_000:
            problems.append(f"cost {result.cost_cents} cents breaks the cap")
        if problems:
            raise SuiteFailure(name, problems)
        results.append(result)
    return results
