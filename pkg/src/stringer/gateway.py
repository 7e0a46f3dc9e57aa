"""HTTP/JSON surface over the engine, consumed by the UI, bots, and ingest.

Every mutation endpoint maps 1:1 onto an engine command; nothing mutates
state by any other path.  Identity is a bearer worker-id header with the
requester as the default caller.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from datetime import datetime

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from pydantic import BaseModel, Field

from . import __version__
from .engine import Newsroom
from .model import (
    AuthorizationError,
    Media,
    NewsroomError,
    NotFoundError,
    Submission,
    TaskOrigin,
    UnroutableError,
    ValidationError,
    REQUESTER,
    wire_to_ts,
)
from .recruiting import RecruitmentRequest, Sources, recruit
from .report import render_markdown

logger = logging.getLogger(__name__)

_STATUS_BY_CODE = {
    "validation": 400,
    "authorization": 403,
    "not_found": 404,
    "conflict": 409,
    "understaffed": 409,
    "budget_exceeded": 409,
    "deadline_passed": 409,
    "partial_fill": 409,
    "unroutable": 422,
    "corrupt_log": 500,
}

_TASK_TOKEN_RE = re.compile(r"TASK-([A-Za-z0-9_-]+)")

_MEDIA_BY_EXTENSION = {
    "jpg": Media.PHOTO, "jpeg": Media.PHOTO, "png": Media.PHOTO, "gif": Media.PHOTO,
    "webp": Media.PHOTO, "heic": Media.PHOTO,
    "mp4": Media.VIDEO, "mov": Media.VIDEO, "avi": Media.VIDEO, "webm": Media.VIDEO,
    "mp3": Media.AUDIO, "wav": Media.AUDIO, "m4a": Media.AUDIO, "ogg": Media.AUDIO,
}


# ---------------------------------------------------------------------------
# Email ingest
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IngestedEmail:
    from_handle: str
    subject: str
    body: str
    attachments: tuple[tuple[str, str], ...] = ()  # (filename, payload_ref)


def _infer_content(msg: IngestedEmail) -> dict:
    if not msg.attachments:
        if not msg.body.strip():
            raise UnroutableError("email has neither attachments nor body text")
        return {"media": Media.TEXT.value, "payload_ref": msg.body.strip(), "caption": None}
    filename, payload_ref = msg.attachments[0]
    extension = filename.rsplit(".", 1)[-1].lower() if "." in filename else ""
    media = _MEDIA_BY_EXTENSION.get(extension, Media.PHOTO)
    caption = msg.body.strip() or None
    return {"media": media.value, "payload_ref": payload_ref, "caption": caption}


def route_email(newsroom: Newsroom, msg: IngestedEmail) -> Submission:
    """Translate an inbound email into a content submission.

    The subject must carry a ``TASK-<id>`` token and the sender must be the
    registered reporter owning that task's mission.
    """
    match = _TASK_TOKEN_RE.search(msg.subject)
    if not match:
        raise UnroutableError(f"no task token in subject {msg.subject!r}")
    task_id = match.group(1)
    try:
        task = newsroom.get_task(task_id)
    except NotFoundError:
        raise UnroutableError(f"task token names unknown task {task_id!r}")
    mission = newsroom.get_mission(task.mission_id)
    workers = newsroom.workers_for_event(mission.event_id)
    sender = next((w for w in workers if w.contact_handle == msg.from_handle), None)
    if sender is None:
        raise AuthorizationError(f"sender {msg.from_handle!r} is not registered on this event")
    return newsroom.submit_content(task_id, sender.id, _infer_content(msg))


# ---------------------------------------------------------------------------
# Request bodies
# ---------------------------------------------------------------------------


class CreateEventBody(BaseModel):
    name: str
    location: str
    start_time: str
    end_time: str
    event_type: str
    budget_cap_cents: int | None = None
    report_deadline: str | None = None


class RecruitBody(BaseModel):
    source: str
    role: str
    count: int
    offer_cents: int = 0
    location_hint: str = ""


class StartBody(BaseModel):
    reporter_ids: list[str]


class ContentBody(BaseModel):
    media: str
    payload_ref: str
    caption: str | None = None


class SubmitBody(BaseModel):
    content: ContentBody


class DecisionBody(BaseModel):
    decision: str
    feedback: str | None = None


class FeedbackBody(BaseModel):
    text: str


class BonusTaskBody(BaseModel):
    kind: str
    instructions: str
    target_section: str
    pay_rate_cents: int = 0


class EditBlockBody(BaseModel):
    action: str
    params: dict = Field(default_factory=dict)


class EmailBody(BaseModel):
    from_handle: str = Field(alias="from")
    subject: str
    body: str = ""
    attachments: list[dict] = Field(default_factory=list)

    model_config = {"populate_by_name": True}


# ---------------------------------------------------------------------------
# App factory
# ---------------------------------------------------------------------------


@dataclass
class DeadLetter:
    subject: str
    from_handle: str
    reason: str


def _actor(request: Request) -> str:
    auth = request.headers.get("authorization", "")
    if auth.lower().startswith("bearer "):
        return auth[7:].strip()
    return request.headers.get("x-worker-id", REQUESTER).strip() or REQUESTER


def _parse_ts(raw: str, field_name: str) -> datetime:
    try:
        return wire_to_ts(raw)
    except ValueError:
        raise ValidationError(f"{field_name} must be an ISO-8601 timestamp, got {raw!r}")


def create_app(
    newsroom: Newsroom,
    sources: Sources | None = None,
    *,
    version: str | None = None,
) -> FastAPI:
    app = FastAPI(title="stringer", version=version or __version__, docs_url=None, redoc_url=None)
    app.state.newsroom = newsroom
    app.state.sources = sources or Sources.default()
    app.state.dead_letters: list[DeadLetter] = []

    @app.exception_handler(NewsroomError)
    async def domain_error(request: Request, exc: NewsroomError):
        status = _STATUS_BY_CODE.get(exc.code, 500)
        if status >= 500:
            logger.error("internal invariant violation: %s", exc.message)
        return JSONResponse(
            status_code=status,
            content={"error": {"code": exc.code, "message": exc.message, **exc.details}},
        )

    @app.get("/api/health")
    def health():
        return {"status": "ok", "service": "stringer", "version": app.version}

    @app.get("/api/events")
    def list_events():
        return {"events": [e.to_wire() for e in newsroom.list_events()]}

    @app.post("/api/events", status_code=201)
    def create_event(body: CreateEventBody):
        event = newsroom.create_event(
            name=body.name,
            location=body.location,
            start_time=_parse_ts(body.start_time, "start_time"),
            end_time=_parse_ts(body.end_time, "end_time"),
            event_type=body.event_type,
            budget_cap_cents=body.budget_cap_cents,
            report_deadline=(
                _parse_ts(body.report_deadline, "report_deadline")
                if body.report_deadline
                else None
            ),
        )
        return event.to_wire()

    @app.get("/api/events/{event_id}")
    def get_event(event_id: str):
        return newsroom.get_event(event_id).to_wire()

    @app.post("/api/events/{event_id}/workers", status_code=201)
    def recruit_workers(event_id: str, body: RecruitBody):
        request_record = RecruitmentRequest(
            event_id=event_id,
            role=body.role,
            count=body.count,
            offer_cents=body.offer_cents,
            location_hint=body.location_hint,
        )
        workers = recruit(newsroom, app.state.sources, body.source, request_record)
        return {"workers": [w.to_wire() for w in workers]}

    @app.post("/api/events/{event_id}/start")
    def start_event(event_id: str, body: StartBody, request: Request):
        missions = newsroom.start_event(event_id, body.reporter_ids, issued_by=_actor(request))
        return {"missions": [m.to_wire() for m in missions]}

    @app.get("/api/workers/{worker_id}/mission")
    def worker_mission(worker_id: str):
        return newsroom.mission_for_worker(worker_id).to_wire()

    @app.post("/api/tasks/{task_id}/submissions", status_code=201)
    def submit(task_id: str, body: SubmitBody, request: Request):
        worker_id = _actor(request)
        if worker_id == REQUESTER:
            raise AuthorizationError("submissions need a worker identity header")
        submission = newsroom.submit_content(
            task_id, worker_id, body.content.model_dump()
        )
        return submission.to_wire()

    @app.post("/api/submissions/{submission_id}/decision")
    def decide(submission_id: str, body: DecisionBody, request: Request):
        submission = newsroom.decide_submission(
            submission_id, _actor(request), body.decision, body.feedback
        )
        return submission.to_wire()

    @app.post("/api/tasks/{task_id}/feedback")
    def feedback(task_id: str, body: FeedbackBody, request: Request):
        task = newsroom.send_feedback(task_id, _actor(request), body.text)
        return task.to_wire()

    @app.post("/api/missions/{mission_id}/bonus-tasks", status_code=201)
    def bonus_task(mission_id: str, body: BonusTaskBody, request: Request):
        spec = {
            "id": f"bonus-{mission_id}-{len(newsroom.get_mission(mission_id).tasks) + 1}",
            "kind": body.kind,
            "instructions": body.instructions,
            "target_section": body.target_section,
            "pay_rate_cents": body.pay_rate_cents,
            "origin": TaskOrigin.CURATOR_BONUS.value,
        }
        task = newsroom.create_bonus_task(mission_id, _actor(request), spec)
        return task.to_wire()

    @app.post("/api/events/{event_id}/close")
    def close_event(event_id: str, request: Request):
        event = newsroom.close_event(event_id, issued_by=_actor(request))
        return event.to_wire()

    @app.get("/api/events/{event_id}/feed")
    def feed(event_id: str):
        return newsroom.feed_snapshot(event_id)

    @app.get("/api/events/{event_id}/feed/stream")
    def feed_stream(event_id: str, from_seq: int = Query(default=0, ge=0)):
        subscription = newsroom.subscribe(event_id, from_seq)

        def lines():
            try:
                while True:
                    event = subscription.next(timeout=0.5)
                    if event is not None:
                        yield event.to_line() + "\n"
                    elif subscription.finished:
                        return
            finally:
                pass  # subscription is garbage collected with the response

        return StreamingResponse(lines(), media_type="application/x-ndjson")

    @app.post("/api/events/{event_id}/report/draft")
    def draft_report(event_id: str, request: Request):
        report = newsroom.draft_report(event_id, actor=_actor(request))
        payload = report.to_wire()
        if report.item_count == 0:
            payload["warning"] = "empty_report"
        return payload

    @app.get("/api/events/{event_id}/report")
    def get_report(event_id: str, request: Request, format: str = "json"):
        event = newsroom.get_event(event_id)
        report = newsroom.report_for_event(event_id)
        if report is None:
            # First read after close materializes the deterministic draft.
            report = newsroom.draft_report(event_id, actor=_actor(request))
        if format == "md":
            return PlainTextResponse(render_markdown(report, event.name, event.location))
        payload = report.to_wire()
        if report.item_count == 0:
            payload["warning"] = "empty_report"
        return payload

    @app.post("/api/reports/{report_id}/blocks")
    def edit_block(report_id: str, body: EditBlockBody, request: Request):
        report = newsroom.edit_report_block(
            report_id, _actor(request), body.action, body.params
        )
        return report.to_wire()

    @app.post("/api/reports/{report_id}/finalize")
    def finalize(report_id: str, request: Request):
        report = newsroom.finalize_report(report_id, _actor(request))
        return report.to_wire()

    @app.get("/api/events/{event_id}/stats")
    def stats(event_id: str):
        return newsroom.report_stats(event_id)

    @app.post("/api/ingest/email", status_code=201)
    def ingest_email(body: EmailBody):
        msg = IngestedEmail(
            from_handle=body.from_handle,
            subject=body.subject,
            body=body.body,
            attachments=tuple(
                (a.get("filename", ""), a.get("payload_ref", "")) for a in body.attachments
            ),
        )
        try:
            submission = route_email(newsroom, msg)
        except UnroutableError as exc:
            app.state.dead_letters.append(
                DeadLetter(subject=msg.subject, from_handle=msg.from_handle, reason=exc.message)
            )
            raise
        return submission.to_wire()

    @app.get("/api/ingest/dead-letters")
    def dead_letters():
        return {
            "dead_letters": [
                {"subject": d.subject, "from": d.from_handle, "reason": d.reason}
                for d in app.state.dead_letters
            ]
        }

    return app
