"""Curation feed: sectioned snapshots and ordered, gap-free live streams."""

from __future__ import annotations

import threading
from collections import deque
from typing import TYPE_CHECKING, Iterator

from .model import FeedEvent, SubmissionState

if TYPE_CHECKING:
    from .engine import EventState

MAX_SUBSCRIBER_BUFFER = 10_000


class Subscription:
    """One subscriber's view of an event log from a chosen position.

    Events are buffered post-commit in total order.  A subscriber that falls
    more than ``MAX_SUBSCRIBER_BUFFER`` events behind is disconnected;
    ``resume_from`` then names the seq to resubscribe from, so the no-gap
    contract survives the disconnect.
    """

    def __init__(self, event_id: str, from_seq: int, max_buffer: int = MAX_SUBSCRIBER_BUFFER):
        self.event_id = event_id
        self.resume_from = from_seq
        self._buffer: deque[FeedEvent] = deque()
        self._max_buffer = max_buffer
        self._cond = threading.Condition()
        self._complete = False
        self._overflowed = False

    # -- producer side (called by the engine, post-commit) --

    def push(self, events: list[FeedEvent], complete: bool = False) -> None:
        with self._cond:
            if self._overflowed:
                return
            for event in events:
                if len(self._buffer) >= self._max_buffer:
                    self._overflowed = True
                    break
                self._buffer.append(event)
            if complete:
                self._complete = True
            self._cond.notify_all()

    # -- consumer side --

    @property
    def overflowed(self) -> bool:
        with self._cond:
            return self._overflowed

    @property
    def finished(self) -> bool:
        """True when no further events will ever be delivered."""
        with self._cond:
            return not self._buffer and (self._complete or self._overflowed)

    def next(self, timeout: float | None = None) -> FeedEvent | None:
        """Next event in order; None on timeout or once the stream is done."""
        with self._cond:
            if not self._buffer and not (self._complete or self._overflowed):
                self._cond.wait(timeout)
            if self._buffer:
                event = self._buffer.popleft()
                self.resume_from = event.seq
                return event
            return None

    def drain(self) -> list[FeedEvent]:
        """All currently buffered events, without blocking."""
        out = []
        with self._cond:
            while self._buffer:
                event = self._buffer.popleft()
                self.resume_from = event.seq
                out.append(event)
        return out

    def __iter__(self) -> Iterator[FeedEvent]:
        """Blocking iteration until the event is reported or we overflow."""
        while True:
            event = self.next(timeout=None)
            if event is not None:
                yield event
            elif self.finished:
                return


def _submission_view(state: "EventState", submission_id: str) -> dict:
    submission = state.submissions[submission_id]
    task = state.tasks[submission.task_id]
    worker = state.workers.get(submission.worker_id)
    return {
        "id": submission.id,
        "seq": submission.seq,
        "task_id": submission.task_id,
        "task_instructions": task.spec.instructions,
        "section": task.spec.target_section,
        "worker_id": submission.worker_id,
        "worker_name": worker.display_name if worker else submission.worker_id,
        "state": submission.state.value,
        "content": submission.content.to_wire(),
        "submitted_at": submission.to_wire()["submitted_at"],
        "curator_feedback": submission.curator_feedback,
    }


def build_snapshot(state: "EventState") -> dict:
    """Sectioned view of all submissions, consistent with a log prefix.

    Pending and approved submissions land in their task's target section in
    seq order; rejected ones are kept out of the article structure but stay
    visible in a separate drawer.
    """
    views = [_submission_view(state, sid) for sid in state.submission_order]
    counts = {s.value: 0 for s in SubmissionState}
    for view in views:
        counts[view["state"]] += 1

    sections = []
    for section in state.sections:
        items = [
            v for v in views
            if v["section"] == section.id and v["state"] != SubmissionState.REJECTED.value
        ]
        sections.append({"id": section.id, "title": section.title, "items": items})

    return {
        "event_id": state.event.id,
        "as_of_seq": state.log[-1].seq if state.log else 0,
        "event_status": state.event.status.value,
        "sections": sections,
        "pending_count": counts["pending"],
        "approved_count": counts["approved"],
        "rejected_count": counts["rejected"],
        "rejected": [v for v in views if v["state"] == SubmissionState.REJECTED.value],
    }
