"""Mission templates: per-event-type task packages and mission instantiation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

from .model import (
    GENERIC_EVENT_TYPE,
    ConflictError,
    Event,
    NotFoundError,
    Role,
    Task,
    TaskSpec,
    TaskState,
    UnderstaffedError,
    ValidationError,
    Worker,
    validate_event_type,
)


@dataclass(frozen=True)
class Section:
    id: str
    title: str

    def to_wire(self) -> dict:
        return {"id": self.id, "title": self.title}

    @classmethod
    def from_wire(cls, raw: dict) -> "Section":
        return cls(id=raw["id"], title=raw["title"])


@dataclass(frozen=True)
class MissionTemplate:
    id: str
    event_type: str
    sections: tuple[Section, ...]
    task_specs: tuple[TaskSpec, ...]
    min_reporters: int = 1
    default_pay_rate_cents: int = 0

    def __post_init__(self):
        validate_event_type(self.event_type)
        if not self.sections:
            raise ValidationError(f"template {self.id}: sections must be non-empty")
        if not self.task_specs:
            raise ValidationError(f"template {self.id}: task_specs must be non-empty")
        if self.min_reporters < 1:
            raise ValidationError(f"template {self.id}: min_reporters must be >= 1")
        declared = {s.id for s in self.sections}
        for spec in self.task_specs:
            if spec.target_section not in declared:
                raise ValidationError(
                    f"template {self.id}: task {spec.id} targets undeclared "
                    f"section {spec.target_section!r}"
                )

    def to_wire(self) -> dict:
        return {
            "id": self.id,
            "event_type": self.event_type,
            "min_reporters": self.min_reporters,
            "default_pay_rate_cents": self.default_pay_rate_cents,
            "sections": [s.to_wire() for s in self.sections],
            "tasks": [
                {
                    "id": s.id,
                    "kind": s.kind.value,
                    "instructions": s.instructions,
                    "target_section": s.target_section,
                    "pay_rate_cents": s.pay_rate_cents,
                }
                for s in self.task_specs
            ],
        }


@dataclass(frozen=True)
class Mission:
    """One reporter's ordered task list for one event."""

    id: str
    event_id: str
    worker_id: str
    tasks: tuple[Task, ...]

    def __post_init__(self):
        if not self.tasks:
            raise ValidationError(f"mission {self.id}: tasks must be non-empty")
        for task in self.tasks:
            if task.mission_id != self.id:
                raise ValidationError(
                    f"mission {self.id}: task {task.id} references mission {task.mission_id}"
                )

    def to_wire(self) -> dict:
        return {
            "id": self.id,
            "event_id": self.event_id,
            "worker_id": self.worker_id,
            "tasks": [t.to_wire() for t in self.tasks],
        }


def parse_template(raw: dict) -> MissionTemplate:
    """Build a template from its JSON document shape."""
    try:
        default_rate = raw.get("default_pay_rate_cents", 0)
        specs = tuple(
            TaskSpec(
                id=t["id"],
                kind=t["kind"],
                instructions=t["instructions"],
                target_section=t["target_section"],
                pay_rate_cents=t.get("pay_rate_cents", default_rate),
            )
            for t in raw["tasks"]
        )
        return MissionTemplate(
            id=raw["id"],
            event_type=raw["event_type"],
            sections=tuple(Section.from_wire(s) for s in raw["sections"]),
            task_specs=specs,
            min_reporters=raw.get("min_reporters", 1),
            default_pay_rate_cents=default_rate,
        )
    except KeyError as exc:
        raise ValidationError(f"template document missing field {exc.args[0]!r}")


def load_template_file(path: Path) -> MissionTemplate:
    with open(path, encoding="utf-8") as fh:
        return parse_template(json.load(fh))


def _default_templates() -> list[MissionTemplate]:
    out = []
    root = resources.files("stringer").joinpath("data/templates")
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            out.append(parse_template(json.loads(entry.read_text(encoding="utf-8"))))
    return out


class TemplateRegistry:
    """Write-at-startup, read-many store of mission templates.

    Ships defaults for the six stock event types plus a generic fallback;
    later registrations for the same event type win, so an operator's
    template directory overrides the stock set.
    """

    def __init__(self, include_defaults: bool = True):
        self._by_id: dict[str, MissionTemplate] = {}
        self._by_type: dict[str, MissionTemplate] = {}
        if include_defaults:
            for template in _default_templates():
                self.register_template(template)

    def register_template(self, template: MissionTemplate) -> str:
        if template.id in self._by_id:
            raise ConflictError(f"template {template.id} already registered")
        self._by_id[template.id] = template
        self._by_type[template.event_type] = template
        return template.id

    def get(self, template_id: str) -> MissionTemplate:
        try:
            return self._by_id[template_id]
        except KeyError:
            raise NotFoundError(f"no template {template_id}")

    def list(self) -> list[MissionTemplate]:
        return list(self._by_id.values())

    def select_template(self, event_type: str) -> MissionTemplate:
        if not self._by_id:
            raise NotFoundError("template registry is empty")
        validate_event_type(event_type)
        found = self._by_type.get(event_type)
        if found is not None:
            return found
        fallback = self._by_type.get(GENERIC_EVENT_TYPE)
        if fallback is None:
            raise NotFoundError(
                f"no template for event type {event_type!r} and no generic fallback"
            )
        return fallback

    def load_directory(self, path: str | Path) -> int:
        """Register every ``*.json`` template under ``path``; returns count."""
        directory = Path(path)
        if not directory.is_dir():
            raise ValidationError(f"template directory {directory} does not exist")
        count = 0
        for file in sorted(directory.glob("*.json")):
            self.register_template(load_template_file(file))
            count += 1
        return count


def instantiate_missions(
    template: MissionTemplate,
    event: Event,
    reporters: Sequence[Worker],
    *,
    next_mission_id: Callable[[], str],
    next_task_id: Callable[[], str],
) -> list[Mission]:
    """Deal the template's tasks round-robin to reporters in list order.

    Spec k (0-based) goes to reporter k mod n, so every spec lands in exactly
    one mission and sizes differ by at most one.  With more reporters than
    specs, the surplus reporters receive no mission (missions are never
    empty).  Pure given the id factories.
    """
    if not reporters:
        raise ValidationError("reporter list must be non-empty")
    for worker in reporters:
        if worker.role != Role.FIELD_REPORTER:
            raise ValidationError(f"worker {worker.id} has role {worker.role.value}, "
                                  "missions go to field reporters")
    if len(reporters) < template.min_reporters:
        raise UnderstaffedError(needed=template.min_reporters, available=len(reporters))

    staffed = reporters[: len(template.task_specs)]
    mission_ids = [next_mission_id() for _ in staffed]
    dealt: list[list[Task]] = [[] for _ in staffed]
    for index, spec in enumerate(template.task_specs):
        slot = index % len(staffed)
        dealt[slot].append(
            Task(
                id=next_task_id(),
                spec=spec,
                mission_id=mission_ids[slot],
                state=TaskState.TO_DO,
            )
        )
    return [
        Mission(id=mission_ids[i], event_id=event.id, worker_id=staffed[i].id,
                tasks=tuple(dealt[i]))
        for i in range(len(staffed))
    ]
