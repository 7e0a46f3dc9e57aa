"""Crowd-powered local event coverage.

Orchestrates coverage of a local event end to end: the requester registers
the event, field reporters work template-driven missions on site, remote
curators approve or reject submissions in real time, and a writer assembles
the approved content into a sectioned report, all on an auditable
event-sourced log.
"""

__version__ = "0.1.0"

from .engine import Newsroom, VirtualClock, WallClock, replay_events, replay_lines
from .model import count_words, validate_transition
from .templates import MissionTemplate, TemplateRegistry, instantiate_missions

__all__ = [
    "MissionTemplate",
    "Newsroom",
    "TemplateRegistry",
    "VirtualClock",
    "WallClock",
    "count_words",
    "instantiate_missions",
    "replay_events",
    "replay_lines",
    "validate_transition",
    "__version__",
]
