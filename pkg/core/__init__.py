"""
Calendar data model shared by every other package.

The engine lives in core.execution_engine and is imported from there directly.
"""
from .calendar_types import (
    FREE, Free, Errand, ScheduledMeeting, SlotState, Calendar, MeetingSpec,
    Schedule, Reschedule, Action, ActionBatch, EMPTY_BATCH, display_cost,
)
from .batch_validation import ValidationResult, render_calendar, validate_batch, apply_batch, plan_insertion
from .errors import ArenaError

__all__ = [
    "FREE", "Free", "Errand", "ScheduledMeeting", "SlotState", "Calendar", "MeetingSpec",
    "Schedule", "Reschedule", "Action", "ActionBatch", "EMPTY_BATCH", "display_cost",
    "ValidationResult", "render_calendar", "validate_batch", "apply_batch", "plan_insertion",
    "ArenaError",
]
