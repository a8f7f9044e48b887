"""
Calendar rendering and transactional batch validation.

validate_batch checks the seven batch rules in order and reports the first
violation as a value; apply_batch commits a validated batch and returns the
incurred (internal, linear-scale) cost. Conflict strings are documented in
docs/templates.md and must stay bit-exact.
"""

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from loguru import logger

from core.calendar_types import (
    FREE,
    ActionBatch,
    Calendar,
    Errand,
    Free,
    MeetingSpec,
    Reschedule,
    Schedule,
    ScheduledMeeting,
    SlotState,
    display_cost,
)
from core.errors import InvalidBatchError


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    conflict: Optional[str] = None
    rule: Optional[int] = None

    @classmethod
    def success(cls) -> "ValidationResult":
        return cls(ok=True)

    @classmethod
    def failure(cls, rule: int, conflict: str) -> "ValidationResult":
        return cls(ok=False, conflict=conflict, rule=rule)


OK = ValidationResult.success()


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def render_slot(state: SlotState, include_labels: bool = False, log_scale: bool = False) -> str:
    if isinstance(state, Free):
        return "[FREE]"
    cost = display_cost(state.cost) if log_scale else state.cost
    if isinstance(state, Errand):
        prefix = "Blocked " if state.blocked else ""
        text = f"{prefix}Errand #{state.errand_id} (cost={cost})"
    else:
        participants = ", ".join(str(a) for a in sorted(state.participants))
        text = f"Meeting M{state.meeting_id} (cost={cost}) participants=[{participants}]"
    if include_labels and state.label:
        text += f' label="{state.label}"'
    return text


def render_calendar(calendar: Calendar, include_labels: bool = False, log_scale: bool = False) -> str:
    """
    One line per slot, e.g. ``Slot  1: Errand #3 (cost=2)``.

    log_scale switches costs to the agent-facing display (1, 10, 100);
    traces and tests use the internal values.
    """
    return "\n".join(
        f"Slot {k:>2}: {render_slot(state, include_labels, log_scale)}"
        for k, state in enumerate(calendar.slots)
    )


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _is_slot(value, num_slots: int) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and 0 <= value < num_slots


def _item_id(state: SlotState) -> Optional[int]:
    if isinstance(state, Errand):
        return state.errand_id
    if isinstance(state, ScheduledMeeting):
        return state.meeting_id
    return None


def _describe(index: int, action) -> str:
    return f"action {index} ({action.describe()})"


def validate_batch(
    calendar: Calendar,
    batch: ActionBatch,
    require_schedule: bool,
    expected_meeting: Optional[int] = None,
) -> ValidationResult:
    """
    Check a batch against one calendar without mutating it.

    With `expected_meeting` set, a schedule for any other meeting fails rule 6.

    Rules, in reporting order:
      1. every slot index is an integer in [0, S)
      2. each reschedule names the item actually sitting at from_slot, once
      3. blocked errands never move
      4. no two reschedules share a to_slot
      5. each to_slot is free, or freed by an earlier reschedule in the batch
      6. exactly one schedule action iff require_schedule
      7. the schedule slot is free after all reschedules
    """
    num_slots = calendar.num_slots
    actions = list(batch.actions)

    # Rule 1
    for i, action in enumerate(actions):
        slots = [action.slot] if isinstance(action, Schedule) else [action.from_slot, action.to_slot]
        for slot in slots:
            if not _is_slot(slot, num_slots):
                return ValidationResult.failure(
                    1,
                    f"Slot out of bounds: {_describe(i, action)} uses slot {slot!r}, "
                    f"valid range is [0, {num_slots})",
                )

    # Rule 2
    moved_from: Dict[int, int] = {}
    for i, action in enumerate(actions):
        if not isinstance(action, Reschedule):
            continue
        occupant = calendar[action.from_slot]
        occupant_id = _item_id(occupant)
        if occupant_id is None:
            return ValidationResult.failure(
                2, f"Item mismatch: {_describe(i, action)} but slot {action.from_slot} is free"
            )
        if occupant_id != action.item_id:
            return ValidationResult.failure(
                2,
                f"Item mismatch: {_describe(i, action)} but slot {action.from_slot} "
                f"holds item {occupant_id}",
            )
        if action.from_slot in moved_from:
            return ValidationResult.failure(
                2,
                f"Item mismatch: {_describe(i, action)} moves item {action.item_id} again "
                f"(already moved by action {moved_from[action.from_slot]})",
            )
        moved_from[action.from_slot] = i

    # Rule 3
    for i, action in enumerate(actions):
        if isinstance(action, Reschedule):
            occupant = calendar[action.from_slot]
            if isinstance(occupant, Errand) and occupant.blocked:
                return ValidationResult.failure(
                    3, f"Blocked item: {_describe(i, action)} targets blocked errand #{occupant.errand_id}"
                )

    # Rule 4
    destinations: Dict[int, int] = {}
    for i, action in enumerate(actions):
        if isinstance(action, Reschedule):
            if action.to_slot in destinations:
                return ValidationResult.failure(
                    4,
                    f"Destination conflict: {_describe(i, action)} and action "
                    f"{destinations[action.to_slot]} both move to slot {action.to_slot}",
                )
            destinations[action.to_slot] = i

    # Rule 5: simulate reschedules in batch order
    occupied = [not isinstance(state, Free) for state in calendar.slots]
    for i, action in enumerate(actions):
        if isinstance(action, Reschedule):
            if occupied[action.to_slot]:
                return ValidationResult.failure(
                    5,
                    f"Destination not free: {_describe(i, action)} moves to slot {action.to_slot}, "
                    f"which is occupied",
                )
            occupied[action.from_slot] = False
            occupied[action.to_slot] = True

    # Rule 6
    schedules = [(i, a) for i, a in enumerate(actions) if isinstance(a, Schedule)]
    if require_schedule and len(schedules) != 1:
        return ValidationResult.failure(6, f"Expected exactly 1 schedule action, got {len(schedules)}")
    if not require_schedule and schedules:
        return ValidationResult.failure(6, f"Expected no schedule action, got {len(schedules)}")
    if expected_meeting is not None:
        for i, action in schedules:
            if action.meeting_id != expected_meeting:
                return ValidationResult.failure(
                    6, f"Wrong meeting: {_describe(i, action)} but this round schedules M{expected_meeting}"
                )

    # Rule 7
    for i, action in schedules:
        # Re-scheduling a meeting already on the calendar is not idempotent.
        existing = calendar.find_meeting(action.meeting_id)
        if existing is not None:
            return ValidationResult.failure(
                7,
                f"Schedule slot not free: {_describe(i, action)} but meeting "
                f"M{action.meeting_id} is already on the calendar at slot {existing}",
            )
        if occupied[action.slot]:
            return ValidationResult.failure(
                7,
                f"Schedule slot not free: {_describe(i, action)} but slot {action.slot} "
                f"is occupied after reschedules",
            )

    return OK


def apply_batch(
    calendar: Calendar,
    batch: ActionBatch,
    meetings: Optional[Mapping[int, MeetingSpec]] = None,
) -> Tuple[Calendar, int]:
    """
    Apply a batch that validated against `calendar`.

    Errand moves cost the errand's cost, prior-meeting moves cost 1.
    `meetings` supplies participants and labels for scheduled meetings.
    """
    if not batch.actions:
        return calendar, 0
    result = validate_batch(calendar, batch, require_schedule=bool(batch.schedules))
    if not result.ok:
        raise InvalidBatchError(f"apply_batch called on invalid batch: {result.conflict}")

    slots: List[SlotState] = list(calendar.slots)
    moving = [(action, slots[action.from_slot]) for action in batch.reschedules]
    cost = 0
    for action, _ in moving:
        slots[action.from_slot] = FREE
    for action, item in moving:
        slots[action.to_slot] = item
        cost += item.cost
    for action in batch.schedules:
        spec = (meetings or {}).get(action.meeting_id)
        slots[action.slot] = ScheduledMeeting(
            meeting_id=action.meeting_id,
            participants=spec.participants if spec else frozenset({calendar.agent_id}),
            label=spec.label if spec else None,
        )
    logger.debug(f"[Calendar] agent {calendar.agent_id}: applied {len(batch)} action(s), cost {cost}")
    return Calendar(agent_id=calendar.agent_id, slots=tuple(slots)), cost


def plan_insertion(
    calendar: Calendar,
    meeting_id: int,
    slot: int,
    justification: str = "Clearing the slot for the agreed meeting.",
    moves: Sequence[Reschedule] = (),
) -> Optional[ActionBatch]:
    """
    Cheapest one-hop batch that places `meeting_id` at `slot`, or None.

    `moves` are agreed prior-meeting reschedules that go first; a movable
    errand at `slot` is then pushed to the lowest slot still free.
    """
    moves = tuple(moves)
    freed = {m.from_slot for m in moves}
    taken = {m.to_slot for m in moves}
    state = calendar[slot]
    if isinstance(state, Free) or slot in freed:
        if slot in taken:
            return None
        return ActionBatch(moves + (Schedule(meeting_id=meeting_id, slot=slot),))
    if isinstance(state, Errand) and not state.blocked:
        pad = calendar.landing_pad(exclude=[slot, *taken])
        if pad is None:
            return None
        return ActionBatch(moves + (
            Reschedule(item_id=state.errand_id, from_slot=slot, to_slot=pad, justification=justification),
            Schedule(meeting_id=meeting_id, slot=slot),
        ))
    return None
