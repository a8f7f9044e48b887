"""
Core calendar types.
Defines slots, calendars, meetings and the action batches that mutate them.

All types are immutable values: every mutation returns a new Calendar.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Tuple, Union


class SlotKind(str, Enum):
    FREE = "free"
    ERRAND = "errand"
    MEETING = "meeting"


class ActionType(str, Enum):
    SCHEDULE = "schedule"
    RESCHEDULE = "reschedule"


# Prior meetings cost 1 per participant calendar on which they move.
MEETING_DISPLACEMENT_COST = 1


def display_cost(cost: int) -> int:
    """Agent-facing log scale: internal 1, 2, 3 is shown as 1, 10, 100."""
    return 10 ** (cost - 1)


@dataclass(frozen=True)
class Free:
    kind: SlotKind = field(default=SlotKind.FREE, init=False)


@dataclass(frozen=True)
class Errand:
    errand_id: int
    cost: int
    blocked: bool = False
    label: Optional[str] = None
    kind: SlotKind = field(default=SlotKind.ERRAND, init=False)

    def __post_init__(self):
        if self.cost < 1:
            raise ValueError(f"Errand #{self.errand_id} cost must be >= 1, got {self.cost}")


@dataclass(frozen=True)
class ScheduledMeeting:
    meeting_id: int
    participants: FrozenSet[int]
    cost: int = MEETING_DISPLACEMENT_COST
    label: Optional[str] = None
    kind: SlotKind = field(default=SlotKind.MEETING, init=False)

    def __post_init__(self):
        object.__setattr__(self, "participants", frozenset(self.participants))


SlotState = Union[Free, Errand, ScheduledMeeting]
FREE = Free()


def slot_to_dict(state: SlotState) -> Optional[Dict[str, Any]]:
    """Calendar JSON model: null for free, an errand or meeting object otherwise."""
    if isinstance(state, Errand):
        data: Dict[str, Any] = {"errand_id": state.errand_id, "cost": state.cost}
        if state.blocked:
            data["blocked"] = True
        if state.label is not None:
            data["label"] = state.label
        return data
    if isinstance(state, ScheduledMeeting):
        data = {
            "meeting_id": state.meeting_id,
            "cost": state.cost,
            "participants": sorted(state.participants),
        }
        if state.label is not None:
            data["label"] = state.label
        return data
    return None


def slot_from_dict(data: Optional[Dict[str, Any]]) -> SlotState:
    if data is None:
        return FREE
    if "errand_id" in data:
        return Errand(
            errand_id=int(data["errand_id"]),
            cost=int(data["cost"]),
            blocked=bool(data.get("blocked", False)),
            label=data.get("label"),
        )
    return ScheduledMeeting(
        meeting_id=int(data["meeting_id"]),
        participants=frozenset(int(a) for a in data.get("participants", [])),
        cost=int(data.get("cost", MEETING_DISPLACEMENT_COST)),
        label=data.get("label"),
    )


@dataclass(frozen=True)
class Calendar:
    """
    One agent's private schedule: exactly S slots for the whole game.
    """
    agent_id: int
    slots: Tuple[SlotState, ...]

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(self.slots))
        seen = set()
        for state in self.slots:
            if isinstance(state, ScheduledMeeting):
                if state.meeting_id in seen:
                    raise ValueError(
                        f"Meeting M{state.meeting_id} appears twice on agent {self.agent_id}'s calendar"
                    )
                seen.add(state.meeting_id)

    @classmethod
    def empty(cls, agent_id: int, num_slots: int) -> "Calendar":
        return cls(agent_id=agent_id, slots=tuple(FREE for _ in range(num_slots)))

    @property
    def num_slots(self) -> int:
        return len(self.slots)

    def __getitem__(self, slot: int) -> SlotState:
        return self.slots[slot]

    def is_free(self, slot: int) -> bool:
        return isinstance(self.slots[slot], Free)

    def free_slots(self) -> List[int]:
        return [k for k, state in enumerate(self.slots) if isinstance(state, Free)]

    def errands(self) -> List[Tuple[int, Errand]]:
        return [(k, s) for k, s in enumerate(self.slots) if isinstance(s, Errand)]

    def meetings(self) -> List[Tuple[int, ScheduledMeeting]]:
        return [(k, s) for k, s in enumerate(self.slots) if isinstance(s, ScheduledMeeting)]

    def find_meeting(self, meeting_id: int) -> Optional[int]:
        for k, state in enumerate(self.slots):
            if isinstance(state, ScheduledMeeting) and state.meeting_id == meeting_id:
                return k
        return None

    def landing_pad(self, exclude: Iterable[int] = ()) -> Optional[int]:
        """Lowest free slot outside `exclude`, used as a one-hop destination."""
        excluded = set(exclude)
        for k in self.free_slots():
            if k not in excluded:
                return k
        return None

    def insertion_cost(self, slot: int) -> Optional[int]:
        """
        One-hop insertion cost of a new meeting at `slot`.

        0 if free, the errand cost if a movable errand can be displaced to
        another free slot, None if infeasible (blocked, meeting, no pad).
        """
        state = self.slots[slot]
        if isinstance(state, Free):
            return 0
        if isinstance(state, Errand) and not state.blocked:
            if self.landing_pad(exclude=[slot]) is not None:
                return state.cost
        return None

    def with_slot(self, slot: int, state: SlotState) -> "Calendar":
        slots = list(self.slots)
        slots[slot] = state
        return replace(self, slots=tuple(slots))

    def to_dict(self) -> Dict[str, Any]:
        return {"agent_id": self.agent_id, "slots": [slot_to_dict(s) for s in self.slots]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Calendar":
        return cls(
            agent_id=int(data["agent_id"]),
            slots=tuple(slot_from_dict(s) for s in data["slots"]),
        )


@dataclass(frozen=True)
class MeetingSpec:
    """An incoming meeting: one per round, one slot long."""
    meeting_id: int
    participants: FrozenSet[int]
    round_index: int
    label: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "participants", frozenset(self.participants))
        if len(self.participants) < 2:
            raise ValueError(f"Meeting M{self.meeting_id} needs at least 2 participants")

    @property
    def initiator(self) -> int:
        """Lowest-id participant; the reference protocols let it drive the round."""
        return min(self.participants)

    @property
    def sorted_participants(self) -> List[int]:
        return sorted(self.participants)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "meeting_id": self.meeting_id,
            "participants": self.sorted_participants,
            "round_index": self.round_index,
            "duration": 1,
        }
        if self.label is not None:
            data["label"] = self.label
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MeetingSpec":
        return cls(
            meeting_id=int(data["meeting_id"]),
            participants=frozenset(int(a) for a in data["participants"]),
            round_index=int(data["round_index"]),
            label=data.get("label"),
        )


@dataclass(frozen=True)
class Schedule:
    meeting_id: int
    slot: Any
    type: ActionType = field(default=ActionType.SCHEDULE, init=False)

    def describe(self) -> str:
        return f"schedule M{self.meeting_id} at slot {self.slot}"

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.type.value, "meeting_id": self.meeting_id, "slot": self.slot}


@dataclass(frozen=True)
class Reschedule:
    item_id: int
    from_slot: Any
    to_slot: Any
    justification: str = ""
    type: ActionType = field(default=ActionType.RESCHEDULE, init=False)

    def describe(self) -> str:
        return f"reschedule item {self.item_id} from slot {self.from_slot} to slot {self.to_slot}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": self.type.value,
            "item_id": self.item_id,
            "from_slot": self.from_slot,
            "to_slot": self.to_slot,
            "justification": self.justification,
        }


Action = Union[Schedule, Reschedule]


def action_from_dict(data: Dict[str, Any]) -> Action:
    """Parse one tool call. Slot values are kept raw; validation checks their type."""
    kind = data.get("type")
    if kind == ActionType.SCHEDULE.value:
        return Schedule(meeting_id=data.get("meeting_id"), slot=data.get("slot"))
    if kind == ActionType.RESCHEDULE.value:
        return Reschedule(
            item_id=data.get("item_id"),
            from_slot=data.get("from_slot"),
            to_slot=data.get("to_slot"),
            justification=str(data.get("justification", "")),
        )
    raise ValueError(f"Unknown action type: {kind!r}")


@dataclass(frozen=True)
class ActionBatch:
    """Ordered actions validated and applied as one transaction."""
    actions: Tuple[Action, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    @property
    def schedules(self) -> List[Schedule]:
        return [a for a in self.actions if isinstance(a, Schedule)]

    @property
    def reschedules(self) -> List[Reschedule]:
        return [a for a in self.actions if isinstance(a, Reschedule)]

    def only_reschedules(self) -> "ActionBatch":
        return ActionBatch(tuple(self.reschedules))

    def to_list(self) -> List[Dict[str, Any]]:
        return [a.to_dict() for a in self.actions]

    @classmethod
    def from_list(cls, items: Iterable[Dict[str, Any]]) -> "ActionBatch":
        return cls(tuple(action_from_dict(item) for item in items))


EMPTY_BATCH = ActionBatch()
