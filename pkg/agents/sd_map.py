"""
Scheduling-Difficulty MAP (SD-MAP) reference agent.

Feasibility is binary. The initiator walks its own usable slots in calendar
order and proposes each one to every responder; a slot is agreed once all
replies are PENDING. A responder may accept a slot held by a prior meeting
when that meeting is strictly easier to reschedule than the new one, which
records a tentative bump. After confirmation every bump is repaired in the
same cheap-talk phase: the bumped meeting's initiator looks for a new slot
for it with its other participants.

The repair could instead wait for the cheap talk of the next round. Running
it in the current round lets the new meeting and the moves it depends on
commit together. When no slot is free for every affected participant the
initiator sends fail_reschedule, the bumped meeting keeps its slot, and the
new meeting fails because the confirmed slot is still occupied.
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from loguru import logger
from pydantic import BaseModel

from agents.agentic_base import AgentRole, ProtocolAgent
from agents.typed_messages import (
    Confirm,
    ConfirmReschedule,
    Fail,
    FailReschedule,
    Propose,
    ProposeReschedule,
    ProtocolTag,
    Reply,
    RescheduleReply,
    RescheduleRequest,
    SdStatus,
)
from config import SdModel
from core.calendar_types import ActionBatch, Calendar, EMPTY_BATCH, Errand, Free, Reschedule, ScheduledMeeting


def scheduling_difficulty(participants: Iterable[int], self_id: int, sd_model: SdModel) -> float:
    """Sum of sigma over a meeting's participants other than `self_id`."""
    return sum(sd_model.weight(a) for a in participants if a != self_id)


def slot_status(
    calendar: Calendar,
    slot: int,
    new_participants: FrozenSet[int],
    sd_model: SdModel,
) -> Tuple[SdStatus, Optional[int]]:
    """
    Binary feasibility of hosting the new meeting at `slot`.

    Returns (status, bumped meeting id). A prior meeting is bumpable only
    when its difficulty is strictly lower than the new meeting's.
    """
    state = calendar[slot]
    if isinstance(state, Free):
        return SdStatus.PENDING, None
    if isinstance(state, Errand):
        if not state.blocked and calendar.landing_pad(exclude=[slot]) is not None:
            return SdStatus.PENDING, None
        return SdStatus.IMPOSSIBLE, None
    if isinstance(state, ScheduledMeeting):
        me = calendar.agent_id
        if scheduling_difficulty(state.participants, me, sd_model) < scheduling_difficulty(
            new_participants, me, sd_model
        ):
            return SdStatus.PENDING, state.meeting_id
    return SdStatus.IMPOSSIBLE, None


@dataclass
class Repair:
    """A bump repair run by the bumped meeting's initiator."""
    meeting_id: int
    from_slot: int
    affected: List[int]
    candidates: List[int]
    cursor: int = 0
    slot: Optional[int] = None
    replies: Dict[int, SdStatus] = field(default_factory=dict)
    agreed: Optional[int] = None
    failed: bool = False


class SdMapAgent(ProtocolAgent):
    protocol = "sd_map"
    tag = ProtocolTag.SD

    def __init__(self, agent_id: int, sd_model: Optional[SdModel] = None, name: Optional[str] = None):
        super().__init__(agent_id, name)
        self.sd_model = sd_model or SdModel()

    def reset_round(self):
        self.started = False
        self.candidates: List[int] = []
        self.cursor = 0
        self.current: Optional[int] = None
        self.replies: Dict[int, SdStatus] = {}
        self.confirmed_slot: Optional[int] = None
        self.tentative: Dict[int, int] = {}
        self.repairs: Dict[int, Repair] = {}
        self.agreed_moves: Dict[int, Reschedule] = {}
        self.failed_repairs: Set[int] = set()

    @property
    def responders(self) -> List[int]:
        return [a for a in self.meeting.sorted_participants if a != self.agent_id]

    def _status(self, slot: int) -> Tuple[SdStatus, Optional[int]]:
        return slot_status(self.calendar, slot, self.meeting.participants, self.sd_model)

    # ------------------------------------------------------------------
    # new meeting
    # ------------------------------------------------------------------

    def on_turn(self, turn_index: int):
        if self.view.role != AgentRole.INITIATOR or self.started:
            return
        self.started = True
        for slot in range(self.view.num_slots):
            status, bumped = self._status(slot)
            if status == SdStatus.PENDING:
                self.candidates.append(slot)
                if bumped is not None:
                    self.tentative[slot] = bumped
        self.note(f"{len(self.candidates)} candidate slot(s) for M{self.meeting.meeting_id}")
        self._propose_next()

    def _propose_next(self):
        if self.cursor >= len(self.candidates):
            self.current = None
            for responder in self.responders:
                self.send(responder, Fail())
            logger.info(f"[{self.name}] No slot accepted by every responder for M{self.meeting.meeting_id}")
            self.note("Candidates exhausted, meeting fails")
            return
        self.current = self.candidates[self.cursor]
        self.cursor += 1
        self.replies = {}
        for responder in self.responders:
            self.send(responder, Propose(slot=self.current))
        self.note(f"Proposed slot {self.current}")

    def _on_reply(self, sender: int, body: Reply):
        if body.slot != self.current or sender not in self.responders:
            return
        self.replies[sender] = body.status
        if len(self.replies) < len(self.responders):
            return
        if all(status == SdStatus.PENDING for status in self.replies.values()):
            slot, self.current = self.current, None
            self.confirmed_slot = slot
            for responder in self.responders:
                self.send(responder, Confirm(slot=slot))
            self.note(f"Slot {slot} confirmed")
            self._after_confirm(slot)
        else:
            self._propose_next()

    def _after_confirm(self, slot: int):
        bumped = self.tentative.get(slot)
        if bumped is None:
            return
        state = self.calendar[slot]
        owner = min(state.participants)
        self.note(f"Slot {slot} bumps M{bumped}")
        if owner == self.agent_id:
            self._start_repair(bumped)
        else:
            self.send(owner, RescheduleRequest(bumped_meeting=bumped))

    # ------------------------------------------------------------------
    # bump repair
    # ------------------------------------------------------------------

    def _start_repair(self, meeting_id: int):
        if meeting_id in self.repairs:
            return
        from_slot = self.calendar.find_meeting(meeting_id)
        if from_slot is None:
            return
        state = self.calendar[from_slot]
        repair = Repair(
            meeting_id=meeting_id,
            from_slot=from_slot,
            affected=sorted(a for a in state.participants if a != self.agent_id),
            candidates=[k for k in self.calendar.free_slots() if k != from_slot],
        )
        self.repairs[meeting_id] = repair
        self._propose_repair(repair)

    def _propose_repair(self, repair: Repair):
        if repair.cursor >= len(repair.candidates):
            repair.slot, repair.failed = None, True
            for agent in repair.affected:
                self.send(agent, FailReschedule(bumped_meeting=repair.meeting_id))
            logger.info(f"[{self.name}] No repair slot for M{repair.meeting_id}; it keeps slot {repair.from_slot}")
            self.failed_repairs.add(repair.meeting_id)
            self.note(f"Repair of M{repair.meeting_id} failed")
            return
        repair.slot = repair.candidates[repair.cursor]
        repair.cursor += 1
        repair.replies = {}
        for agent in repair.affected:
            self.send(agent, ProposeReschedule(bumped_meeting=repair.meeting_id, slot=repair.slot))
        self.note(f"Proposed repair slot {repair.slot} for M{repair.meeting_id}")

    def _on_reschedule_reply(self, sender: int, body: RescheduleReply):
        repair = self.repairs.get(body.bumped_meeting)
        if repair is None or repair.slot != body.slot or sender not in repair.affected:
            return
        repair.replies[sender] = body.status
        if len(repair.replies) < len(repair.affected):
            return
        if all(status == SdStatus.PENDING for status in repair.replies.values()):
            repair.agreed = repair.slot
            for agent in repair.affected:
                self.send(agent, ConfirmReschedule(bumped_meeting=repair.meeting_id, slot=repair.agreed))
            self._agree_move(repair.meeting_id, repair.agreed)
        else:
            self._propose_repair(repair)

    def _agree_move(self, meeting_id: int, slot: int):
        from_slot = self.calendar.find_meeting(meeting_id)
        if from_slot is None:
            return
        self.agreed_moves[meeting_id] = Reschedule(
            item_id=meeting_id, from_slot=from_slot, to_slot=slot,
            justification=f"M{meeting_id} was bumped; all of its participants agreed on slot {slot}.",
        )
        self.note(f"M{meeting_id} moves from slot {from_slot} to slot {slot}")

    # ------------------------------------------------------------------
    # dispatch
    # ------------------------------------------------------------------

    def handle(self, sender: int, kind: str, body: BaseModel):
        role = self.view.role
        if kind == "propose" and role == AgentRole.RESPONDER:
            status, bumped = self._status(body.slot) if 0 <= body.slot < self.view.num_slots else (
                SdStatus.IMPOSSIBLE, None)
            if bumped is not None:
                self.tentative[body.slot] = bumped
            self.send(sender, Reply(slot=body.slot, status=status))
        elif kind == "reply" and role == AgentRole.INITIATOR:
            self._on_reply(sender, body)
        elif kind == "confirm" and sender == self.meeting.initiator:
            self.confirmed_slot = body.slot
            self._after_confirm(body.slot)
        elif kind == "fail" and sender == self.meeting.initiator:
            self.confirmed_slot = None
            self.note("Initiator reported failure")
        elif kind == "reschedule_request":
            slot = self.calendar.find_meeting(body.bumped_meeting)
            if slot is not None and min(self.calendar[slot].participants) == self.agent_id:
                self._start_repair(body.bumped_meeting)
        elif kind == "propose_reschedule":
            holds = self.calendar.find_meeting(body.bumped_meeting) is not None
            ok = holds and 0 <= body.slot < self.view.num_slots and self.calendar.is_free(body.slot)
            status = SdStatus.PENDING if ok else SdStatus.IMPOSSIBLE
            self.send(sender, RescheduleReply(bumped_meeting=body.bumped_meeting, slot=body.slot, status=status))
        elif kind == "reschedule_reply":
            self._on_reschedule_reply(sender, body)
        elif kind == "confirm_reschedule":
            self._agree_move(body.bumped_meeting, body.slot)
        elif kind == "fail_reschedule":
            self.failed_repairs.add(body.bumped_meeting)
            self.note(f"Repair of M{body.bumped_meeting} failed; it keeps its slot")

    # ------------------------------------------------------------------
    # phases
    # ------------------------------------------------------------------

    def _moves(self) -> List[Reschedule]:
        return [m for m in self.agreed_moves.values() if self.calendar.find_meeting(m.item_id) == m.from_slot]

    def voluntary_decide(self, prompt: str) -> ActionBatch:
        moves = self._moves()
        return ActionBatch(tuple(moves)) if moves else EMPTY_BATCH

    def decide(self, prompt: str) -> ActionBatch:
        return self.insertion_batch(self.confirmed_slot, moves=self._moves())
