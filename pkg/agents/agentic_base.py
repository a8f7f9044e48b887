"""
Agent Handle Framework - Base Agent and Observation Classes

Every seat in a game is a BaseAgent. The engine drives it through a fixed
set of callbacks; all effects on the game flow through return values.
"""

from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

from loguru import logger
from pydantic import BaseModel

from agents.typed_messages import ProtocolTag, TypedMessage, encode
from core.batch_validation import plan_insertion
from core.calendar_types import EMPTY_BATCH, ActionBatch, Calendar, MeetingSpec, Reschedule
from core.channels import InboxMessage, OutboundMessage, Phase, TurnResult


class AgentRole(str, Enum):
    """Role of an agent in the current round."""
    INITIATOR = "initiator"
    RESPONDER = "responder"
    NONPARTICIPANT = "nonparticipant"


@dataclass(frozen=True)
class AgentView:
    """
    Read-only observation handed to an agent before each callback.

    Deterministic agents use this instead of parsing prompt text.
    """
    agent_id: int
    num_agents: int
    num_slots: int
    round_index: int
    phase: Phase
    calendar: Calendar
    meeting: MeetingSpec
    speaker_order: Tuple[int, ...] = ()
    turn_index: int = 0
    max_turns: Optional[int] = None

    @property
    def is_participant(self) -> bool:
        return self.agent_id in self.meeting.participants

    @property
    def role(self) -> AgentRole:
        if not self.is_participant:
            return AgentRole.NONPARTICIPANT
        if self.agent_id == self.meeting.initiator:
            return AgentRole.INITIATOR
        return AgentRole.RESPONDER


class BaseAgent(ABC):
    """
    Base class for all agent handles.

    Each agent has:
    - an integer id and a protocol tag
    - think() / act() for one cheap-talk turn
    - decide() for the DECISION batch
    """

    protocol: str = "custom"

    def __init__(self, agent_id: int, name: Optional[str] = None):
        self.agent_id = agent_id
        self.name = name or f"Agent{agent_id}"
        self.view: Optional[AgentView] = None
        self.system_prompt: str = ""

    def on_register(self, system_text: str):
        """Receive the system prompt once, before round 1."""
        self.system_prompt = system_text
        logger.debug(f"[{self.name}] Registered ({self.protocol})")

    def observe(self, view: AgentView):
        self.view = view

    @abstractmethod
    def think(self, turn_index: int, delivered_text: str, inbox: List[InboxMessage]) -> Dict[str, Any]:
        """
        Reasoning step - read the turn input and decide what to say.
        Returns a plan for act().
        """
        pass

    @abstractmethod
    def act(self, plan: Dict[str, Any]) -> TurnResult:
        """
        Action step - turn the plan into outbound messages.
        """
        pass

    def turn(self, turn_index: int, delivered_text: str, inbox: List[InboxMessage]) -> TurnResult:
        """
        One cheap-talk turn: think -> act.
        """
        for message in inbox:
            logger.debug(f"[{self.name}] Received message from Agent {message.sender}")
        plan = self.think(turn_index, delivered_text, inbox)
        result = self.act(plan)
        logger.debug(f"[{self.name}] Turn {turn_index}: {len(result.messages)} message(s)")
        return result

    def voluntary_decide(self, prompt: str) -> ActionBatch:
        """Reschedules a contacted non-participant wants to make. Default: none."""
        return EMPTY_BATCH

    @abstractmethod
    def decide(self, prompt: str) -> ActionBatch:
        """The DECISION batch: exactly one schedule plus supporting reschedules."""
        pass

    def retry_decide(self, retry_prompt: str) -> ActionBatch:
        """Called after a rejected batch; the current view holds the same snapshot."""
        if self.view is not None and self.view.phase == Phase.VOLUNTARY:
            return self.voluntary_decide(retry_prompt)
        return self.decide(retry_prompt)

    def describe(self) -> Dict[str, Any]:
        """Seat metadata recorded in agent_registered events."""
        return {"protocol": self.protocol, "name": self.name}


class ProtocolAgent(BaseAgent):
    """
    Deterministic reference agent speaking one typed protocol.

    think() decodes the inbox and dispatches each message to handle();
    anything that is not a typed message of this protocol for the current
    meeting is counted in `ignored` and dropped.
    """

    tag: ProtocolTag

    def __init__(self, agent_id: int, name: Optional[str] = None):
        super().__init__(agent_id, name or f"{self.protocol.upper()}:{agent_id}")
        self.ignored: Counter = Counter()
        self._round: Optional[int] = None
        self._outbox: List[OutboundMessage] = []
        self._notes: List[str] = []

    def observe(self, view: AgentView):
        super().observe(view)
        if view.round_index != self._round:
            self._round = view.round_index
            self.reset_round()

    def reset_round(self):
        """Clear per-meeting state. Called on the first view of a new round."""

    @property
    def meeting(self) -> MeetingSpec:
        return self.view.meeting

    @property
    def calendar(self) -> Calendar:
        return self.view.calendar

    def send(self, to: int, payload: BaseModel):
        self._outbox.append(OutboundMessage.dm(to, encode(self.tag, self.meeting.meeting_id, payload)))

    def note(self, text: str):
        self._notes.append(text)
        logger.debug(f"[{self.name}] {text}")

    def think(self, turn_index: int, delivered_text: str, inbox: List[InboxMessage]) -> Dict[str, Any]:
        self._outbox, self._notes = [], []
        for message in inbox:
            typed, status = TypedMessage.decode(message.content)
            if typed is not None and typed.protocol != self.tag:
                status = "foreign_protocol"
            elif typed is not None and typed.meeting_id != self.meeting.meeting_id:
                status = "stale_meeting"
            if status != "ok":
                self.ignored[status] += 1
                logger.debug(f"[{self.name}] Ignoring message from Agent {message.sender}: {status}")
                continue
            self.handle(message.sender, typed.kind, typed.body())
        self.on_turn(turn_index)
        return {"thinking": "; ".join(self._notes), "messages": list(self._outbox)}

    def act(self, plan: Dict[str, Any]) -> TurnResult:
        return TurnResult(thinking=plan["thinking"], messages=plan["messages"])

    @abstractmethod
    def handle(self, sender: int, kind: str, body: BaseModel):
        """React to one typed message."""

    def on_turn(self, turn_index: int):
        """Speak unprompted after the inbox is handled (initiators open here)."""

    def insertion_batch(self, slot: Optional[int], moves: Sequence[Reschedule] = ()) -> ActionBatch:
        """Decision batch for an agreed slot, or an empty batch when nothing was agreed."""
        if slot is None:
            return EMPTY_BATCH
        batch = plan_insertion(
            self.calendar, self.meeting.meeting_id, slot,
            justification=f"Making room for M{self.meeting.meeting_id} at the agreed slot.",
            moves=moves,
        )
        if batch is None:
            logger.warning(f"[{self.name}] Agreed slot {slot} is not insertable on my calendar")
            return EMPTY_BATCH
        return batch

    def describe(self) -> Dict[str, Any]:
        return {"protocol": self.protocol, "name": self.name}
