"""
Incremental MAP (IMAP) reference agent.

The initiator asks every responder for its full per-slot insertion cost
vector, sums the vectors with its own and picks the cheapest slot that is
feasible for everyone. Prior multi-agent meetings are hard commitments:
IMAP never bumps them.
"""

from typing import Dict, Mapping, Optional, Sequence, Tuple

from loguru import logger
from pydantic import BaseModel

from agents.agentic_base import AgentRole, ProtocolAgent
from agents.typed_messages import CostEntry, CostRequest, Costs, ImapDecision, ProtocolTag
from core.calendar_types import ActionBatch

CostVector = Mapping[int, Optional[int]]


def choose_slot(vectors: Sequence[CostVector], num_slots: int) -> Optional[Tuple[int, int]]:
    """(slot, total cost) of the cheapest slot feasible in every vector; ties go to the lower slot."""
    best: Optional[Tuple[int, int]] = None
    for slot in range(num_slots):
        costs = [vector.get(slot) for vector in vectors]
        if any(c is None for c in costs):
            continue
        total = sum(costs)
        if best is None or total < best[1]:
            best = (slot, total)
    return best


class ImapAgent(ProtocolAgent):
    protocol = "imap"
    tag = ProtocolTag.IMAP

    def reset_round(self):
        self.requested = False
        self.decided = False
        self.vectors: Dict[int, Dict[int, Optional[int]]] = {}
        self.agreed_slot: Optional[int] = None

    @property
    def responders(self):
        return [a for a in self.meeting.sorted_participants if a != self.agent_id]

    def on_turn(self, turn_index: int):
        if self.view.role != AgentRole.INITIATOR or self.requested:
            return
        self.requested = True
        slots = list(range(self.view.num_slots))
        for responder in self.responders:
            self.send(responder, CostRequest(slots=slots))
        self.note(f"Requested cost vectors for M{self.meeting.meeting_id} from agents {self.responders}")

    def handle(self, sender: int, kind: str, body: BaseModel):
        role = self.view.role
        if kind == "cost_request" and role == AgentRole.RESPONDER:
            slots = [k for k in body.slots if 0 <= k < self.view.num_slots]
            entries = [CostEntry(slot=k, cost=self.calendar.insertion_cost(k)) for k in slots]
            self.send(sender, Costs(entries=entries))
            self.note(f"Sent costs for {len(entries)} slot(s) to Agent {sender}")
        elif kind == "costs" and role == AgentRole.INITIATOR and not self.decided:
            if sender not in self.responders:
                return
            self.vectors[sender] = {e.slot: e.cost for e in body.entries}
            if set(self.vectors) == set(self.responders):
                self._announce()
        elif kind == "decision" and sender == self.meeting.initiator:
            self.agreed_slot = body.slot
            self.note(f"Initiator chose slot {body.slot}")

    def _announce(self):
        self.decided = True
        own = {k: self.calendar.insertion_cost(k) for k in range(self.view.num_slots)}
        vectors = [own] + [self.vectors[r] for r in self.responders]
        best = choose_slot(vectors, self.view.num_slots)
        self.agreed_slot = best[0] if best else None
        for responder in self.responders:
            self.send(responder, ImapDecision(slot=self.agreed_slot))
        if best is None:
            logger.info(f"[{self.name}] No slot feasible for every participant of M{self.meeting.meeting_id}")
            self.note("No jointly feasible slot")
        else:
            self.note(f"Chose slot {best[0]} with total cost {best[1]}")

    def decide(self, prompt: str) -> ActionBatch:
        return self.insertion_batch(self.agreed_slot)
