"""
Distributed Score-based Multi-round (DSM) reference agent.

The initiator offers batches of candidate slots, responders answer each
offer with a satisfaction level in {0..D-1}, and the initiator picks the
best fully-feasible slot or offers the next untried batch. Offer size
trades success probability against disclosure. A point ledger settles
scoring costs and selection rewards after every decision.

Two presets share this class: DSM_WELFARE (broad, exhaustive offers with
displacement plans) and DSM_PRIVATE (narrow offers, top level only).
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel

from agents.agentic_base import AgentRole, ProtocolAgent
from agents.typed_messages import DsmDecision, Plan, Proposals, ProtocolTag, Score, Scores
from config import DSM_WELFARE, DsmParams
from core.calendar_types import EMPTY_BATCH, MEETING_DISPLACEMENT_COST, ActionBatch, Calendar, Reschedule, ScheduledMeeting


# ---------------------------------------------------------------------------
# Scoring and settlement
# ---------------------------------------------------------------------------

def satisfaction_for_cost(cost: Optional[int], levels: int) -> int:
    """0 for infeasible, D-1 for free, otherwise D-1-cost clamped into [1, D-2]."""
    if cost is None:
        return 0
    if cost == 0:
        return levels - 1
    return int(min(max(levels - 1 - cost, 1), levels - 2))


def satisfaction(calendar: Calendar, slot: int, levels: int = 12) -> int:
    """Satisfaction level of hosting a new meeting at `slot` with one-hop displacement."""
    return satisfaction_for_cost(calendar.insertion_cost(slot), levels)


def success_estimate(calendar: Calendar, num_responders: int) -> float:
    """p-hat: the initiator's free fraction raised to the responder count."""
    free_fraction = len(calendar.free_slots()) / calendar.num_slots
    return free_fraction ** num_responders


def offer_utilities(local_scores: Sequence[int], params: DsmParams, p_hat: float) -> Tuple[np.ndarray, np.ndarray]:
    """(L values, U(L)) over the admissible offer sizes for candidates sorted best first."""
    hi = min(params.max_offer, len(local_scores))
    lo = min(params.min_offer, hi)
    sizes = np.arange(lo, hi + 1)
    normalized = np.asarray(local_scores, dtype=float) / (params.levels - 1)
    v_bar = np.cumsum(normalized)[sizes - 1] / sizes
    p_succ = 1.0 - (1.0 - p_hat) ** sizes
    utility = (
        p_succ * v_bar
        + params.social_weight * p_succ
        - params.privacy_weight * sizes
        - params.failure_penalty * (1.0 - p_succ)
    )
    return sizes, utility


def offer_size(local_scores: Sequence[int], params: DsmParams, p_hat: float) -> int:
    """Offer size maximizing U(L); ties go to the smaller L. 0 when there are no candidates."""
    if not local_scores:
        return 0
    sizes, utility = offer_utilities(local_scores, params, p_hat)
    # argmax returns the first maximum, i.e. the smallest L
    return int(sizes[int(np.argmax(utility))])


def scoring_cost(scores: Sequence[int], levels: int) -> int:
    return sum(levels - s - 1 for s in scores if s > 0)


def availability(scores: Sequence[int]) -> int:
    return sum(1 for s in scores if s > 0)


def flexibility(scores: Sequence[int]) -> int:
    """Base-(A+1) encoding of the positive scores: sum of s_(i) * (A+1)**i, scores sorted descending."""
    positive = sorted((s for s in scores if s > 0), reverse=True)
    base = len(positive) + 1
    return sum(s * base ** i for i, s in enumerate(positive))


def selection_reward(selected: int, scores: Sequence[int], levels: int) -> int:
    """R = (D-1-s*) + max(0, min(A, L)-1), zero when s* is 0 or D-1."""
    if selected in (0, levels - 1):
        return 0
    return (levels - 1 - selected) + max(0, min(availability(scores), len(scores)) - 1)


@dataclass
class Settlement:
    meeting_id: int
    slot: int
    initiator_delta: int
    responder_deltas: Dict[int, int]
    flexibility: Dict[int, int]
    selected: Optional[int] = None
    reward: int = 0

    def describe(self) -> str:
        parts = [f"initiator {self.initiator_delta:+d}"]
        parts += [
            f"agent {a} {d:+d} (flexibility {self.flexibility[a]})" for a, d in sorted(self.responder_deltas.items())
        ]
        if self.selected is not None:
            parts.append(f"reward {self.reward} to agent {self.selected}")
        return f"Settlement M{self.meeting_id} slot {self.slot}: " + ", ".join(parts)


def selected_responder(vectors: Dict[int, Dict[int, int]], plan_id: int) -> Optional[int]:
    """The responder whose score on the chosen plan concedes most (lowest positive level, lowest id on ties)."""
    scored = [(by_plan[plan_id], responder) for responder, by_plan in vectors.items() if by_plan.get(plan_id, 0) > 0]
    return min(scored)[1] if scored else None


def settle(meeting_id: int, slot: int, vectors: Dict[int, Dict[int, int]], plan_id: int, levels: int) -> Settlement:
    """
    Point flows for one decision.

    `vectors` maps each responder to its {plan_id: score} reply from the
    deciding sub-round. Every responder pays the scoring cost of its non-zero
    scores; only the selected responder receives the reward R, and the
    initiator collects the costs minus R.
    """
    deltas: Dict[int, int] = {}
    flex: Dict[int, int] = {}
    for responder, by_plan in vectors.items():
        scores = list(by_plan.values())
        deltas[responder] = -scoring_cost(scores, levels)
        flex[responder] = flexibility(scores)
    selected = selected_responder(vectors, plan_id)
    reward = 0
    if selected is not None:
        by_plan = vectors[selected]
        reward = selection_reward(by_plan[plan_id], list(by_plan.values()), levels)
        deltas[selected] += reward
    initiator = -sum(deltas.values())
    return Settlement(meeting_id, slot, initiator, deltas, flex, selected, reward)


# ---------------------------------------------------------------------------
# Agent
# ---------------------------------------------------------------------------

@dataclass
class Candidate:
    slot: int
    score: int
    displacement: Optional[ScheduledMeeting] = None
    displacement_slot: Optional[int] = None


@dataclass
class SubRound:
    index: int
    plans: Dict[int, Candidate]
    size: int
    expected: Set[int]
    replies: Dict[int, Dict[int, int]] = field(default_factory=dict)


class DsmAgent(ProtocolAgent):
    tag = ProtocolTag.DSM

    def __init__(self, agent_id: int, params: Optional[DsmParams] = None, name: Optional[str] = None):
        self.params = params or DSM_WELFARE
        self.protocol = self.params.name
        super().__init__(agent_id, name)
        self.ledger: Dict[int, int] = {}
        self.settlements: List[Settlement] = []

    @property
    def levels(self) -> int:
        return self.params.levels

    def reset_round(self):
        self.started = False
        self.pool: List[Candidate] = []
        self.next_plan_id = 0
        self.subround: Optional[SubRound] = None
        self.subrounds = 0
        self.plans_seen: Dict[int, Plan] = {}
        self.agreed_slot: Optional[int] = None
        self.agreed_plan: Optional[Plan] = None
        self.finished = False

    @property
    def responders(self) -> List[int]:
        return [a for a in self.meeting.sorted_participants if a != self.agent_id]

    def describe(self):
        return {**super().describe(), "params": self.params.model_dump(mode="json")}

    # ------------------------------------------------------------------
    # initiator
    # ------------------------------------------------------------------

    def _candidates(self) -> List[Candidate]:
        calendar, levels = self.calendar, self.levels
        direct = [
            Candidate(slot=k, score=satisfaction(calendar, k, levels))
            for k in range(calendar.num_slots)
        ]
        pool = [c for c in direct if c.score > 0]
        if self.params.cascade_depth >= 2:
            displaced = []
            for slot, item in calendar.meetings():
                target = calendar.landing_pad(exclude=[slot])
                if target is None:
                    continue
                cost = MEETING_DISPLACEMENT_COST * len(item.participants)
                displaced.append(Candidate(
                    slot=slot, score=satisfaction_for_cost(cost, levels), displacement=item, displacement_slot=target,
                ))
            pool += displaced[: self.params.displacement_targets]
        pool.sort(key=lambda c: (-c.score, c.slot))
        if not self.params.exhaustive and pool:
            pool = [c for c in pool if c.score == pool[0].score]
        return pool

    def on_turn(self, turn_index: int):
        if self.view.role != AgentRole.INITIATOR or self.started:
            return
        self.started = True
        self.pool = self._candidates()
        self.note(f"{len(self.pool)} candidate slot(s) for M{self.meeting.meeting_id}")
        self._offer()

    def _offer(self):
        if not self.pool:
            self._fail()
            return
        p_hat = success_estimate(self.calendar, len(self.responders))
        size = offer_size([c.score for c in self.pool], self.params, p_hat)
        batch, self.pool = self.pool[:size], self.pool[size:]
        plans: Dict[int, Candidate] = {}
        for candidate in batch:
            plans[self.next_plan_id] = candidate
            self.next_plan_id += 1
        expected = set(self.responders)
        extra: Dict[int, List[Plan]] = {}
        for plan_id, candidate in plans.items():
            if candidate.displacement is None:
                continue
            for agent in sorted(candidate.displacement.participants - self.meeting.participants):
                extra.setdefault(agent, []).append(self._plan(plan_id, candidate))
        expected |= set(extra)
        self.subround = SubRound(index=self.subrounds, plans=plans, size=size, expected=expected)
        full = [self._plan(pid, c) for pid, c in plans.items()]
        for responder in self.responders:
            self.send(responder, Proposals(subround=self.subrounds, plans=full))
        for agent, own in sorted(extra.items()):
            self.send(agent, Proposals(subround=self.subrounds, plans=own))
        self.note(
            f"Sub-round {self.subrounds}: offered {size} slot(s) {[c.slot for c in batch]} (p_hat={p_hat:.3f})"
        )
        self.subrounds += 1

    @staticmethod
    def _plan(plan_id: int, candidate: Candidate) -> Plan:
        return Plan(
            plan_id=plan_id,
            slot=candidate.slot,
            displacement=candidate.displacement.meeting_id if candidate.displacement else None,
            displacement_slot=candidate.displacement_slot,
        )

    def _on_scores(self, sender: int, body: Scores):
        current = self.subround
        if current is None or body.subround != current.index or sender not in current.expected:
            return
        current.replies[sender] = {s.plan_id: s.score for s in body.scores if s.plan_id in current.plans}
        if set(current.replies) != current.expected:
            return
        best: Optional[Tuple[Tuple[int, int], int]] = None
        for plan_id, candidate in current.plans.items():
            scorers = [r for r, by_plan in current.replies.items() if plan_id in by_plan or r in self.responders]
            reported = [current.replies[r].get(plan_id, 0) for r in scorers]
            if candidate.score <= 0 or any(s <= 0 for s in reported):
                continue
            key = (candidate.score + sum(reported), -candidate.slot)
            if best is None or key > best[0]:
                best = (key, plan_id)
        if best is None:
            self.note(f"Sub-round {current.index}: no fully feasible slot")
            self._offer()
            return
        self._decide(best[1])

    def _decide(self, plan_id: int):
        current = self.subround
        candidate = current.plans[plan_id]
        plan = self._plan(plan_id, candidate)
        self.agreed_slot, self.agreed_plan, self.finished = candidate.slot, plan, True
        recipients = set(self.responders)
        if candidate.displacement is not None:
            recipients |= candidate.displacement.participants - {self.agent_id}
        for agent in sorted(recipients):
            self.send(agent, DsmDecision(slot=candidate.slot, plan_id=plan_id))
        settlement = settle(self.meeting.meeting_id, candidate.slot, current.replies, plan_id, self.levels)
        self.settlements.append(settlement)
        self.ledger[self.agent_id] = self.ledger.get(self.agent_id, 0) + settlement.initiator_delta
        for agent, delta in settlement.responder_deltas.items():
            self.ledger[agent] = self.ledger.get(agent, 0) + delta
        self.note(f"Chose slot {candidate.slot} (plan {plan_id})")
        self.note(settlement.describe())

    def _fail(self):
        self.finished = True
        for responder in self.responders:
            self.send(responder, DsmDecision(slot=None, plan_id=None))
        logger.info(f"[{self.name}] Slot pool exhausted for M{self.meeting.meeting_id}")
        self.note("Slot pool exhausted, meeting fails")

    # ------------------------------------------------------------------
    # responders (participants and displaced-meeting participants)
    # ------------------------------------------------------------------

    def plan_score(self, plan: Plan) -> int:
        calendar, levels = self.calendar, self.levels
        if not 0 <= plan.slot < calendar.num_slots:
            return 0
        if plan.displacement is not None and calendar.find_meeting(plan.displacement) == plan.slot:
            target = plan.displacement_slot
            if target is None or not 0 <= target < calendar.num_slots or not calendar.is_free(target):
                return 0
            return satisfaction_for_cost(MEETING_DISPLACEMENT_COST, levels)
        if not self.view.is_participant:
            return 0
        return satisfaction(calendar, plan.slot, levels)

    def handle(self, sender: int, kind: str, body: BaseModel):
        if kind == "proposals" and sender == self.meeting.initiator:
            scores = []
            for plan in body.plans:
                self.plans_seen[plan.plan_id] = plan
                scores.append(Score(plan_id=plan.plan_id, score=self.plan_score(plan)))
            self.send(sender, Scores(subround=body.subround, scores=scores))
            self.note(f"Scored {len(scores)} offer(s) in sub-round {body.subround}")
        elif kind == "scores" and self.view.role == AgentRole.INITIATOR:
            self._on_scores(sender, body)
        elif kind == "decision" and sender == self.meeting.initiator:
            self.agreed_slot = body.slot
            self.agreed_plan = self.plans_seen.get(body.plan_id) if body.plan_id is not None else None
            self.note(f"Initiator chose slot {body.slot}")

    # ------------------------------------------------------------------
    # phases
    # ------------------------------------------------------------------

    def _moves(self) -> List[Reschedule]:
        plan = self.agreed_plan
        if plan is None or plan.displacement is None:
            return []
        if self.calendar.find_meeting(plan.displacement) != plan.slot:
            return []
        return [Reschedule(
            item_id=plan.displacement, from_slot=plan.slot, to_slot=plan.displacement_slot,
            justification=f"M{plan.displacement} moves to slot {plan.displacement_slot} under the agreed plan.",
        )]

    def voluntary_decide(self, prompt: str) -> ActionBatch:
        moves = self._moves()
        return ActionBatch(tuple(moves)) if moves else EMPTY_BATCH

    def decide(self, prompt: str) -> ActionBatch:
        return self.insertion_batch(self.agreed_slot, moves=self._moves())
