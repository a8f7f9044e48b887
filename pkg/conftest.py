import sys
from fractions import Fraction
from pathlib import Path
from types import SimpleNamespace
from typing import Dict, List, Optional, Sequence

import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from agents.agentic_base import BaseAgent
from core.calendar_types import FREE, ActionBatch, Calendar, Errand, MeetingSpec, Schedule, ScheduledMeeting
from core.channels import OutboundMessage, TurnResult
from oracle.solver import compute_oracle_stats
from scenario.generator import CostMode, Scenario, ScenarioParams, compute_difficulty


class ScriptedAgent(BaseAgent):
    """
    Agent handle driven by fixed scripts.

    `says[(round, turn)]` lists outbound messages; `decisions[round]` is the
    DECISION batch (or an exception to raise); `voluntary[round]` the
    VOLUNTARY batch.
    """

    protocol = "scripted"

    def __init__(self, agent_id: int, says=None, decisions=None, voluntary=None, retries=None):
        super().__init__(agent_id)
        self.says: Dict = says or {}
        self.decisions: Dict = decisions or {}
        self.voluntary: Dict = voluntary or {}
        self.retries: Dict = retries or {}
        self.prompts: List[str] = []
        self.inboxes: List = []

    def think(self, turn_index, delivered_text, inbox):
        self.prompts.append(delivered_text)
        self.inboxes.append(list(inbox))
        return {"messages": list(self.says.get((self.view.round_index, turn_index), []))}

    def act(self, plan):
        return TurnResult(thinking="scripted", messages=plan["messages"])

    def voluntary_decide(self, prompt):
        return self.voluntary.get(self.view.round_index, ActionBatch())

    def decide(self, prompt):
        self.prompts.append(prompt)
        batch = self.decisions.get(self.view.round_index, ActionBatch())
        if isinstance(batch, Exception):
            raise batch
        return batch

    def retry_decide(self, retry_prompt):
        if self.view.round_index in self.retries:
            self.prompts.append(retry_prompt)
            return self.retries[self.view.round_index]
        return super().retry_decide(retry_prompt)


def make_calendar(agent_id: int, layout: Sequence[Optional[object]]) -> Calendar:
    """
    Layout entries: None free, int errand cost, ("b", cost) blocked errand,
    ("m", meeting_id, participants) prior meeting. Errand ids are agent*100 + slot.
    """
    slots = []
    for k, entry in enumerate(layout):
        if entry is None:
            slots.append(FREE)
        elif isinstance(entry, int):
            slots.append(Errand(errand_id=agent_id * 100 + k, cost=entry))
        elif entry[0] == "b":
            slots.append(Errand(errand_id=agent_id * 100 + k, cost=entry[1], blocked=True))
        else:
            slots.append(ScheduledMeeting(meeting_id=entry[1], participants=frozenset(entry[2])))
    return Calendar(agent_id=agent_id, slots=tuple(slots))


def make_scenario(
    layouts: Sequence[Sequence[Optional[object]]],
    participants: Sequence[Sequence[int]],
    seed: int = 0,
    cost_mode: CostMode = CostMode.UNIFORM,
) -> Scenario:
    """Hand-built scenario with real oracle statistics."""
    calendars = [make_calendar(a, layout) for a, layout in enumerate(layouts)]
    meetings = [
        MeetingSpec(meeting_id=i, participants=frozenset(members), round_index=i)
        for i, members in enumerate(participants)
    ]
    stats = compute_oracle_stats(SimpleNamespace(calendars=calendars, meetings=meetings))
    assert stats is not None, "hand-built scenario must be feasible"
    params = ScenarioParams(
        seed=seed, num_agents=len(calendars), num_slots=calendars[0].num_slots,
        num_meetings=len(meetings), cost_mode=cost_mode, participant_lists=[list(p) for p in participants],
    )
    scenario = Scenario(
        params=params, calendars=calendars, meetings=meetings,
        witness=dict(stats.optimal_assignment), oracle=stats, difficulty_d=Fraction(1),
    )
    scenario.difficulty_d = compute_difficulty(scenario)
    return scenario


def schedule(meeting_id: int, slot: int, *moves) -> ActionBatch:
    return ActionBatch(tuple(moves) + (Schedule(meeting_id=meeting_id, slot=slot),))


def dm(to: int, text: str) -> OutboundMessage:
    return OutboundMessage.dm(to, text)


@pytest.fixture
def two_agent_scenario() -> Scenario:
    """Two agents, four slots, one meeting. Slot 1 is free for both."""
    return make_scenario(
        layouts=[
            [2, None, 1, ("b", 3)],
            [1, None, None, 2],
        ],
        participants=[[0, 1]],
    )


@pytest.fixture
def three_agent_scenario() -> Scenario:
    """Three agents, six slots, two meetings, agent 2 outside the first meeting."""
    return make_scenario(
        layouts=[
            [None, 1, 2, None, ("b", 1), 3],
            [1, None, 1, None, 2, None],
            [None, None, 3, 1, None, 2],
        ],
        participants=[[0, 1], [1, 2]],
    )


@pytest.fixture
def prior_meeting_scenario() -> Scenario:
    """A prior meeting M5 between agents 0 and 2 sits at slot 0."""
    return make_scenario(
        layouts=[
            [("m", 5, [0, 2]), 3, ("b", 1), None, None],
            [2, ("b", 2), 3, None, 1],
            [("m", 5, [0, 2]), None, 1, None, None],
        ],
        participants=[[0, 1]],
    )


@pytest.fixture
def tmp_output(tmp_path) -> Path:
    return tmp_path / "runs"
