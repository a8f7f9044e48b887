"""
Private semantic labels for errands and meetings.

Labels come from a static bank keyed by sensitivity tier. They are assigned
once per scenario from the scenario's own RNG stream and stay fixed for the
whole game. Tiers are kept for analysis and never shown to agents.
"""

from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from core.batch_validation import render_slot
from core.calendar_types import Calendar, Errand, MeetingSpec, ScheduledMeeting
from core.errors import LabelBankError
from scenario.generator import Scenario

LABEL_TIERS = ("public", "sensitive", "very_sensitive")


@dataclass(frozen=True)
class LabelBank:
    tiers: Dict[str, Tuple[str, ...]]

    @classmethod
    def from_dict(cls, data: Dict[str, Sequence[str]]) -> "LabelBank":
        return cls(tiers={tier: tuple(labels) for tier, labels in data.items()})

    def require(self, tiers: Sequence[str]):
        for tier in tiers:
            if not self.tiers.get(tier):
                raise LabelBankError(f"Label bank has no labels for tier '{tier}'")


def assign_labels(scenario: Scenario, bank: LabelBank, tiers: Sequence[str] = LABEL_TIERS) -> Scenario:
    """
    Label every errand, prior meeting and incoming meeting.

    Items are visited agent by agent, slot by slot, then incoming meetings in
    stream order. Each draws a tier from the RNG; labels within a tier are
    handed out round-robin, so small banks repeat deterministically.
    A prior meeting gets one label shared by all of its copies.
    """
    bank.require(tiers)
    bit_generator = np.random.PCG64(scenario.params.seed)
    if scenario.rng_state:
        bit_generator.state = scenario.rng_state
    rng = np.random.Generator(bit_generator)
    cursor = {tier: 0 for tier in tiers}

    def draw() -> Tuple[str, str]:
        tier = tiers[int(rng.integers(len(tiers)))]
        labels = bank.tiers[tier]
        label = labels[cursor[tier] % len(labels)]
        cursor[tier] += 1
        return label, tier

    assignments: Dict[Tuple[int, int], str] = {}
    tier_of: Dict[Tuple[int, int], str] = {}
    meeting_labels: Dict[int, Tuple[str, str]] = {}
    calendars: List[Calendar] = []
    for cal in scenario.calendars:
        slots = list(cal.slots)
        for k, state in enumerate(slots):
            if isinstance(state, Errand):
                label, tier = draw()
                slots[k] = replace(state, label=label)
            elif isinstance(state, ScheduledMeeting):
                if state.meeting_id not in meeting_labels:
                    meeting_labels[state.meeting_id] = draw()
                label, tier = meeting_labels[state.meeting_id]
                slots[k] = replace(state, label=label)
            else:
                continue
            assignments[(cal.agent_id, k)] = label
            tier_of[(cal.agent_id, k)] = tier
        calendars.append(Calendar(agent_id=cal.agent_id, slots=tuple(slots)))

    meetings: List[MeetingSpec] = []
    for meeting in scenario.meetings:
        label, _ = draw()
        meetings.append(replace(meeting, label=label))

    logger.debug(f"[Labels] {scenario.scenario_id}: {len(assignments)} slot labels, {len(meetings)} meeting labels")
    return replace(
        scenario,
        calendars=calendars,
        meetings=meetings,
        label_assignments=assignments,
        label_tiers=tier_of,
        rng_state=rng.bit_generator.state,
    )


def can_see_label(viewer: int, owner: int, state) -> bool:
    """Own errands are visible; a meeting label only to that meeting's participants."""
    if isinstance(state, Errand):
        return viewer == owner
    if isinstance(state, ScheduledMeeting):
        return viewer in state.participants
    return False


def hydrate_calendar_render(calendar: Calendar, viewer: int, log_scale: bool = True) -> str:
    """Render `calendar` as `viewer` may see it."""
    lines = []
    for k, state in enumerate(calendar.slots):
        visible = can_see_label(viewer, calendar.agent_id, state)
        lines.append(f"Slot {k:>2}: {render_slot(state, include_labels=visible, log_scale=log_scale)}")
    return "\n".join(lines)


def meeting_label_for(meeting: MeetingSpec, viewer: int) -> Optional[str]:
    return meeting.label if viewer in meeting.participants else None
