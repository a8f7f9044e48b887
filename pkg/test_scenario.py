import sys
from fractions import Fraction
from pathlib import Path

import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from core.calendar_types import Errand, ScheduledMeeting
from core.errors import ConfigError, LabelBankError
from oracle.solver import evaluate_assignment
from scenario.generator import (
    CostMode,
    DifficultyBucket,
    Scenario,
    ScenarioParams,
    assignment_space,
    bucket_difficulty,
    generate_scenario,
    suite_tertiles,
)
from scenario.labels import LabelBank, assign_labels, hydrate_calendar_render, meeting_label_for

BANK = LabelBank.from_dict({
    "public": ["gym", "groceries"],
    "sensitive": ["therapy", "job interview"],
    "very_sensitive": ["oncology follow-up"],
})


def small_params(seed=3, **overrides):
    values = dict(
        seed=seed, num_agents=4, num_slots=8, num_meetings=3, participants_per_meeting=2,
        density=0.6, blocked_errand_count=1, num_prior_meetings=1, cost_mode=CostMode.VARIED,
    )
    values.update(overrides)
    return ScenarioParams(**values)


def test_assignment_space():
    assert assignment_space(16, 5) == 524160
    assert assignment_space(4, 0) == 1


def test_generation_is_deterministic():
    first = generate_scenario(small_params())
    second = generate_scenario(small_params())
    assert first.to_dict() == second.to_dict()
    other = generate_scenario(small_params(seed=4))
    assert other.to_dict() != first.to_dict()


def test_witness_is_feasible_and_injective():
    for seed in range(5):
        scenario = generate_scenario(small_params(seed=seed))
        assert len(set(scenario.witness.values())) == len(scenario.meetings)
        assert evaluate_assignment(scenario, scenario.witness) is not None
        assert scenario.optimal_cost <= scenario.worst_complete_cost
        assert scenario.greedy_cost is None or scenario.greedy_cost >= scenario.optimal_cost
        assert Fraction(0) < scenario.difficulty_d <= 1


def test_witness_slots_hold_errands():
    # force_witness_errand seeds an errand on each participant's witness slot while density allows
    scenario = generate_scenario(small_params(density=0.9, blocked_errand_count=0, num_prior_meetings=0))
    for meeting in scenario.meetings:
        slot = scenario.witness[meeting.meeting_id]
        for a in meeting.participants:
            state = scenario.calendars[a][slot]
            assert isinstance(state, Errand) and not state.blocked


def test_prior_meetings_are_mirrored():
    scenario = generate_scenario(small_params())
    assert len(scenario.prior_meetings) == 1
    prior = scenario.prior_meetings[0]
    assert prior.meeting_id == scenario.params.num_meetings
    for a in prior.participants:
        state = scenario.calendars[a][prior.slot]
        assert isinstance(state, ScheduledMeeting)
        assert state.participants == frozenset(prior.participants)
    assert prior.slot not in scenario.witness.values()


def test_uniform_costs_are_all_one():
    scenario = generate_scenario(small_params(cost_mode=CostMode.UNIFORM))
    assert {e.cost for cal in scenario.calendars for _, e in cal.errands()} == {1}


def test_scenario_dict_round_trip():
    scenario = generate_scenario(small_params())
    restored = Scenario.from_dict(scenario.to_dict())
    assert restored.to_dict() == scenario.to_dict()
    assert restored.scenario_id == "varied-seed3"


@pytest.mark.parametrize("overrides", [
    {"num_meetings": 9},
    {"num_agents": 1},
    {"density": [0.5, 0.5]},
    {"density": 1.5},
    {"participant_lists": [[0, 1], [2, 2], [1, 3]]},
    {"participants_per_meeting": 5},
])
def test_invalid_params(overrides):
    with pytest.raises(ConfigError):
        small_params(**overrides).check()


def test_difficulty_buckets():
    assert bucket_difficulty(0.9, (0.2, 0.5)) == DifficultyBucket.EASY
    assert bucket_difficulty(0.3, (0.2, 0.5)) == DifficultyBucket.MEDIUM
    assert bucket_difficulty(Fraction(1, 10), (0.2, 0.5)) == DifficultyBucket.HARD
    low, high = suite_tertiles([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7])
    assert low < high
    assert suite_tertiles([]) == (0.0, 0.0)


def test_labels_are_deterministic_and_complete():
    scenario = generate_scenario(small_params())
    labelled = assign_labels(scenario, BANK)
    again = assign_labels(scenario, BANK)
    assert labelled.to_dict() == again.to_dict()
    assert all(m.label for m in labelled.meetings)
    occupied = {(c.agent_id, k) for c in labelled.calendars for k in range(c.num_slots) if not c.is_free(k)}
    assert set(labelled.label_assignments) == occupied
    assert set(labelled.label_tiers.values()) <= {"public", "sensitive", "very_sensitive"}


def test_prior_meeting_copies_share_a_label():
    labelled = assign_labels(generate_scenario(small_params()), BANK)
    prior = labelled.prior_meetings[0]
    labels = {labelled.label_assignments[(a, prior.slot)] for a in prior.participants}
    assert len(labels) == 1


def test_label_visibility():
    labelled = assign_labels(generate_scenario(small_params()), BANK)
    owner = labelled.calendars[0]
    errand_slot = owner.errands()[0][0]
    label = owner[errand_slot].label
    own_view = hydrate_calendar_render(owner, viewer=0).splitlines()[errand_slot]
    other_view = hydrate_calendar_render(owner, viewer=1).splitlines()[errand_slot]
    assert f'label="{label}"' in own_view
    assert "label=" not in other_view

    meeting = labelled.meetings[0]
    outsider = next(a for a in range(labelled.num_agents) if a not in meeting.participants)
    assert meeting_label_for(meeting, min(meeting.participants)) == meeting.label
    assert meeting_label_for(meeting, outsider) is None


def test_missing_tier_raises():
    with pytest.raises(LabelBankError):
        assign_labels(generate_scenario(small_params()), LabelBank.from_dict({"public": ["gym"]}))
