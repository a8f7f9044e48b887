import sys
from itertools import permutations
from pathlib import Path
from types import SimpleNamespace

import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from conftest import make_calendar
from core.calendar_types import Errand, Free, MeetingSpec
from oracle.solver import (
    compute_oracle_stats,
    count_feasible_assignments,
    evaluate_assignment,
    greedy_cost,
    min_cost_schedule,
    worst_cost_schedule,
)
from scenario.generator import CostMode, ScenarioParams, generate_scenario


def problem(layouts, participants):
    return SimpleNamespace(
        calendars=[make_calendar(a, layout) for a, layout in enumerate(layouts)],
        meetings=[
            MeetingSpec(meeting_id=i, participants=frozenset(p), round_index=i) for i, p in enumerate(participants)
        ],
    )


def brute_force(prob):
    """Every feasible injective assignment in lexicographic slot order, with its cost."""
    num_slots = prob.calendars[0].num_slots
    results = []
    for slots in permutations(range(num_slots), len(prob.meetings)):
        total, feasible = 0, True
        for cal in prob.calendars:
            used = [s for m, s in zip(prob.meetings, slots) if cal.agent_id in m.participants]
            displaced = 0
            for s in used:
                state = cal[s]
                if isinstance(state, Free):
                    continue
                if not isinstance(state, Errand) or state.blocked:
                    feasible = False
                    break
                displaced += 1
                total += state.cost
            pads = sum(1 for k in cal.free_slots() if k not in used)
            if not feasible or displaced > pads:
                feasible = False
                break
        if feasible:
            results.append((total, slots))
    return results


@pytest.fixture
def greedy_trap():
    """Greedy takes the shared free slot for M0 and pushes M1 onto a cost-3 errand."""
    return problem(
        layouts=[
            [None, 1, ("b", 1), ("b", 1)],
            [None, None, None, None],
            [None, ("b", 1), 3, ("b", 1)],
        ],
        participants=[[0, 1], [1, 2]],
    )


def test_greedy_trap(greedy_trap):
    assert greedy_cost(greedy_trap) == 3
    best = min_cost_schedule(greedy_trap)
    assert best.total_cost == 1
    assert best.assignment == {0: 1, 1: 0}
    assert best.per_agent_cost == {0: 1, 1: 0, 2: 0}
    assert worst_cost_schedule(greedy_trap).total_cost == 4
    assert count_feasible_assignments(greedy_trap) == 3


def test_landing_pads_are_counted():
    # agent 0 has a single free slot, so at most one of its errands can be displaced
    prob = problem(layouts=[[1, 1, None], [None, None, None]], participants=[[0, 1], [0, 1]])
    assert min_cost_schedule(prob) is None
    assert count_feasible_assignments(prob) == 0
    assert compute_oracle_stats(prob) is None


def test_greedy_stuck_returns_none():
    # M0 greedily takes slot 0, the only slot M1 can use
    prob = problem(
        layouts=[[None, 1, ("b", 1)], [None, None, None], [None, ("b", 1), ("b", 1)]],
        participants=[[0, 1], [1, 2]],
    )
    assert greedy_cost(prob) is None
    assert min_cost_schedule(prob).assignment == {0: 1, 1: 0}


def test_evaluate_assignment(greedy_trap):
    assert evaluate_assignment(greedy_trap, {0: 0, 1: 2}).total_cost == 3
    assert evaluate_assignment(greedy_trap, {0: 0, 1: 0}) is None
    assert evaluate_assignment(greedy_trap, {0: 2, 1: 0}) is None


def test_meeting_subset(greedy_trap):
    only_second = min_cost_schedule(greedy_trap, meeting_subset=[1])
    assert only_second.assignment == {1: 0}
    assert only_second.total_cost == 0
    assert min_cost_schedule(greedy_trap, meeting_subset=[]).total_cost == 0


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("cost_mode", [CostMode.UNIFORM, CostMode.VARIED])
def test_matches_brute_force(seed, cost_mode):
    scenario = generate_scenario(ScenarioParams(
        seed=seed, num_agents=3, num_slots=6, num_meetings=3, participants_per_meeting=2,
        density=0.6, blocked_errand_count=1, num_prior_meetings=1, cost_mode=cost_mode,
    ))
    feasible = brute_force(scenario)
    assert feasible, "generated scenarios are solvable"

    costs = [c for c, _ in feasible]
    best_cost = min(costs)
    first_best = next(slots for c, slots in feasible if c == best_cost)
    best = min_cost_schedule(scenario)
    assert best.total_cost == best_cost
    assert tuple(best.assignment[m.meeting_id] for m in scenario.meetings) == first_best
    assert worst_cost_schedule(scenario).total_cost == max(costs)
    assert count_feasible_assignments(scenario) == len(feasible)

    g = greedy_cost(scenario)
    assert g is None or g >= best_cost
    assert scenario.oracle.optimal_cost == best_cost
    assert scenario.oracle.feasible_count == len(feasible)
