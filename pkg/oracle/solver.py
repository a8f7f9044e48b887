"""
Exact Full-Information Solvers

Minimum and worst complete schedules, feasible-assignment counting and the
greedy baseline, all over the same feasibility model:

- a slot is usable by an agent iff it is free or holds a movable errand;
  blocked errands and meetings already on the calendar are immovable here
- every errand displaced by one of the agent's meetings needs its own free
  landing slot not taken by another of that agent's meetings

Any free slot accepts any errand, so the per-agent bipartite matching of
displaced errands onto free slots reduces to a count check
(displaced <= free slots left over), which is monotone in the partial
assignment and therefore safe to prune on.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from loguru import logger

from core.calendar_types import Calendar, Errand, Free, MeetingSpec


class ProblemLike(Protocol):
    calendars: Sequence[Calendar]
    meetings: Sequence[MeetingSpec]


@dataclass
class JointAssignment:
    """Injective meeting -> slot map with the displacement cost it implies."""
    assignment: Dict[int, int]
    per_agent_cost: Dict[int, int]
    total_cost: int

    def slot_vector(self, meeting_ids: Iterable[int]) -> Tuple[int, ...]:
        return tuple(self.assignment[m] for m in meeting_ids)


@dataclass
class OracleStats:
    optimal_cost: int
    optimal_per_agent: Dict[int, int]
    worst_cost: int
    worst_per_agent: Dict[int, int]
    greedy_cost: Optional[int]
    feasible_count: int
    optimal_assignment: Dict[int, int] = field(default_factory=dict)


class _Model:
    """Precomputed per-agent slot costs and usability for one meeting set."""

    def __init__(self, problem: ProblemLike, meetings: Sequence[MeetingSpec]):
        self.meetings = list(meetings)
        self.num_agents = len(problem.calendars)
        self.num_slots = problem.calendars[0].num_slots if problem.calendars else 0

        usable = np.zeros((self.num_agents, self.num_slots), dtype=bool)
        cost = np.zeros((self.num_agents, self.num_slots), dtype=np.int64)
        free = np.zeros((self.num_agents, self.num_slots), dtype=bool)
        for cal in problem.calendars:
            for k, state in enumerate(cal.slots):
                if isinstance(state, Free):
                    usable[cal.agent_id, k] = True
                    free[cal.agent_id, k] = True
                elif isinstance(state, Errand) and not state.blocked:
                    usable[cal.agent_id, k] = True
                    cost[cal.agent_id, k] = state.cost

        self.free = free.tolist()
        self.agent_cost = cost.tolist()
        self.initial_pads = free.sum(axis=1).tolist()
        self.participants = [m.sorted_participants for m in self.meetings]

        # Static per-meeting view: joint cost per slot, None where any participant can't attend.
        self.slot_cost: List[List[Optional[int]]] = []
        for members in self.participants:
            joint_usable = usable[members].all(axis=0)
            joint_cost = cost[members].sum(axis=0)
            self.slot_cost.append([
                int(joint_cost[k]) if joint_usable[k] else None for k in range(self.num_slots)
            ])
        feasible_costs = [[c for c in row if c is not None] for row in self.slot_cost]
        self.static_min = [min(row) if row else None for row in feasible_costs]
        self.static_max = [max(row) if row else None for row in feasible_costs]

    def fits(self, idx: int, slot: int, displaced: List[int], pads: List[int]) -> bool:
        for a in self.participants[idx]:
            if self.free[a][slot]:
                if displaced[a] > pads[a] - 1:
                    return False
            elif displaced[a] + 1 > pads[a]:
                return False
        return True

    def place(self, idx: int, slot: int, displaced: List[int], pads: List[int], sign: int):
        for a in self.participants[idx]:
            if self.free[a][slot]:
                pads[a] -= sign
            else:
                displaced[a] += sign

    def per_agent(self, assignment: Dict[int, int]) -> Dict[int, int]:
        totals = {a: 0 for a in range(self.num_agents)}
        for idx, meeting in enumerate(self.meetings):
            slot = assignment[meeting.meeting_id]
            for a in self.participants[idx]:
                totals[a] += self.agent_cost[a][slot]
        return totals

    def result(self, slots: Sequence[int]) -> JointAssignment:
        assignment = {m.meeting_id: s for m, s in zip(self.meetings, slots)}
        per_agent = self.per_agent(assignment)
        return JointAssignment(assignment=assignment, per_agent_cost=per_agent, total_cost=sum(per_agent.values()))


def _select(problem: ProblemLike, meeting_subset: Optional[Iterable[int]]) -> List[MeetingSpec]:
    if meeting_subset is None:
        return list(problem.meetings)
    wanted = set(meeting_subset)
    return [m for m in problem.meetings if m.meeting_id in wanted]


def _branch_and_bound(model: _Model, maximize: bool) -> Optional[JointAssignment]:
    """
    Depth-first branch and bound in meeting order, slots ascending.

    Only strict improvements replace the incumbent, so the first optimum in
    lexicographic slot order wins ties.
    """
    n = len(model.meetings)
    if n == 0:
        return JointAssignment(assignment={}, per_agent_cost={a: 0 for a in range(model.num_agents)}, total_cost=0)
    bounds = model.static_max if maximize else model.static_min
    if any(b is None for b in bounds):
        return None
    # remaining[i] = optimistic cost of meetings i..n-1
    remaining = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        remaining[i] = remaining[i + 1] + bounds[i]

    displaced = [0] * model.num_agents
    pads = list(model.initial_pads)
    used = [False] * model.num_slots
    slots: List[int] = [0] * n
    best: List[Optional[int]] = [None]
    best_slots: List[int] = []

    def prune(partial: int, depth: int) -> bool:
        if best[0] is None:
            return False
        bound = partial + remaining[depth]
        return bound <= best[0] if maximize else bound >= best[0]

    def dfs(depth: int, partial: int):
        if depth == n:
            if best[0] is None or (partial > best[0] if maximize else partial < best[0]):
                best[0] = partial
                best_slots[:] = slots
            return
        if prune(partial, depth):
            return
        row = model.slot_cost[depth]
        for k in range(model.num_slots):
            c = row[k]
            if c is None or used[k] or not model.fits(depth, k, displaced, pads):
                continue
            if prune(partial + c, depth + 1):
                continue
            used[k] = True
            slots[depth] = k
            model.place(depth, k, displaced, pads, +1)
            dfs(depth + 1, partial + c)
            model.place(depth, k, displaced, pads, -1)
            used[k] = False

    dfs(0, 0)
    if best[0] is None:
        return None
    return model.result(best_slots)


def min_cost_schedule(problem: ProblemLike, meeting_subset: Optional[Iterable[int]] = None) -> Optional[JointAssignment]:
    """
    Cheapest feasible assignment of `meeting_subset` (all meetings by default).

    Returns None when no feasible assignment exists.
    """
    model = _Model(problem, _select(problem, meeting_subset))
    return _branch_and_bound(model, maximize=False)


def worst_cost_schedule(problem: ProblemLike, meeting_subset: Optional[Iterable[int]] = None) -> Optional[JointAssignment]:
    """Most expensive complete assignment under the same feasibility model."""
    model = _Model(problem, _select(problem, meeting_subset))
    return _branch_and_bound(model, maximize=True)


def count_feasible_assignments(problem: ProblemLike) -> int:
    """Exact number of injective meeting -> slot assignments that are feasible."""
    model = _Model(problem, problem.meetings)
    n = len(model.meetings)
    if n == 0:
        return 1
    if any(b is None for b in model.static_min):
        return 0

    displaced = [0] * model.num_agents
    pads = list(model.initial_pads)
    used = [False] * model.num_slots

    def candidates(depth: int) -> List[int]:
        row = model.slot_cost[depth]
        return [
            k for k in range(model.num_slots)
            if row[k] is not None and not used[k] and model.fits(depth, k, displaced, pads)
        ]

    def dfs(depth: int) -> int:
        options = candidates(depth)
        if depth == n - 1:
            return len(options)
        total = 0
        for k in options:
            used[k] = True
            model.place(depth, k, displaced, pads, +1)
            total += dfs(depth + 1)
            model.place(depth, k, displaced, pads, -1)
            used[k] = False
        return total

    return dfs(0)


def greedy_cost(problem: ProblemLike) -> Optional[int]:
    """
    Stream-order greedy: each meeting takes its cheapest feasible slot given
    earlier picks, ties by slot index. None means the greedy got stuck.
    """
    model = _Model(problem, problem.meetings)
    displaced = [0] * model.num_agents
    pads = list(model.initial_pads)
    used = [False] * model.num_slots
    total = 0
    for depth, meeting in enumerate(model.meetings):
        row = model.slot_cost[depth]
        best_slot, best_cost = None, None
        for k in range(model.num_slots):
            c = row[k]
            if c is None or used[k] or not model.fits(depth, k, displaced, pads):
                continue
            if best_cost is None or c < best_cost:
                best_slot, best_cost = k, c
        if best_slot is None:
            logger.debug(f"[Oracle] greedy stuck at meeting M{meeting.meeting_id}")
            return None
        used[best_slot] = True
        model.place(depth, best_slot, displaced, pads, +1)
        total += best_cost
    return total


def evaluate_assignment(problem: ProblemLike, assignment: Dict[int, int]) -> Optional[JointAssignment]:
    """Cost of a given meeting -> slot map, or None if it is not feasible."""
    meetings = _select(problem, assignment.keys())
    if len(meetings) != len(assignment) or len(set(assignment.values())) != len(assignment):
        return None
    model = _Model(problem, meetings)
    displaced = [0] * model.num_agents
    pads = list(model.initial_pads)
    slots = []
    for depth, meeting in enumerate(model.meetings):
        slot = assignment[meeting.meeting_id]
        if not 0 <= slot < model.num_slots or model.slot_cost[depth][slot] is None:
            return None
        if not model.fits(depth, slot, displaced, pads):
            return None
        model.place(depth, slot, displaced, pads, +1)
        slots.append(slot)
    return model.result(slots)


def compute_oracle_stats(problem: ProblemLike) -> Optional[OracleStats]:
    """All oracle statistics a scenario stores; None if the task is infeasible."""
    best = min_cost_schedule(problem)
    if best is None:
        return None
    worst = worst_cost_schedule(problem)
    stats = OracleStats(
        optimal_cost=best.total_cost,
        optimal_per_agent=best.per_agent_cost,
        worst_cost=worst.total_cost,
        worst_per_agent=worst.per_agent_cost,
        greedy_cost=greedy_cost(problem),
        feasible_count=count_feasible_assignments(problem),
        optimal_assignment=best.assignment,
    )
    logger.debug(
        f"[Oracle] optimal={stats.optimal_cost} worst={stats.worst_cost} "
        f"greedy={stats.greedy_cost} F={stats.feasible_count}"
    )
    return stats
