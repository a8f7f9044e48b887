"""
Seeded Scenario Generator

Builds solvable scheduling tasks backwards from a hidden witness solution.
All sampling consumes one PCG64 stream in this fixed order:

    1. participant sets of the incoming meetings
    2. witness slots (pairwise distinct)
    3. prior meetings (participants, slot)
    4. errand placement per agent
    5. absorbing-slot carve-outs per agent
    6. errand costs
    7. blocked flags per agent

assign_labels later resumes the same stream from Scenario.rng_state.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from config import settings
from core.calendar_types import FREE, Calendar, Errand, MeetingSpec, ScheduledMeeting
from core.errors import ConfigError, GenerationInfeasibleError
from oracle.solver import OracleStats, compute_oracle_stats, evaluate_assignment


class CostMode(str, Enum):
    UNIFORM = "uniform"
    VARIED = "varied"


class DifficultyBucket(str, Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"


class ScenarioParams(BaseModel):
    """Scenario generation parameters; key names match the suite config file."""
    seed: int = Field(default=0, description="RNG seed; fixes all randomness")
    num_agents: int = Field(default=settings.scenario.num_agents)
    num_slots: int = Field(default=settings.scenario.num_slots)
    density: Union[float, List[float]] = Field(default=0.8, description="Errand fraction, shared or per agent")
    num_meetings: int = Field(default=settings.scenario.num_meetings)
    pref_level: int = Field(default=settings.scenario.pref_level)
    errand_cost_level: Optional[int] = Field(default=None, description="Defaults to pref_level")
    meeting_cost_level: int = Field(default=settings.scenario.meeting_cost_level)
    participant_lists: Optional[List[List[int]]] = Field(default=None)
    participants_per_meeting: int = Field(default=settings.scenario.participants_per_meeting)
    num_prior_meetings: int = Field(default=settings.scenario.num_prior_meetings)
    blocked_errand_count: int = Field(default=0, ge=0)
    force_witness_errand: bool = Field(default=True)
    cost_mode: CostMode = Field(default=CostMode.UNIFORM)
    resample_budget: int = Field(default=settings.scenario.resample_budget, ge=1)

    @property
    def cost_levels(self) -> int:
        return self.errand_cost_level if self.errand_cost_level is not None else self.pref_level

    def densities(self) -> List[float]:
        if isinstance(self.density, list):
            return list(self.density)
        return [float(self.density)] * self.num_agents

    def check(self):
        """Raise ConfigError unless the parameter invariants hold."""
        n, s, m = self.num_agents, self.num_slots, self.num_meetings
        if n < 2 or s < 1 or m < 0:
            raise ConfigError(f"Need N >= 2, S >= 1, M >= 0 (got N={n}, S={s}, M={m})")
        if m > s:
            raise ConfigError(f"num_meetings ({m}) exceeds num_slots ({s})")
        densities = self.densities()
        if len(densities) != n:
            raise ConfigError(f"density vector has {len(densities)} entries, expected {n}")
        if any(not 0.0 <= d <= 1.0 for d in densities):
            raise ConfigError(f"densities must lie in [0, 1]: {densities}")
        if self.participant_lists is not None:
            if len(self.participant_lists) != m:
                raise ConfigError(f"participant_lists has {len(self.participant_lists)} entries, expected {m}")
            for members in self.participant_lists:
                if not 2 <= len(set(members)) <= n or any(not 0 <= a < n for a in members):
                    raise ConfigError(f"invalid participant list {members} for N={n}")
        elif m > 0 and not 2 <= self.participants_per_meeting <= n:
            raise ConfigError(f"participants_per_meeting must be in [2, {n}]")
        if self.cost_levels < 1:
            raise ConfigError("errand_cost_level must be >= 1")


@dataclass
class PriorMeeting:
    """A meeting already on its participants' calendars at game start."""
    meeting_id: int
    participants: List[int]
    slot: int


@dataclass
class Scenario:
    """One seeded task instance with its hidden witness and oracle statistics."""
    params: ScenarioParams
    calendars: List[Calendar]
    meetings: List[MeetingSpec]
    witness: Dict[int, int]
    oracle: OracleStats
    difficulty_d: Fraction
    prior_meetings: List[PriorMeeting] = field(default_factory=list)
    absorbers: Dict[int, List[int]] = field(default_factory=dict)
    label_assignments: Dict[Tuple[int, int], str] = field(default_factory=dict)
    label_tiers: Dict[Tuple[int, int], str] = field(default_factory=dict)
    rng_state: Dict[str, Any] = field(default_factory=dict)
    difficulty_bucket: Optional[DifficultyBucket] = None

    @property
    def scenario_id(self) -> str:
        return f"{self.params.cost_mode.value}-seed{self.params.seed}"

    @property
    def num_agents(self) -> int:
        return len(self.calendars)

    @property
    def num_slots(self) -> int:
        return self.params.num_slots

    @property
    def optimal_cost(self) -> int:
        return self.oracle.optimal_cost

    @property
    def greedy_cost(self) -> Optional[int]:
        return self.oracle.greedy_cost

    @property
    def worst_complete_cost(self) -> int:
        return self.oracle.worst_cost

    def meeting_lookup(self) -> Dict[int, MeetingSpec]:
        return {m.meeting_id: m for m in self.meetings}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario_id": self.scenario_id,
            "params": self.params.model_dump(mode="json"),
            "calendars": [c.to_dict() for c in self.calendars],
            "meetings": [m.to_dict() for m in self.meetings],
            "prior_meetings": [
                {"meeting_id": p.meeting_id, "participants": p.participants, "slot": p.slot}
                for p in self.prior_meetings
            ],
            "witness": {str(k): v for k, v in sorted(self.witness.items())},
            "absorbers": {str(k): v for k, v in sorted(self.absorbers.items())},
            "oracle": {
                "optimal_cost": self.oracle.optimal_cost,
                "optimal_per_agent": {str(k): v for k, v in sorted(self.oracle.optimal_per_agent.items())},
                "optimal_assignment": {str(k): v for k, v in sorted(self.oracle.optimal_assignment.items())},
                "worst_complete_cost": self.oracle.worst_cost,
                "worst_per_agent": {str(k): v for k, v in sorted(self.oracle.worst_per_agent.items())},
                "greedy_cost": self.oracle.greedy_cost,
                "feasible_count": self.oracle.feasible_count,
            },
            "difficulty_d": {
                "numerator": self.difficulty_d.numerator,
                "denominator": self.difficulty_d.denominator,
                "value": float(self.difficulty_d),
            },
            "difficulty_bucket": self.difficulty_bucket.value if self.difficulty_bucket else None,
            "labels": [
                {"agent": a, "slot": s, "label": label, "tier": self.label_tiers.get((a, s))}
                for (a, s), label in sorted(self.label_assignments.items())
            ],
            "rng_state": self.rng_state,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Scenario":
        oracle = data["oracle"]
        d = data["difficulty_d"]
        labels = data.get("labels", [])
        bucket = data.get("difficulty_bucket")
        return cls(
            params=ScenarioParams.model_validate(data["params"]),
            calendars=[Calendar.from_dict(c) for c in data["calendars"]],
            meetings=[MeetingSpec.from_dict(m) for m in data["meetings"]],
            witness={int(k): int(v) for k, v in data["witness"].items()},
            oracle=OracleStats(
                optimal_cost=int(oracle["optimal_cost"]),
                optimal_per_agent={int(k): int(v) for k, v in oracle["optimal_per_agent"].items()},
                worst_cost=int(oracle["worst_complete_cost"]),
                worst_per_agent={int(k): int(v) for k, v in oracle["worst_per_agent"].items()},
                greedy_cost=oracle.get("greedy_cost"),
                feasible_count=int(oracle["feasible_count"]),
                optimal_assignment={int(k): int(v) for k, v in oracle.get("optimal_assignment", {}).items()},
            ),
            difficulty_d=Fraction(int(d["numerator"]), int(d["denominator"])),
            prior_meetings=[
                PriorMeeting(int(p["meeting_id"]), [int(a) for a in p["participants"]], int(p["slot"]))
                for p in data.get("prior_meetings", [])
            ],
            absorbers={int(k): [int(s) for s in v] for k, v in data.get("absorbers", {}).items()},
            label_assignments={(int(r["agent"]), int(r["slot"])): r["label"] for r in labels},
            label_tiers={(int(r["agent"]), int(r["slot"])): r["tier"] for r in labels if r.get("tier")},
            rng_state=data.get("rng_state", {}),
            difficulty_bucket=DifficultyBucket(bucket) if bucket else None,
        )


# ---------------------------------------------------------------------------
# Difficulty
# ---------------------------------------------------------------------------

def assignment_space(num_slots: int, num_meetings: int) -> int:
    """Number of injective meeting -> slot maps, S!/(S-M)!."""
    return math.perm(num_slots, num_meetings)


def compute_difficulty(scenario: Scenario) -> Fraction:
    """d = F / (S!/(S-M)!), the feasible share of all injective assignments."""
    return Fraction(scenario.oracle.feasible_count, assignment_space(scenario.num_slots, len(scenario.meetings)))


def bucket_difficulty(d: Union[Fraction, float], thresholds: Tuple[float, float]) -> DifficultyBucket:
    """Higher d means more feasible assignments, i.e. an easier task."""
    hard_below, easy_from = thresholds
    value = float(d)
    if value >= easy_from:
        return DifficultyBucket.EASY
    if value < hard_below:
        return DifficultyBucket.HARD
    return DifficultyBucket.MEDIUM


def suite_tertiles(ds: Sequence[Union[Fraction, float]]) -> Tuple[float, float]:
    if not ds:
        return (0.0, 0.0)
    values = np.array([float(d) for d in ds])
    low, high = np.quantile(values, [1 / 3, 2 / 3])
    return float(low), float(high)


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

class _Attempt:
    """Mutable layout for one generation attempt."""

    def __init__(self, params: ScenarioParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng
        n, s = params.num_agents, params.num_slots
        # layout[a][k]: None free, "errand", or ("meeting", prior index)
        self.layout: List[List[Any]] = [[None] * s for _ in range(n)]
        self.participants: List[List[int]] = []
        self.witness: List[int] = []
        self.priors: List[PriorMeeting] = []
        self.absorbers: Dict[int, List[int]] = {}

    def _choice(self, options: Sequence[int]) -> int:
        return int(options[int(self.rng.integers(len(options)))])

    def _sample(self, options: Sequence[int], count: int) -> List[int]:
        if count <= 0:
            return []
        picked = self.rng.choice(np.asarray(options, dtype=np.int64), size=count, replace=False)
        return sorted(int(x) for x in picked)

    def draw_participants(self):
        p = self.params
        if p.participant_lists is not None:
            self.participants = [sorted(set(members)) for members in p.participant_lists]
            return
        self.participants = [
            self._sample(range(p.num_agents), p.participants_per_meeting) for _ in range(p.num_meetings)
        ]

    def draw_witness(self):
        taken: set = set()
        for _ in self.participants:
            options = [k for k in range(self.params.num_slots) if k not in taken]
            slot = self._choice(options)
            taken.add(slot)
            self.witness.append(slot)

    def witness_slots_of(self, agent: int) -> List[int]:
        return sorted(w for w, members in zip(self.witness, self.participants) if agent in members)

    def draw_prior_meetings(self) -> bool:
        p = self.params
        witness = set(self.witness)
        for j in range(p.num_prior_meetings):
            members = self._sample(range(p.num_agents), 2)
            options = [
                k for k in range(p.num_slots)
                if k not in witness and all(self.layout[a][k] is None for a in members)
            ]
            if not options:
                return False
            slot = self._choice(options)
            meeting_id = p.num_meetings + j
            for a in members:
                self.layout[a][slot] = ("meeting", meeting_id)
            self.priors.append(PriorMeeting(meeting_id=meeting_id, participants=members, slot=slot))
        return True

    def place_errands(self):
        p = self.params
        for agent, density in enumerate(p.densities()):
            target = math.floor(p.num_slots * density)
            open_slots = [k for k in range(p.num_slots) if self.layout[agent][k] is None]
            seeded: List[int] = []
            if p.force_witness_errand:
                seeded = [k for k in self.witness_slots_of(agent) if k in open_slots][:target]
            for k in seeded:
                self.layout[agent][k] = "errand"
            rest = [k for k in open_slots if k not in seeded]
            for k in self._sample(rest, min(len(rest), target - len(seeded))):
                self.layout[agent][k] = "errand"

    def carve_absorbers(self) -> bool:
        """Keep one free non-witness slot per errand sitting on the agent's witness slots."""
        p = self.params
        for agent in range(p.num_agents):
            own_witness = set(self.witness_slots_of(agent))
            pressure = sum(1 for k in own_witness if self.layout[agent][k] == "errand")
            free = [k for k in range(p.num_slots) if k not in own_witness and self.layout[agent][k] is None]
            missing = pressure - len(free)
            if missing > 0:
                removable = [
                    k for k in range(p.num_slots)
                    if k not in own_witness and self.layout[agent][k] == "errand"
                ]
                if len(removable) < missing:
                    return False
                for k in self._sample(removable, missing):
                    self.layout[agent][k] = None
                free = [k for k in range(p.num_slots) if k not in own_witness and self.layout[agent][k] is None]
            self.absorbers[agent] = self._sample(free, pressure)
        return True

    def build_calendars(self) -> List[Calendar]:
        p = self.params
        positions = [
            (a, k) for a in range(p.num_agents) for k in range(p.num_slots) if self.layout[a][k] == "errand"
        ]
        if p.cost_mode == CostMode.VARIED:
            costs = np.array([(i % p.cost_levels) + 1 for i in range(len(positions))], dtype=np.int64)
            self.rng.shuffle(costs)
            costs = [int(c) for c in costs]
        else:
            costs = [1] * len(positions)

        blocked: set = set()
        for agent in range(p.num_agents):
            own_witness = set(self.witness_slots_of(agent))
            candidates = [k for (a, k) in positions if a == agent and k not in own_witness]
            count = min(p.blocked_errand_count, len(candidates))
            if count < p.blocked_errand_count:
                logger.warning(
                    f"[Generator] seed {p.seed}: agent {agent} has {len(candidates)} blockable errands, "
                    f"clamping blocked count {p.blocked_errand_count} -> {count}"
                )
            blocked.update((agent, k) for k in self._sample(candidates, count))

        prior_members = {pm.meeting_id: frozenset(pm.participants) for pm in self.priors}
        calendars = []
        errand_ids = {pos: i for i, pos in enumerate(positions)}
        for agent in range(p.num_agents):
            slots = []
            for k in range(p.num_slots):
                cell = self.layout[agent][k]
                if cell == "errand":
                    i = errand_ids[(agent, k)]
                    slots.append(Errand(errand_id=i, cost=costs[i], blocked=(agent, k) in blocked))
                elif isinstance(cell, tuple):
                    meeting_id = cell[1]
                    slots.append(ScheduledMeeting(
                        meeting_id=meeting_id,
                        participants=prior_members[meeting_id],
                        cost=p.meeting_cost_level,
                    ))
                else:
                    slots.append(FREE)
            calendars.append(Calendar(agent_id=agent, slots=tuple(slots)))
        return calendars


def generate_scenario(params: ScenarioParams) -> Scenario:
    """
    Generate one solvable scenario. Same params, same scenario.

    Raises:
        ConfigError: the parameters violate their invariants
        GenerationInfeasibleError: no valid layout within the resample budget
    """
    params.check()
    rng = np.random.Generator(np.random.PCG64(params.seed))

    for attempt in range(params.resample_budget):
        layout = _Attempt(params, rng)
        layout.draw_participants()
        layout.draw_witness()
        if not layout.draw_prior_meetings():
            continue
        layout.place_errands()
        if not layout.carve_absorbers():
            continue
        calendars = layout.build_calendars()

        meetings = [
            MeetingSpec(meeting_id=i, participants=frozenset(members), round_index=i)
            for i, members in enumerate(layout.participants)
        ]
        witness = {i: w for i, w in enumerate(layout.witness)}
        candidate = _Problem(calendars, meetings)
        if evaluate_assignment(candidate, witness) is None:
            logger.debug(f"[Generator] seed {params.seed}: witness infeasible on attempt {attempt}, resampling")
            continue
        stats = compute_oracle_stats(candidate)
        if stats is None:
            continue

        scenario = Scenario(
            params=params,
            calendars=calendars,
            meetings=meetings,
            witness=witness,
            oracle=stats,
            difficulty_d=Fraction(1),
            prior_meetings=layout.priors,
            absorbers=layout.absorbers,
            rng_state=rng.bit_generator.state,
        )
        scenario.difficulty_d = compute_difficulty(scenario)
        thresholds = settings.difficulty.thresholds
        if thresholds is not None:
            scenario.difficulty_bucket = bucket_difficulty(scenario.difficulty_d, thresholds)
        logger.info(
            f"[Generator] {scenario.scenario_id}: N={params.num_agents} S={params.num_slots} "
            f"M={params.num_meetings} optimal={stats.optimal_cost} d={float(scenario.difficulty_d):.4f}"
        )
        return scenario

    raise GenerationInfeasibleError(
        f"No valid scenario for seed {params.seed} after {params.resample_budget} attempts"
    )


@dataclass
class _Problem:
    calendars: List[Calendar]
    meetings: List[MeetingSpec]
